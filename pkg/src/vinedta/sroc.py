"""Summary ROC outputs: quantile curves, summary point, density contours.

All geometry is driven by the bivariate (sensitivity, specificity)
margin of the fitted trivariate model.  When the vine permutation makes
that pair an explicit edge the copula's h-functions are used directly;
otherwise the pair's copula density is obtained by integrating the vine
density over the third coordinate with a quadrature rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logit

from .copulas import BivariateCopula, CopulaFamily
from .model import ModelSpec
from .numerics import gauss_legendre_01

DEFAULT_LEVELS = (0.5, 0.25, 0.1, 0.01)
_CURVE_GRID = np.linspace(0.01, 0.99, 99)
_MARGIN_RULE_N = 41


@dataclass(frozen=True)
class CurveSet:
    """One quantile regression curve in (specificity, sensitivity) space."""

    direction: str  # "x1_on_x2" or "x2_on_x1"
    quantile: float
    points: np.ndarray  # shape (n, 2): columns (spec axis, sens axis)
    scale: str = "original"

    def to_csv(self) -> str:
        lines = ["direction,quantile,scale,specificity,sensitivity"]
        for spec, sens in self.points:
            lines.append(
                f"{self.direction},{self.quantile},{self.scale},"
                f"{spec:.8f},{sens:.8f}"
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DensityGrid:
    """Joint random-effects density on a (specificity, sensitivity) grid."""

    spec_grid: np.ndarray
    sens_grid: np.ndarray
    density: np.ndarray  # shape (len(spec_grid), len(sens_grid))
    levels: np.ndarray  # absolute density levels, descending
    spec_scale: str
    sens_scale: str

    def to_csv(self) -> str:
        lines = ["specificity,sensitivity,density"]
        for i, x in enumerate(self.spec_grid):
            for j, y in enumerate(self.sens_grid):
                lines.append(f"{x:.8f},{y:.8f},{self.density[i, j]:.10e}")
        return "\n".join(lines) + "\n"


def _model_of(fit) -> ModelSpec:
    return getattr(fit, "model", fit)


def _swap(c: BivariateCopula) -> BivariateCopula:
    """Copula of (V, U) given the copula of (U, V).

    The families used here are exchangeable except for the 90/270
    rotations, which swap into each other.
    """
    if c.family.kind == "clayton" and c.family.rotation in (90, 270):
        rot = 270 if c.family.rotation == 90 else 90
        return BivariateCopula(CopulaFamily("clayton", rot), c.theta)
    return c


def _pair_edge(model: ModelSpec):
    """The (1,2) edge copula with argument order (u1, u2), if explicit.

    Returns None when the permutation leaves (1,2) as the conditional
    pair, in which case the bivariate margin must be integrated.
    """
    vine = model.vine
    if vine.permutation == 1:
        return vine.edge_a  # stored as C(u1, u2)
    if vine.permutation == 2:
        return _swap(vine.edge_a)  # stored as C(u2, u1)
    return None


def _pair_density(model: ModelSpec, u1, u2) -> np.ndarray:
    """Copula density of (U1, U2), integrating out u3 if necessary."""
    edge = _pair_edge(model)
    if edge is not None:
        return edge.pdf(u1, u2)
    rule = gauss_legendre_01(_MARGIN_RULE_N)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    out = np.zeros(np.broadcast(u1, u2).shape)
    for node, weight in zip(rule.nodes, rule.weights):
        out += weight * model.vine.density(u1, u2, np.full_like(out, node))
    return out


def _cond_quantile(model: ModelSpec, q: float, u_given, given: int):
    """u of the free coordinate with conditional cdf q given the other.

    given=2 solves C(u1 | u2=u_given) = q; given=1 the reverse.
    """
    edge = _pair_edge(model)
    u_given = np.asarray(u_given, dtype=float)
    if edge is not None:
        # the conditioning coordinate must be the copula's first argument;
        # _pair_edge returns the (u1, u2) ordering
        c = edge if given == 1 else _swap(edge)
        return c.hinv(np.full_like(u_given, q), u_given)
    # numeric inversion of the integrated conditional cdf
    s = np.linspace(1e-6, 1.0 - 1e-6, 513)
    out = np.empty(u_given.shape)
    for k, ug in np.ndenumerate(u_given):
        if given == 2:
            dens = _pair_density(model, s, np.full_like(s, ug))
        else:
            dens = _pair_density(model, np.full_like(s, ug), s)
        cdf = np.concatenate(([0.0], np.cumsum((dens[1:] + dens[:-1]) / 2.0
                                               * np.diff(s))))
        cdf /= cdf[-1]
        out[k] = np.interp(q, cdf, s)
    return out


def quantile_curve(fit, q: float, direction: str = "x1_on_x2",
                   scale: str = "original") -> CurveSet:
    """Quantile regression curve of one accuracy index on the other.

    x1_on_x2 traces sensitivity as a function of specificity: for each
    u2 on a grid, x2 = Q2(u2) and x1 = Q1(conditional-quantile q given
    u2).  q = 0.5 gives the median summary curve.
    """
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    if direction not in ("x1_on_x2", "x2_on_x1"):
        raise ValueError("direction must be x1_on_x2 or x2_on_x1")
    if scale not in ("original", "logit"):
        raise ValueError("scale must be original or logit")
    model = _model_of(fit)
    u = _CURVE_GRID
    if direction == "x1_on_x2":
        spec = model.margin2.quantile(u)
        sens = model.margin1.quantile(_cond_quantile(model, q, u, given=2))
    else:
        sens = model.margin1.quantile(u)
        spec = model.margin2.quantile(_cond_quantile(model, q, u, given=1))
    if scale == "logit":
        spec = logit(spec)
        sens = logit(sens)
    return CurveSet(
        direction=direction,
        quantile=float(q),
        points=np.column_stack([spec, sens]),
        scale=scale,
    )


def summary_point(fit):
    """(sensitivity, specificity) at the fitted margin means."""
    model = _model_of(fit)
    return model.margin1.pi, model.margin2.pi


def _axis(margin, grid_size):
    """Axis grid and scale for one margin's plotting coordinate."""
    if margin.family == "normal":
        mu = margin.latent_mean()
        half = 5.0 * margin.delta
        return np.linspace(mu - half, mu + half, grid_size), margin.link
    return np.linspace(1e-4, 1.0 - 1e-4, grid_size), "original"


def _axis_density(margin, axis, scale):
    """Margin density and cdf along the axis on the declared scale."""
    from .margins import link_inverse

    if scale == "original":
        return margin.density(axis), margin.cdf(axis)
    x = link_inverse(scale, axis)
    # change of variables from (0,1) to the link scale
    from .margins import _link_deriv

    dens = margin.density(x) / _link_deriv(scale, x)
    return dens, margin.cdf(x)


def density_contours(fit, grid_size: int = 101,
                     levels=DEFAULT_LEVELS) -> DensityGrid:
    """Joint density of (sensitivity, specificity) for predictive regions.

    Normal margins are evaluated on their link scale (matching the usual
    presentation); beta margins on the original (0,1) scale.  Levels are
    the stated fractions of the density maximum, returned as absolute
    values in descending order.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    model = _model_of(fit)
    sens_axis, sens_scale = _axis(model.margin1, grid_size)
    spec_axis, spec_scale = _axis(model.margin2, grid_size)
    f1, u1 = _axis_density(model.margin1, sens_axis, sens_scale)
    f2, u2 = _axis_density(model.margin2, spec_axis, spec_scale)
    u1 = np.clip(u1, 1e-12, 1.0 - 1e-12)
    u2 = np.clip(u2, 1e-12, 1.0 - 1e-12)
    cop = _pair_density(model, u1[None, :], u2[:, None])
    dens = cop * f2[:, None] * f1[None, :]
    levels_abs = np.sort(np.asarray(levels, dtype=float))[::-1] * dens.max()
    return DensityGrid(
        spec_grid=spec_axis,
        sens_grid=sens_axis,
        density=dens,
        levels=levels_abs,
        spec_scale=spec_scale,
        sens_scale=sens_scale,
    )


def study_points(data):
    """Raw (specificity, sensitivity) proportions per study for overlays."""
    pts = []
    for s in data:
        spec = s.y00 / s.nondiseased if s.nondiseased else np.nan
        sens = s.y11 / s.diseased if s.diseased else np.nan
        pts.append((spec, sens))
    return np.asarray(pts)


def render_svg(curves, point, studies=None, width: int = 500,
               height: int = 500) -> str:
    """Static SVG of curves, summary point and study markers.

    All inputs must be on the original (0,1) scale; the x axis is
    specificity increasing to the right, the y axis sensitivity
    increasing upward.
    """
    pad = 40.0

    def sx(v):
        return pad + v * (width - 2 * pad)

    def sy(v):
        return height - pad - v * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" '
        f'height="{height - 2 * pad}" fill="none" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" '
        f'font-size="12">specificity</text>',
        f'<text x="12" y="{height / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 12 {height / 2})">sensitivity</text>',
    ]
    for curve in curves:
        coords = " ".join(
            f"{sx(spec):.2f},{sy(sens):.2f}"
            for spec, sens in curve.points
            if 0.0 <= spec <= 1.0 and 0.0 <= sens <= 1.0
        )
        dash = "" if curve.quantile == 0.5 else ' stroke-dasharray="4 3"'
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="black"'
            f'{dash} class="quantile-{curve.quantile}"/>'
        )
    if studies is not None:
        for spec, sens in studies:
            if np.isfinite(spec) and np.isfinite(sens):
                parts.append(
                    f'<circle cx="{sx(spec):.2f}" cy="{sy(sens):.2f}" r="3" '
                    f'fill="none" stroke="gray" class="study"/>'
                )
    sens, spec = point
    parts.append(
        f'<rect x="{sx(spec) - 4:.2f}" y="{sy(sens) - 4:.2f}" width="8" '
        f'height="8" fill="black" class="summary-point"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
