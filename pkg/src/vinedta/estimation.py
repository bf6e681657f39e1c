"""Maximum-likelihood fitting, standard errors, and model scanning.

The optimizer works on an unconstrained transform of the parameters:
logit for probabilities (pi, gamma), log for sigma, Fisher z for the
Kendall tau of symmetric-range copulas, and a scaled logit onto the
admissible tau interval for rotated Clayton edges.  Standard errors on
the reporting scale come from the delta method applied to the inverse
Hessian of the negative log-likelihood on the transformed scale; the
transform is componentwise, so the Jacobian is diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, logit

from .copulas import BivariateCopula, CopulaFamily, tau_to_theta, theta_to_tau
from .margins import MarginSpec
from .model import ModelSpec, dataset_log_lik
from .numerics import gauss_legendre_01, minimize
from .vine import VineSpec

PARAM_NAMES = ("pi1", "pi2", "pi3", "delta1", "delta2", "delta3",
               "tau12", "tau13", "tau23_1")

_TAU_CAP = 0.999  # keep tau strictly inside its open interval


@dataclass(frozen=True)
class FitConfig:
    """Settings for a maximum-likelihood fit."""

    n_q: int = 15
    start: ModelSpec | None = None
    max_iters: int = 500
    tolerance: float = 1e-6
    truncated: bool = False
    tau_parameterization: bool = True
    n_restarts: int = 3

    def __post_init__(self):
        if self.n_q < 2:
            raise ValueError("n_q must be at least 2")
        if self.max_iters < 1 or self.tolerance <= 0:
            raise ValueError("max_iters must be positive and tolerance > 0")


@dataclass(frozen=True)
class FitResult:
    """ML estimates on the reporting scale.

    estimates and standard_errors are length-9 arrays ordered as
    PARAM_NAMES; for a truncated fit the conditional tau is fixed at 0
    with a nan standard error.
    """

    estimates: np.ndarray
    standard_errors: np.ndarray
    log_lik: float
    converged: bool
    model: ModelSpec
    n_studies: int
    se_available: bool = True
    n_starts: int = 1
    message: str = ""

    @property
    def n_params(self) -> int:
        return 8 if self.model.vine.truncated else 9

    def as_dict(self) -> dict:
        return {name: float(v) for name, v in zip(PARAM_NAMES, self.estimates)}


def _edge_taus(vine: VineSpec, truncated: bool):
    taus = [theta_to_tau(vine.edge_a), theta_to_tau(vine.edge_b)]
    if not truncated:
        taus.append(theta_to_tau(vine.edge_cond))
    return taus


def _tau_forward(family: CopulaFamily, tau: float) -> float:
    if family.kind == "clayton":
        if family.rotation in (0, 180):
            return float(logit(tau))
        return float(logit(-tau))
    return float(np.arctanh(tau))


def _tau_backward(family: CopulaFamily, x: float) -> float:
    if family.kind == "clayton":
        t = float(np.clip(expit(x), 1.0 - _TAU_CAP, _TAU_CAP))
        return t if family.rotation in (0, 180) else -t
    return float(np.clip(np.tanh(x), -_TAU_CAP, _TAU_CAP))


def _delta_forward(margin: MarginSpec, delta: float) -> float:
    return float(np.log(delta)) if margin.family == "normal" else float(logit(delta))


def _delta_backward(margin: MarginSpec, x: float) -> float:
    if margin.family == "normal":
        return float(np.exp(np.clip(x, -30.0, 30.0)))
    return float(np.clip(expit(x), 1e-10, 1.0 - 1e-10))


def _is_truncated(template: ModelSpec, cfg: FitConfig | None = None) -> bool:
    if cfg is not None and cfg.truncated:
        return True
    return template.vine.truncated


def transform_params(m: ModelSpec, truncated: bool = False) -> np.ndarray:
    """Map a model to the unconstrained optimization vector."""
    truncated = truncated or m.vine.truncated
    out = [float(logit(mg.pi)) for mg in m.margins]
    out += [_delta_forward(mg, mg.delta) for mg in m.margins]
    edges = [m.vine.edge_a, m.vine.edge_b]
    if not truncated:
        edges.append(m.vine.edge_cond)
    out += [_tau_forward(e.family, theta_to_tau(e)) for e in edges]
    return np.asarray(out, dtype=float)


def untransform_params(x, template: ModelSpec, truncated: bool = False) -> ModelSpec:
    """Rebuild a model from the optimization vector and a template."""
    truncated = truncated or template.vine.truncated
    x = np.asarray(x, dtype=float)
    expected = 8 if truncated else 9
    if x.shape != (expected,):
        raise ValueError(f"expected a vector of length {expected}, got {x.shape}")
    pis = expit(np.clip(x[:3], -30.0, 30.0))
    pis = np.clip(pis, 1e-10, 1.0 - 1e-10)
    margins = tuple(
        replace(mg, pi=float(p), delta=_delta_backward(mg, d))
        for mg, p, d in zip(template.margins, pis, x[3:6])
    )
    tmpl_edges = [template.vine.edge_a, template.vine.edge_b]
    if not truncated:
        tmpl_edges.append(template.vine.edge_cond)
    edges = [
        BivariateCopula(e.family, tau_to_theta(e.family, _tau_backward(e.family, xi)))
        for e, xi in zip(tmpl_edges, x[6:])
    ]
    if truncated:
        edges.append(template.vine.edge_cond if template.vine.truncated
                     else BivariateCopula(CopulaFamily("independence"), 0.0))
    vine = VineSpec(template.vine.permutation, edges[0], edges[1], edges[2])
    return ModelSpec(margins[0], margins[1], margins[2], vine)


def default_start(data, template: ModelSpec, truncated: bool = False) -> ModelSpec:
    """Start at the pooled proportions; dispersions and taus at mild values."""
    data = list(data)
    n1 = sum(s.diseased for s in data)
    n0 = sum(s.nondiseased for s in data)
    ns = sum(s.total for s in data)
    p1 = sum(s.y11 for s in data) / n1 if n1 else 0.5
    p2 = sum(s.y00 for s in data) / n0 if n0 else 0.5
    p3 = sum(s.diseased_all for s in data) / ns if ns else 0.5
    margins = []
    for mg, p in zip(template.margins, (p1, p2, p3)):
        delta = 0.5 if mg.family == "normal" else 0.05
        margins.append(replace(mg, pi=float(np.clip(p, 0.01, 0.99)), delta=delta))
    truncated = truncated or template.vine.truncated
    edges = []
    for i, e in enumerate((template.vine.edge_a, template.vine.edge_b,
                           template.vine.edge_cond)):
        if truncated and i == 2:
            edges.append(e if e.is_independence
                         else BivariateCopula(CopulaFamily("independence"), 0.0))
            continue
        if e.family.kind == "clayton":
            # tau = 0 is outside the admissible interval; start at its midpoint.
            tau = 0.5 if e.family.rotation in (0, 180) else -0.5
        else:
            tau = 0.0
        edges.append(BivariateCopula(e.family, tau_to_theta(e.family, tau)))
    vine = VineSpec(template.vine.permutation, edges[0], edges[1], edges[2])
    return ModelSpec(margins[0], margins[1], margins[2], vine)


def _estimate_vector(m: ModelSpec) -> np.ndarray:
    out = [mg.pi for mg in m.margins]
    out += [mg.delta for mg in m.margins]
    out += [theta_to_tau(m.vine.edge_a), theta_to_tau(m.vine.edge_b),
            theta_to_tau(m.vine.edge_cond)]
    return np.asarray(out, dtype=float)


def _natural_jacobian_diag(x, template: ModelSpec, truncated: bool) -> np.ndarray:
    """d(reporting scale)/d(transformed scale), componentwise."""
    out = np.empty(len(x))
    p = expit(x[:3])
    out[:3] = p * (1.0 - p)  # d expit / dx
    for i, mg in enumerate(template.margins):
        xi = x[3 + i]
        if mg.family == "normal":
            out[3 + i] = np.exp(xi)  # d exp / dx
        else:
            g = expit(xi)
            out[3 + i] = g * (1.0 - g)
    edges = [template.vine.edge_a, template.vine.edge_b]
    if not truncated:
        edges.append(template.vine.edge_cond)
    for j, e in enumerate(edges):
        xi = x[6 + j]
        if e.family.kind == "clayton":
            t = expit(xi)
            out[6 + j] = t * (1.0 - t)  # sign cancels in |J|
        else:
            out[6 + j] = 1.0 / np.cosh(xi) ** 2  # d tanh / dx
    return out


def fit(data, template: ModelSpec, cfg: FitConfig | None = None) -> FitResult:
    """Maximize the dataset log-likelihood over the template's free parameters."""
    cfg = cfg or FitConfig()
    data = list(data)
    if len(data) < 2:
        raise ValueError("need at least 2 studies to fit")
    truncated = _is_truncated(template, cfg)
    rule = gauss_legendre_01(cfg.n_q)

    def objective(x):
        try:
            m = untransform_params(x, template, truncated)
            return -dataset_log_lik(data, m, rule)
        except (ValueError, FloatingPointError, OverflowError):
            return np.inf

    start_model = cfg.start or default_start(data, template, truncated)
    x0 = transform_params(start_model, truncated)

    best = None
    n_starts = 0
    rng = np.random.default_rng(20240815)
    for attempt in range(1 + cfg.n_restarts):
        xs = x0 if attempt == 0 else x0 + rng.normal(scale=0.3, size=x0.shape)
        if not np.isfinite(objective(xs)):
            continue
        n_starts += 1
        res = minimize(objective, xs, max_iters=cfg.max_iters, grad_tol=cfg.tolerance)
        if best is None or res.objective < best.objective:
            best = res
        if best.converged:
            break
    if best is None:
        raise ValueError("likelihood is non-finite at every start point")

    model = untransform_params(best.argmin, template, truncated)
    estimates = _estimate_vector(model)

    ses = np.full(9, np.nan)
    se_available = False
    hess = best.hessian
    message = ""
    if hess is not None and np.all(np.isfinite(hess)):
        try:
            eig = np.linalg.eigvalsh(hess)
            if np.all(eig > 0):
                cov = np.linalg.inv(hess)
                jac = _natural_jacobian_diag(best.argmin, template, truncated)
                se_t = np.sqrt(np.clip(np.diag(cov), 0.0, None))
                se_nat = se_t * np.abs(jac)
                ses[:6] = se_nat[:6]
                if truncated:
                    ses[6:8] = se_nat[6:8]
                else:
                    ses[6:9] = se_nat[6:9]
                se_available = True
            else:
                message = "Hessian not positive definite; SEs unavailable"
        except np.linalg.LinAlgError:
            message = "singular Hessian; SEs unavailable"
    else:
        message = "non-finite Hessian; SEs unavailable"

    return FitResult(
        estimates=estimates,
        standard_errors=ses,
        log_lik=-best.objective,
        converged=best.converged,
        model=model,
        n_studies=len(data),
        se_available=se_available,
        n_starts=n_starts,
        message=message,
    )


def model_scan(data, candidates, cfg: FitConfig | None = None):
    """Fit each candidate template and rank the results.

    Results are sorted by log-likelihood descending; ties go to the model
    with fewer parameters, then to earlier template order.  A candidate
    whose fit raises is recorded as a non-converged placeholder rather
    than aborting the scan.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidates must be nonempty")
    results = []
    for idx, template in enumerate(candidates):
        try:
            res = fit(data, template, cfg)
        except (ValueError, FloatingPointError) as exc:
            res = FitResult(
                estimates=np.full(9, np.nan),
                standard_errors=np.full(9, np.nan),
                log_lik=-np.inf,
                converged=False,
                model=template,
                n_studies=len(list(data)),
                se_available=False,
                n_starts=0,
                message=f"fit failed: {exc}",
            )
        results.append((idx, res))
    results.sort(key=lambda t: (-t[1].log_lik, t[1].n_params, t[0]))
    return [r for _, r in results]
