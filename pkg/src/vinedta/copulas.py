"""Bivariate copula families: BVN, Frank, and Clayton with rotations.

Each family exposes density, cdf, conditional cdf (h-function), its
inverse, and Kendall-tau conversions.  Rotation convention (normative for
this package): 90 deg maps c(u,v) -> c(1-u,v), 180 deg -> c(1-u,1-v),
270 deg -> c(u,1-v).  Clayton uses rotations to encode the dependence
sign; BVN and Frank cover both signs natively and carry rotation 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .numerics import debye1, std_normal_cdf, std_normal_quantile

EPS = 1e-12

FAMILIES = ("bvn", "frank", "clayton", "independence")
ROTATIONS = (0, 90, 180, 270)

# Below this |theta| Frank and Clayton are evaluated as independence.
_THETA_INDEP = 1e-8


@dataclass(frozen=True)
class CopulaFamily:
    kind: str
    rotation: int = 0

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown copula family {self.kind!r}")
        if self.rotation not in ROTATIONS:
            raise ValueError("rotation must be one of 0, 90, 180, 270")
        if self.kind != "clayton" and self.rotation != 0:
            raise ValueError(f"{self.kind} copula only supports rotation 0")


def _clip(u):
    return np.clip(np.asarray(u, dtype=float), EPS, 1.0 - EPS)


# ---------------------------------------------------------------------------
# Base (unrotated) family implementations.  All take clipped arrays.

def _bvn_pdf(u, v, theta):
    x = std_normal_quantile(u)
    y = std_normal_quantile(v)
    r2 = 1.0 - theta * theta
    expo = -(theta * theta * (x * x + y * y) - 2.0 * theta * x * y) / (2.0 * r2)
    return np.exp(expo) / np.sqrt(r2)


def _bvn_cdf(u, v, theta):
    x = std_normal_quantile(u)
    y = std_normal_quantile(v)
    cov = [[1.0, theta], [theta, 1.0]]
    pts = np.stack([np.broadcast_to(x, np.broadcast(x, y).shape),
                    np.broadcast_to(y, np.broadcast(x, y).shape)], axis=-1)
    return stats.multivariate_normal(mean=[0.0, 0.0], cov=cov).cdf(pts)


def _bvn_hfunc(v, u, theta):
    x = std_normal_quantile(u)
    y = std_normal_quantile(v)
    return std_normal_cdf((y - theta * x) / np.sqrt(1.0 - theta * theta))


def _bvn_hinv(p, u, theta):
    x = std_normal_quantile(u)
    z = std_normal_quantile(p)
    return std_normal_cdf(z * np.sqrt(1.0 - theta * theta) + theta * x)


def _frank_pdf(u, v, theta):
    em = -np.expm1(-theta)  # 1 - e^-theta
    eu = np.exp(-theta * u)
    ev = np.exp(-theta * v)
    denom = em - (1.0 - eu) * (1.0 - ev)
    return theta * em * eu * ev / (denom * denom)


def _frank_cdf(u, v, theta):
    em = np.expm1(-theta)
    return -np.log1p(np.expm1(-theta * u) * np.expm1(-theta * v) / em) / theta


def _frank_hfunc(v, u, theta):
    eu = np.exp(-theta * u)
    num = eu * (-np.expm1(-theta * v))
    denom = -np.expm1(-theta) - (1.0 - eu) * (-np.expm1(-theta * v))
    return num / denom


def _frank_hinv(p, u, theta):
    # For |theta| large enough that exp(-theta*u) overflows, inf/inf
    # yields nan; silence the warning and let the nan propagate — the
    # likelihood layer treats non-finite values as an infinite objective.
    with np.errstate(invalid="ignore", over="ignore"):
        eu = np.exp(-theta * u)
        b = np.expm1(-theta)
        val = 1.0 + p * b / (eu * (1.0 - p) + p)
        return -np.log(np.clip(val, EPS, None)) / theta


def _clayton_pdf(u, v, theta):
    lu = np.log(u)
    lv = np.log(v)
    s = np.exp(-theta * lu) + np.exp(-theta * lv) - 1.0
    logc = (np.log1p(theta) - (theta + 1.0) * (lu + lv)
            - (2.0 + 1.0 / theta) * np.log(s))
    return np.exp(logc)


def _clayton_cdf(u, v, theta):
    s = u ** (-theta) + v ** (-theta) - 1.0
    return s ** (-1.0 / theta)


def _clayton_hfunc(v, u, theta):
    w = 1.0 + (u / v) ** theta - u ** theta
    return w ** (-1.0 - 1.0 / theta)


def _clayton_hinv(p, u, theta):
    # For extreme theta, u**(-theta) overflows to inf; the reciprocal
    # power then correctly collapses to the limiting value 0.
    with np.errstate(over="ignore", invalid="ignore"):
        t = (p ** (-theta / (1.0 + theta)) - 1.0) * u ** (-theta) + 1.0
        return np.clip(t, EPS, None) ** (-1.0 / theta)


_BASE = {
    "bvn": (_bvn_pdf, _bvn_cdf, _bvn_hfunc, _bvn_hinv),
    "frank": (_frank_pdf, _frank_cdf, _frank_hfunc, _frank_hinv),
    "clayton": (_clayton_pdf, _clayton_cdf, _clayton_hfunc, _clayton_hinv),
}


@dataclass(frozen=True)
class BivariateCopula:
    """A copula family plus its dependence parameter theta.

    Parameter ranges: BVN theta in (-1, 1); Frank theta real with theta
    near 0 treated as independence; Clayton theta > 0 (the rotation
    carries the dependence sign).
    """

    family: CopulaFamily
    theta: float = 0.0

    def __post_init__(self):
        kind = self.family.kind
        if kind == "bvn" and not -1.0 < self.theta < 1.0:
            raise ValueError("BVN theta must lie in (-1, 1)")
        if kind == "clayton" and self.theta < 0.0:
            raise ValueError("Clayton theta must be positive")

    @property
    def is_independence(self) -> bool:
        return (self.family.kind == "independence"
                or abs(self.theta) < _THETA_INDEP)

    def _dispatch(self, idx):
        return _BASE[self.family.kind][idx]

    def pdf(self, u, v):
        u = _clip(u)
        v = _clip(v)
        if self.is_independence:
            return np.ones(np.broadcast(u, v).shape)
        fn = self._dispatch(0)
        rot = self.family.rotation
        if rot == 0:
            return fn(u, v, self.theta)
        if rot == 90:
            return fn(1.0 - u, v, self.theta)
        if rot == 180:
            return fn(1.0 - u, 1.0 - v, self.theta)
        return fn(u, 1.0 - v, self.theta)

    def cdf(self, u, v):
        u = _clip(u)
        v = _clip(v)
        if self.is_independence:
            return u * v
        fn = self._dispatch(1)
        rot = self.family.rotation
        if rot == 0:
            return fn(u, v, self.theta)
        if rot == 90:
            return v - fn(1.0 - u, v, self.theta)
        if rot == 180:
            return u + v - 1.0 + fn(1.0 - u, 1.0 - v, self.theta)
        return u - fn(u, 1.0 - v, self.theta)

    def hfunc(self, v, u):
        """Conditional cdf C(v | u) = dC(u, v)/du."""
        u = _clip(u)
        v = _clip(v)
        if self.is_independence:
            return v * np.ones(np.broadcast(u, v).shape)
        fn = self._dispatch(2)
        rot = self.family.rotation
        if rot == 0:
            out = fn(v, u, self.theta)
        elif rot == 90:
            out = fn(v, 1.0 - u, self.theta)
        elif rot == 180:
            out = 1.0 - fn(1.0 - v, 1.0 - u, self.theta)
        else:
            out = 1.0 - fn(1.0 - v, u, self.theta)
        return np.clip(out, EPS, 1.0 - EPS)

    def hinv(self, p, u):
        """Inverse of hfunc in its first argument: v with C(v|u) = p."""
        u = _clip(u)
        p = _clip(p)
        if self.is_independence:
            return p * np.ones(np.broadcast(u, p).shape)
        fn = self._dispatch(3)
        rot = self.family.rotation
        if rot == 0:
            out = fn(p, u, self.theta)
        elif rot == 90:
            out = fn(p, 1.0 - u, self.theta)
        elif rot == 180:
            out = 1.0 - fn(1.0 - p, 1.0 - u, self.theta)
        else:
            out = 1.0 - fn(1.0 - p, u, self.theta)
        return np.clip(out, EPS, 1.0 - EPS)

    def tau(self) -> float:
        return theta_to_tau(self)


INDEPENDENCE = BivariateCopula(CopulaFamily("independence"), 0.0)


def frank_tau(theta: float) -> float:
    """Kendall tau of the Frank copula: 1 - (4/theta)(1 - D1(theta))."""
    if abs(theta) < _THETA_INDEP:
        return 0.0
    return 1.0 - (4.0 / theta) * (1.0 - debye1(theta))


def _clayton_tau_range(rotation: int):
    if rotation in (0, 180):
        return (0.0, 1.0)
    return (-1.0, 0.0)


def tau_to_theta(family: CopulaFamily, tau: float) -> float:
    """Convert Kendall's tau to the family's dependence parameter."""
    if family.kind == "independence":
        if tau != 0.0:
            raise ValueError("independence copula requires tau = 0")
        return 0.0
    if abs(tau) >= 1.0:
        raise ValueError("tau must lie in (-1, 1)")
    if family.kind == "bvn":
        return float(np.sin(np.pi * tau / 2.0))
    if family.kind == "frank":
        if tau == 0.0:
            return 0.0
        # frank_tau is increasing and odd; bracket then solve.
        hi = 1.0
        while frank_tau(hi) < abs(tau):
            hi *= 2.0
            if hi > 1e6:
                raise ValueError("tau too close to 1 for the Frank copula")
        theta = optimize.brentq(lambda t: frank_tau(t) - abs(tau), 1e-10, hi,
                                xtol=1e-13)
        return float(np.sign(tau) * theta)
    # Clayton: rotation fixes the admissible sign of tau.
    lo, hi = _clayton_tau_range(family.rotation)
    if not lo < tau < hi:
        raise ValueError(
            f"Clayton rotated {family.rotation} deg requires tau in "
            f"({lo}, {hi}); got {tau}")
    a = abs(tau)
    return 2.0 * a / (1.0 - a)


def theta_to_tau(c: BivariateCopula) -> float:
    """Kendall's tau implied by the copula's parameter."""
    kind = c.family.kind
    if c.is_independence:
        return 0.0
    if kind == "bvn":
        return float(2.0 / np.pi * np.arcsin(c.theta))
    if kind == "frank":
        return frank_tau(c.theta)
    tau = c.theta / (c.theta + 2.0)
    if c.family.rotation in (90, 270):
        tau = -tau
    return float(tau)


def from_tau(kind: str, tau: float, rotation: int = 0) -> BivariateCopula:
    """Build a copula from a Kendall-tau value."""
    fam = CopulaFamily(kind, rotation)
    return BivariateCopula(fam, tau_to_theta(fam, tau))
