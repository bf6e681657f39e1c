"""Univariate random-effect distributions with link functions.

Two margin families for the latent sensitivity/specificity/prevalence:

* normal: the random effect is N(l(pi), sigma) on the link scale with
  l one of logit, probit, cloglog;
* beta: the random effect is Beta(alpha, beta) on the original (0, 1)
  scale with identity link, parameterized by mean pi and dispersion
  gamma in (0, 1) via alpha = pi(1-gamma)/gamma, beta = (1-pi)(1-gamma)/gamma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .numerics import (
    reg_inc_beta,
    reg_inc_beta_inv,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
)

EPS = 1e-12
_TINY = np.finfo(float).tiny
_ONE_MINUS = np.nextafter(1.0, 0.0)

LINKS = ("logit", "probit", "cloglog", "identity")


def link_apply(link: str, p):
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("p must lie in the open interval (0, 1)")
    if link == "logit":
        return special.logit(p)
    if link == "probit":
        return std_normal_quantile(p)
    if link == "cloglog":
        return np.log(-np.log1p(-p))
    if link == "identity":
        return p
    raise ValueError(f"unknown link {link!r}")


def link_inverse(link: str, x):
    x = np.asarray(x, dtype=float)
    if link == "logit":
        return special.expit(x)
    if link == "probit":
        return std_normal_cdf(x)
    if link == "cloglog":
        return -np.expm1(-np.exp(x))
    if link == "identity":
        return x
    raise ValueError(f"unknown link {link!r}")


def _link_deriv(link: str, p):
    """d l(p) / d p, used for the normal-margin density on the (0,1) scale."""
    p = np.asarray(p, dtype=float)
    if link == "logit":
        return 1.0 / (p * (1.0 - p))
    if link == "probit":
        return 1.0 / std_normal_pdf(std_normal_quantile(p))
    if link == "cloglog":
        return -1.0 / ((1.0 - p) * np.log1p(-p))
    raise ValueError(f"unknown link {link!r}")


@dataclass(frozen=True)
class MarginSpec:
    """Margin family with mean parameter pi and dispersion delta.

    delta is sigma > 0 for the normal margin and gamma in (0, 1) for the
    beta margin.
    """

    family: str
    pi: float
    delta: float
    link: str = "logit"

    def __post_init__(self):
        if self.family not in ("normal", "beta"):
            raise ValueError(f"unknown margin family {self.family!r}")
        if not 0.0 < self.pi < 1.0:
            raise ValueError("pi must lie in (0, 1)")
        if self.family == "normal":
            if self.link not in ("logit", "probit", "cloglog"):
                raise ValueError("normal margin requires logit/probit/cloglog link")
            if self.delta <= 0.0:
                raise ValueError("sigma must be positive")
        else:
            if self.link != "identity":
                raise ValueError("beta margin requires the identity link")
            if not 0.0 < self.delta < 1.0:
                raise ValueError("gamma must lie in (0, 1)")

    @property
    def beta_shapes(self):
        if self.family != "beta":
            raise ValueError("beta_shapes only defined for the beta margin")
        scale = (1.0 - self.delta) / self.delta
        return self.pi * scale, (1.0 - self.pi) * scale

    def quantile(self, u):
        """Quantile on the probability scale: l^{-1}(F^{-1}(u; l(pi), delta))."""
        u = np.clip(np.asarray(u, dtype=float), EPS, 1.0 - EPS)
        if self.family == "normal":
            mu = link_apply(self.link, self.pi)
            x = mu + self.delta * std_normal_quantile(u)
            return link_inverse(self.link, x)
        a, b = self.beta_shapes
        return np.clip(reg_inc_beta_inv(a, b, u), EPS, 1.0 - EPS)

    def cdf(self, t):
        # t is a value on the (0,1) scale, not a probability-level input:
        # clip only to the representable range so singular tails keep their
        # mass (a 1e-12 clip visibly truncates beta margins with shape < 1).
        t = np.clip(np.asarray(t, dtype=float), _TINY, _ONE_MINUS)
        if self.family == "normal":
            mu = link_apply(self.link, self.pi)
            return std_normal_cdf((link_apply(self.link, t) - mu) / self.delta)
        a, b = self.beta_shapes
        return reg_inc_beta(a, b, t)

    def density(self, t):
        """Density on the probability scale."""
        t = np.clip(np.asarray(t, dtype=float), _TINY, _ONE_MINUS)
        if self.family == "normal":
            mu = link_apply(self.link, self.pi)
            z = (link_apply(self.link, t) - mu) / self.delta
            return std_normal_pdf(z) / self.delta * _link_deriv(self.link, t)
        a, b = self.beta_shapes
        logd = ((a - 1.0) * np.log(t) + (b - 1.0) * np.log1p(-t)
                - special.betaln(a, b))
        return np.exp(logd)

    def latent_mean(self) -> float:
        """Location on the internal (link) scale."""
        return float(link_apply(self.link, self.pi))
