"""Within-study multinomial model and the joint quadrature log-likelihood.

Each study is a 3x2 table of counts; given the latent triple of
(sensitivity, specificity, prevalence) the cell counts are multinomial,
and the multinomial pmf factorizes into independent binomials.  The
marginal likelihood integrates the three accuracy binomials against the
vine random-effects distribution on a Gauss-Legendre grid transformed to
dependent uniforms.  All arithmetic is carried out in log space with a
log-sum-exp reduction over the grid so large studies never underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .margins import MarginSpec
from .numerics import QuadratureRule
from .vine import VineSpec

EPS = 1e-12


@dataclass(frozen=True)
class StudyData:
    """One study's 3x2 table: rows test -, test +, non-evaluable."""

    y00: int  # true negatives
    y01: int  # false negatives
    y10: int  # false positives
    y11: int  # true positives
    y20: int  # non-evaluable non-diseased
    y21: int  # non-evaluable diseased

    def __post_init__(self):
        counts = (self.y00, self.y01, self.y10, self.y11, self.y20, self.y21)
        if any(int(c) != c or c < 0 for c in counts):
            raise ValueError("counts must be nonnegative integers")

    @property
    def diseased(self) -> int:
        """Evaluable diseased: y01 + y11."""
        return self.y01 + self.y11

    @property
    def nondiseased(self) -> int:
        """Evaluable non-diseased: y00 + y10."""
        return self.y00 + self.y10

    @property
    def diseased_all(self) -> int:
        """All diseased including non-evaluable: y*_{+1}."""
        return self.diseased + self.y21

    @property
    def nondiseased_all(self) -> int:
        """All non-diseased including non-evaluable: y*_{+0}."""
        return self.nondiseased + self.y20

    @property
    def total(self) -> int:
        return self.diseased_all + self.nondiseased_all


@dataclass(frozen=True)
class ModelSpec:
    """Margins for sensitivity, specificity, prevalence plus the vine."""

    margin1: MarginSpec
    margin2: MarginSpec
    margin3: MarginSpec
    vine: VineSpec

    @property
    def margins(self):
        return (self.margin1, self.margin2, self.margin3)


@dataclass(frozen=True)
class CellProbs:
    w00: float
    w01: float
    w10: float
    w11: float
    w20: float
    w21: float

    def as_array(self) -> np.ndarray:
        return np.array([self.w00, self.w01, self.w10, self.w11,
                         self.w20, self.w21])


def cell_probs(p1, p2, p3, p4, p5) -> CellProbs:
    """Multinomial cell probabilities from the five latent probabilities.

    p1..p5 are sensitivity, specificity, prevalence, and the probabilities
    of a non-evaluable result for diseased and non-diseased subjects, all
    on the original (0, 1) scale (p4, p5 may be 0).
    """
    for name, p in (("p1", p1), ("p2", p2), ("p3", p3)):
        if not 0.0 < p < 1.0:
            raise ValueError(f"{name} must lie in (0, 1)")
    for name, p in (("p4", p4), ("p5", p5)):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"{name} must lie in [0, 1)")
    return CellProbs(
        w00=p2 * (1.0 - p3) * (1.0 - p5),
        w01=(1.0 - p1) * p3 * (1.0 - p4),
        w10=(1.0 - p2) * (1.0 - p3) * (1.0 - p5),
        w11=p1 * p3 * (1.0 - p4),
        w20=(1.0 - p3) * p5,
        w21=p3 * p4,
    )


def binomial_log_pmf(y, n, p):
    """log C(n, y) + y log p + (n - y) log(1 - p); vectorized in p."""
    y = int(y)
    n = int(n)
    if y < 0 or y > n:
        raise ValueError("require 0 <= y <= n")
    if n == 0:
        return np.zeros_like(np.asarray(p, dtype=float))
    p = np.clip(np.asarray(p, dtype=float), EPS, 1.0 - EPS)
    const = gammaln(n + 1) - gammaln(y + 1) - gammaln(n - y + 1)
    return const + y * np.log(p) + (n - y) * np.log1p(-p)


class LikelihoodGrid:
    """Dependent quadrature nodes pushed through the margin quantiles.

    Built once per parameter vector and reused for every study: holds the
    flattened log-weights and the log success/failure probabilities of the
    three accuracy binomials on the n_q^3 grid.
    """

    def __init__(self, m: ModelSpec, rule: QuadratureRule):
        n = len(rule.nodes)
        u = rule.nodes
        u1 = u[:, None, None] * np.ones((n, n, n))
        u2 = u[None, :, None] * np.ones((n, n, n))
        u3 = u[None, None, :] * np.ones((n, n, n))
        v1, v2, v3 = m.vine.dependent_nodes(u1, u2, u3)
        p1 = m.margin1.quantile(v1).ravel()
        p2 = m.margin2.quantile(v2).ravel()
        p3 = m.margin3.quantile(v3).ravel()
        w = rule.weights
        logw = (np.log(w)[:, None, None] + np.log(w)[None, :, None]
                + np.log(w)[None, None, :]).ravel()
        probs = np.clip(np.stack([p1, p2, p3]), EPS, 1.0 - EPS)
        # rows: log p1, log(1-p1), log p2, log(1-p2), log p3, log(1-p3)
        self.log_terms = np.empty((6, n ** 3))
        self.log_terms[0::2] = np.log(probs)
        self.log_terms[1::2] = np.log1p(-probs)
        self.log_weights = logw


def _study_coefficients(data) -> tuple[np.ndarray, np.ndarray]:
    """Binomial exponents (N, 6) and log binomial coefficients (N,)."""
    coef = np.empty((len(data), 6))
    const = np.empty(len(data))
    for i, s in enumerate(data):
        n1, n0, ns = s.diseased, s.nondiseased, s.total
        ys1 = s.diseased_all
        coef[i] = (s.y11, n1 - s.y11, s.y00, n0 - s.y00, ys1, ns - ys1)
        const[i] = (
            gammaln(n1 + 1) - gammaln(s.y11 + 1) - gammaln(n1 - s.y11 + 1)
            + gammaln(n0 + 1) - gammaln(s.y00 + 1) - gammaln(n0 - s.y00 + 1)
            + gammaln(ns + 1) - gammaln(ys1 + 1) - gammaln(ns - ys1 + 1))
    return coef, const


def _loglik_from_grid(data, grid: LikelihoodGrid) -> np.ndarray:
    coef, const = _study_coefficients(data)
    terms = coef @ grid.log_terms + grid.log_weights
    return logsumexp(terms, axis=1) + const


def study_log_lik(s: StudyData, m: ModelSpec, q: QuadratureRule) -> float:
    """Marginal log-likelihood of one study (first MAR factor only)."""
    return float(_loglik_from_grid([s], LikelihoodGrid(m, q))[0])


def dataset_log_lik(data, m: ModelSpec, q: QuadratureRule) -> float:
    """Sum of study log-likelihoods over a nonempty dataset."""
    data = list(data)
    if not data:
        raise ValueError("dataset must not be empty")
    return float(np.sum(_loglik_from_grid(data, LikelihoodGrid(m, q))))


def pooled_nonevaluable_probs(data) -> tuple[float, float]:
    """Pooled estimates of the non-evaluable probabilities (p4, p5).

    These summarize the second MAR likelihood factor, which is not
    modelled with random effects.  A zero denominator yields nan for the
    affected component.
    """
    data = list(data)
    num4 = sum(s.y21 for s in data)
    den4 = sum(s.diseased_all for s in data)
    num5 = sum(s.y20 for s in data)
    den5 = sum(s.nondiseased_all for s in data)
    p4 = num4 / den4 if den4 > 0 else float("nan")
    p5 = num5 / den5 if den5 > 0 else float("nan")
    return p4, p5
