"""Trivariate C-vine: density, dependent-uniform transform, and sampling.

The three admissible permutations are {12,13,23|1}, {12,23,13|2} and
{13,23,12|3}.  All are handled through one canonical (root, leaf_a,
leaf_b) relabeling rather than separate code paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .copulas import BivariateCopula

# permutation id -> (root, leaf_a, leaf_b), 1-based variable labels
_PERMUTATIONS = {
    1: (1, 2, 3),  # edges 12, 13; conditional 23|1
    2: (2, 1, 3),  # edges 12, 23; conditional 13|2
    3: (3, 1, 2),  # edges 13, 23; conditional 12|3
}


@dataclass(frozen=True)
class VineSpec:
    """Trivariate C-vine: a permutation plus three bivariate copulas.

    edge_a joins the root with leaf_a, edge_b the root with leaf_b, and
    edge_cond is the conditional copula of the two leaves given the root.
    For permutation 1 these are C12, C13 and C23|1 respectively.
    """

    permutation: int
    edge_a: BivariateCopula
    edge_b: BivariateCopula
    edge_cond: BivariateCopula

    def __post_init__(self):
        if self.permutation not in _PERMUTATIONS:
            raise ValueError("permutation must be 1, 2 or 3")

    @property
    def truncated(self) -> bool:
        # Structural truncation: the conditional edge's family is the
        # independence copula, not merely a parametric family evaluated
        # at a parameter that happens to imply independence.
        return self.edge_cond.family.kind == "independence"

    def _split(self, u1, u2, u3):
        root, a, b = _PERMUTATIONS[self.permutation]
        by_var = {1: u1, 2: u2, 3: u3}
        return by_var[root], by_var[a], by_var[b], (root, a, b)

    def log_density(self, u1, u2, u3):
        ur, ua, ub, _ = self._split(u1, u2, u3)
        ca = self.edge_a.pdf(ur, ua)
        cb = self.edge_b.pdf(ur, ub)
        ha = self.edge_a.hfunc(ua, ur)
        hb = self.edge_b.hfunc(ub, ur)
        cc = self.edge_cond.pdf(ha, hb)
        return np.log(ca) + np.log(cb) + np.log(cc)

    def density(self, u1, u2, u3):
        return np.exp(self.log_density(u1, u2, u3))

    def dependent_nodes(self, u1, u2, u3):
        """Map independent uniforms to uniforms with the vine distribution.

        Exactly the four-line conditional-inverse recursion: the root keeps
        its uniform, leaf_a goes through the inverse h-function of its edge,
        and leaf_b goes through the conditional-edge inverse followed by the
        inverse h-function of its edge.  The level-2 inverse conditions on
        the independent uniform of leaf_a because that uniform equals the
        conditional cdf of the transformed leaf_a given the root.
        """
        ur, ua, ub, (root, a, b) = self._split(u1, u2, u3)
        vr = np.asarray(ur, dtype=float)
        va = self.edge_a.hinv(ua, ur)
        t1 = self.edge_cond.hinv(ub, ua)
        vb = self.edge_b.hinv(t1, ur)
        by_var = {root: vr, a: va, b: vb}
        return by_var[1], by_var[2], by_var[3]

    def independent_nodes(self, v1, v2, v3):
        """Inverse of dependent_nodes (Rosenblatt transform)."""
        vr, va, vb, (root, a, b) = self._split(v1, v2, v3)
        ur = np.asarray(vr, dtype=float)
        ua = self.edge_a.hfunc(va, vr)
        t1 = self.edge_b.hfunc(vb, vr)
        ub = self.edge_cond.hfunc(t1, ua)
        by_var = {root: ur, a: ua, b: ub}
        return by_var[1], by_var[2], by_var[3]

    def sample(self, rng: np.random.Generator, n: int = 1):
        """Draw n triples (u1, u2, u3); deterministic given the generator state."""
        w = rng.uniform(size=(3, n))
        return self.dependent_nodes(w[0], w[1], w[2])
