import numpy as np
import pytest
from scipy import stats

from vinedta.copulas import (
    INDEPENDENCE,
    BivariateCopula,
    CopulaFamily,
    from_tau,
    tau_to_theta,
    theta_to_tau,
)

ALL_CONFIGS = [
    ("bvn", 0, 0.5),
    ("bvn", 0, -0.5),
    ("frank", 0, 0.5),
    ("frank", 0, -0.5),
    ("clayton", 0, 0.5),
    ("clayton", 90, -0.5),
    ("clayton", 180, 0.5),
    ("clayton", 270, -0.5),
]


def make(kind, rotation, tau):
    return from_tau(kind, tau, rotation)


class TestIndependence:
    def test_pdf_is_one(self):
        u = np.linspace(0.05, 0.95, 7)
        np.testing.assert_allclose(INDEPENDENCE.pdf(u[:, None], u[None, :]), 1.0)

    def test_hfunc_hinv(self):
        assert INDEPENDENCE.hfunc(0.3, 0.8) == pytest.approx(0.3)
        assert INDEPENDENCE.hinv(0.3, 0.8) == pytest.approx(0.3)

    def test_bvn_zero_theta(self):
        c = BivariateCopula(CopulaFamily("bvn"), 0.0)
        np.testing.assert_allclose(c.pdf(0.2, 0.9), 1.0)


class TestDensity:
    @pytest.mark.parametrize("kind,rotation,tau", ALL_CONFIGS)
    def test_nonnegative(self, kind, rotation, tau):
        c = make(kind, rotation, tau)
        u = np.linspace(0.02, 0.98, 25)
        assert np.all(c.pdf(u[:, None], u[None, :]) >= 0)

    @pytest.mark.parametrize("kind,rotation,tau", ALL_CONFIGS)
    def test_normalization(self, kind, rotation, tau, ts_rule):
        # Clayton's corner singularity defeats plain Gauss-Legendre at this
        # tolerance; the oracle uses a double-exponential rule instead.
        n, w = ts_rule
        c = make(kind, rotation, tau)
        mass = np.einsum("i,j,ij->", w, w, c.pdf(n[:, None], n[None, :]))
        assert mass == pytest.approx(1.0, abs=1e-5)

    def test_clayton_theta2_normalization(self, ts_rule):
        n, w = ts_rule
        c = BivariateCopula(CopulaFamily("clayton"), 2.0)
        mass = np.einsum("i,j,ij->", w, w, c.pdf(n[:, None], n[None, :]))
        assert mass == pytest.approx(1.0, abs=1e-6)

    def test_rotation_definition(self):
        base = BivariateCopula(CopulaFamily("clayton"), 2.0)
        rot90 = BivariateCopula(CopulaFamily("clayton", 90), 2.0)
        u, v = 0.3, 0.7
        assert rot90.pdf(u, v) == pytest.approx(base.pdf(1 - u, v), rel=1e-14)
        rot180 = BivariateCopula(CopulaFamily("clayton", 180), 2.0)
        assert rot180.pdf(u, v) == pytest.approx(base.pdf(1 - u, 1 - v), rel=1e-14)
        rot270 = BivariateCopula(CopulaFamily("clayton", 270), 2.0)
        assert rot270.pdf(u, v) == pytest.approx(base.pdf(u, 1 - v), rel=1e-14)

    def test_boundary_clipped_not_nan(self):
        for kind, rotation, tau in ALL_CONFIGS:
            c = make(kind, rotation, tau)
            assert np.isfinite(c.pdf(0.0, 1.0))
            assert np.isfinite(c.hfunc(1.0, 0.0))


class TestHFunctions:
    @pytest.mark.parametrize("kind,rotation,tau", ALL_CONFIGS)
    def test_hfunc_matches_cdf_derivative(self, kind, rotation, tau):
        c = make(kind, rotation, tau)
        u, v = 0.3, 0.7
        eps = 1e-6
        fd = (c.cdf(u + eps, v) - c.cdf(u - eps, v)) / (2 * eps)
        assert c.hfunc(v, u) == pytest.approx(fd, abs=1e-6)

    def test_bvn_symmetry_point(self):
        c = BivariateCopula(CopulaFamily("bvn"), 0.5)
        assert c.hfunc(0.5, 0.5) == pytest.approx(0.5, abs=1e-12)

    def test_bvn_hinv_symmetry_point(self):
        c = BivariateCopula(CopulaFamily("bvn"), 0.7071)
        assert c.hinv(0.5, 0.5) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("kind,rotation,tau", ALL_CONFIGS)
    def test_round_trip_grid(self, kind, rotation, tau):
        c = make(kind, rotation, tau)
        g = np.linspace(0.03, 0.97, 20)
        v, u = np.meshgrid(g, g)
        np.testing.assert_allclose(c.hinv(c.hfunc(v, u), u), v, atol=1e-10)
        np.testing.assert_allclose(c.hfunc(c.hinv(v, u), u), v, atol=1e-9)

    @pytest.mark.parametrize("kind,rotation,tau", ALL_CONFIGS)
    @pytest.mark.parametrize("u", [0.1, 0.5, 0.9])
    def test_hfunc_nondecreasing_in_v(self, kind, rotation, tau, u):
        c = make(kind, rotation, tau)
        v = np.linspace(0.005, 0.995, 100)
        assert np.all(np.diff(c.hfunc(v, u)) >= 0)


class TestTauConversions:
    def test_bvn_half(self):
        assert tau_to_theta(CopulaFamily("bvn"), 0.5) == pytest.approx(
            np.sin(np.pi / 4), abs=1e-12
        )

    def test_clayton_half(self):
        assert tau_to_theta(CopulaFamily("clayton"), 0.5) == pytest.approx(2.0, abs=1e-12)

    def test_frank_half(self):
        theta = tau_to_theta(CopulaFamily("frank"), 0.5)
        assert theta == pytest.approx(5.7363, abs=1e-3)
        c = BivariateCopula(CopulaFamily("frank"), theta)
        assert theta_to_tau(c) == pytest.approx(0.5, abs=1e-8)

    def test_zero_tau_gives_independence(self):
        for kind in ("bvn", "frank"):
            c = BivariateCopula(CopulaFamily(kind), tau_to_theta(CopulaFamily(kind), 0.0))
            assert c.is_independence

    @pytest.mark.parametrize("kind,rotation", [("bvn", 0), ("frank", 0),
                                               ("clayton", 0), ("clayton", 90),
                                               ("clayton", 180), ("clayton", 270)])
    def test_round_trip(self, kind, rotation):
        fam = CopulaFamily(kind, rotation)
        for tau in np.arange(-0.9, 0.91, 0.2):
            tau = round(tau, 10)
            if tau == 0.0:
                continue
            if kind == "clayton":
                lo, hi = (0.0, 1.0) if rotation in (0, 180) else (-1.0, 0.0)
                if not lo < tau < hi:
                    continue
            theta = tau_to_theta(fam, tau)
            back = theta_to_tau(BivariateCopula(fam, theta))
            assert back == pytest.approx(tau, abs=1e-7)

    def test_rotation_incompatible_tau(self):
        with pytest.raises(ValueError, match="tau in"):
            tau_to_theta(CopulaFamily("clayton", 90), 0.5)
        with pytest.raises(ValueError, match="tau in"):
            tau_to_theta(CopulaFamily("clayton", 180), -0.3)

    @pytest.mark.parametrize("kind,rotation,tau", ALL_CONFIGS)
    def test_brute_force_definition(self, kind, rotation, tau):
        # tau = 4 E[C(U,V)] - 1 with (U,V) ~ C, by quasi-random sampling
        # through the conditional inverse (Frank/Clayton), or by
        # 4*int C*c - 1 on a quadrature grid (BVN, whose cdf is costly).
        c = make(kind, rotation, tau)
        if kind == "bvn":
            from vinedta.numerics import gauss_legendre_01
            g = gauss_legendre_01(80)
            cd = c.cdf(g.nodes[:, None], g.nodes[None, :])
            de = c.pdf(g.nodes[:, None], g.nodes[None, :])
            est = 4.0 * np.einsum("i,j,ij->", g.weights, g.weights, cd * de) - 1.0
        else:
            qmc = stats.qmc.Sobol(d=2, scramble=True, seed=1234)
            pts = qmc.random_base2(20)  # 2^20 points
            u = np.clip(pts[:, 0], 1e-9, 1 - 1e-9)
            v = c.hinv(np.clip(pts[:, 1], 1e-9, 1 - 1e-9), u)
            est = 4.0 * np.mean(c.cdf(u, v)) - 1.0
        assert est == pytest.approx(tau, abs=5e-3)


class TestValidation:
    def test_bad_family(self):
        with pytest.raises(ValueError):
            CopulaFamily("gumbel")

    def test_bad_rotation(self):
        with pytest.raises(ValueError):
            CopulaFamily("clayton", 45)

    def test_rotation_only_for_clayton(self):
        with pytest.raises(ValueError):
            CopulaFamily("bvn", 90)

    def test_theta_ranges(self):
        with pytest.raises(ValueError):
            BivariateCopula(CopulaFamily("bvn"), 1.2)
        with pytest.raises(ValueError):
            BivariateCopula(CopulaFamily("clayton"), -0.5)
