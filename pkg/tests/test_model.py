import itertools

import numpy as np
import pytest
from scipy import stats

from vinedta.copulas import INDEPENDENCE, from_tau
from vinedta.margins import MarginSpec
from vinedta.model import (
    LikelihoodGrid,
    ModelSpec,
    StudyData,
    binomial_log_pmf,
    cell_probs,
    dataset_log_lik,
    pooled_nonevaluable_probs,
    study_log_lik,
)
from vinedta.numerics import gauss_legendre_01
from vinedta.vine import VineSpec


def indep_model(m1=None, m2=None, m3=None):
    return ModelSpec(
        m1 or MarginSpec("normal", 0.8, 0.7, "logit"),
        m2 or MarginSpec("normal", 0.9, 0.5, "logit"),
        m3 or MarginSpec("beta", 0.3, 0.1, "identity"),
        VineSpec(1, INDEPENDENCE, INDEPENDENCE, INDEPENDENCE),
    )


def frank_model():
    return ModelSpec(
        MarginSpec("normal", 0.8, 0.7, "logit"),
        MarginSpec("normal", 0.9, 0.5, "logit"),
        MarginSpec("beta", 0.3, 0.1, "identity"),
        VineSpec(
            1,
            from_tau("frank", -0.4),
            from_tau("frank", 0.3),
            from_tau("frank", -0.2),
        ),
    )


class TestCellProbs:
    def test_sum_to_one(self):
        w = cell_probs(0.8, 0.9, 0.3, 0.1, 0.05)
        assert w.as_array().sum() == pytest.approx(1.0, abs=1e-14)

    def test_component_formulas(self):
        p1, p2, p3, p4, p5 = 0.8, 0.9, 0.3, 0.1, 0.05
        w = cell_probs(p1, p2, p3, p4, p5)
        assert w.w00 == pytest.approx(p2 * (1 - p3) * (1 - p5))
        assert w.w01 == pytest.approx((1 - p1) * p3 * (1 - p4))
        assert w.w10 == pytest.approx((1 - p2) * (1 - p3) * (1 - p5))
        assert w.w11 == pytest.approx(p1 * p3 * (1 - p4))
        assert w.w20 == pytest.approx((1 - p3) * p5)
        assert w.w21 == pytest.approx(p3 * p4)

    def test_zero_nonevaluable_allowed(self):
        w = cell_probs(0.8, 0.9, 0.3, 0.0, 0.0)
        assert w.w20 == 0.0
        assert w.w21 == 0.0
        assert w.as_array().sum() == pytest.approx(1.0, abs=1e-14)

    def test_validation(self):
        with pytest.raises(ValueError):
            cell_probs(0.0, 0.9, 0.3, 0.1, 0.05)
        with pytest.raises(ValueError):
            cell_probs(0.8, 0.9, 0.3, 1.0, 0.05)
        with pytest.raises(ValueError):
            cell_probs(0.8, 0.9, 0.3, 0.1, -0.1)


class TestStudyData:
    def test_margins_and_totals(self):
        s = StudyData(y00=40, y01=5, y10=8, y11=30, y20=4, y21=3)
        assert s.diseased == 35
        assert s.nondiseased == 48
        assert s.diseased_all == 38
        assert s.nondiseased_all == 52
        assert s.total == 90

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            StudyData(1, 2, 3, -1, 0, 0)

    def test_empty_study_allowed(self):
        assert StudyData(0, 0, 0, 0, 0, 0).total == 0


class TestBinomialLogPmf:
    @pytest.mark.parametrize("y,n,p", [(0, 5, 0.3), (3, 10, 0.7), (10, 10, 0.95)])
    def test_matches_scipy(self, y, n, p):
        assert binomial_log_pmf(y, n, p) == pytest.approx(
            stats.binom.logpmf(y, n, p), abs=1e-10
        )

    def test_vectorized_in_p(self):
        p = np.array([0.2, 0.5, 0.8])
        out = binomial_log_pmf(2, 6, p)
        np.testing.assert_allclose(out, stats.binom.logpmf(2, 6, p), atol=1e-10)

    def test_zero_trials(self):
        np.testing.assert_array_equal(binomial_log_pmf(0, 0, np.array([0.3])), [0.0])

    def test_validation(self):
        with pytest.raises(ValueError):
            binomial_log_pmf(5, 3, 0.5)


class TestStudyLogLik:
    def test_independence_factorizes(self, ts_rule):
        # With the independence vine the triple integral is a product of
        # three univariate integrals; the oracle computes each on an
        # independent double-exponential rule on the probability scale.
        m = indep_model()
        s = StudyData(y00=40, y01=5, y10=8, y11=30, y20=4, y21=3)
        got = study_log_lik(s, m, gauss_legendre_01(60))

        n, w = ts_rule
        parts = [
            np.sum(w * np.exp(binomial_log_pmf(s.y11, s.diseased, n))
                   * m.margin1.density(n)),
            np.sum(w * np.exp(binomial_log_pmf(s.y00, s.nondiseased, n))
                   * m.margin2.density(n)),
            np.sum(w * np.exp(binomial_log_pmf(s.diseased_all, s.total, n))
                   * m.margin3.density(n)),
        ]
        assert got == pytest.approx(float(np.sum(np.log(parts))), abs=1e-6)

    def test_dependent_matches_density_integral(self, ts_rule):
        # Full 3-D oracle: integrate the three binomials against the
        # explicit mixed density c(F1, F2, F3) f1 f2 f3 on a
        # double-exponential product grid.
        m = frank_model()
        s = StudyData(y00=22, y01=4, y10=3, y11=18, y20=2, y21=1)
        got = study_log_lik(s, m, gauss_legendre_01(60))

        n, w = ts_rule
        t1 = n[:, None, None]
        t2 = n[None, :, None]
        t3 = n[None, None, :]
        cop = m.vine.density(
            m.margin1.cdf(n)[:, None, None],
            m.margin2.cdf(n)[None, :, None],
            m.margin3.cdf(n)[None, None, :],
        )
        integrand = (
            cop
            * m.margin1.density(n)[:, None, None]
            * m.margin2.density(n)[None, :, None]
            * m.margin3.density(n)[None, None, :]
            * np.exp(binomial_log_pmf(s.y11, s.diseased, t1))
            * np.exp(binomial_log_pmf(s.y00, s.nondiseased, t2))
            * np.exp(binomial_log_pmf(s.diseased_all, s.total, t3))
        )
        oracle = np.log(np.einsum("i,j,k,ijk->", w, w, w, integrand))
        assert got == pytest.approx(float(oracle), abs=1e-5)

    def test_empty_study_contributes_zero(self):
        s = StudyData(0, 0, 0, 0, 0, 0)
        assert study_log_lik(s, frank_model(), gauss_legendre_01(15)) == pytest.approx(
            0.0, abs=1e-10
        )

    @pytest.mark.parametrize("model", [indep_model(), frank_model()])
    def test_quadrature_order_stable(self, model):
        s = StudyData(y00=40, y01=5, y10=8, y11=30, y20=4, y21=3)
        a = study_log_lik(s, model, gauss_legendre_01(15))
        b = study_log_lik(s, model, gauss_legendre_01(35))
        assert a == pytest.approx(b, abs=5e-5)

    def test_large_counts_no_underflow(self):
        s = StudyData(y00=4000, y01=500, y10=800, y11=3000, y20=400, y21=300)
        ll = study_log_lik(s, frank_model(), gauss_legendre_01(20))
        assert np.isfinite(ll)


class TestNormalization:
    def test_table_probabilities_sum_to_one(self):
        # Enumerate every 3x2 table with 3 subjects; the modelled first
        # factor times the two non-evaluable binomials must be a proper
        # pmf over tables.
        m = frank_model()
        q = gauss_legendre_01(15)
        grid = LikelihoodGrid(m, q)
        p4, p5 = 0.1, 0.2
        total = 0.0
        ns = 3
        count = 0
        for tab in itertools.product(range(ns + 1), repeat=6):
            if sum(tab) != ns:
                continue
            count += 1
            s = StudyData(*tab)
            ll = study_log_lik(s, m, q)
            ll += float(binomial_log_pmf(s.y21, s.diseased_all, np.array([p4]))[0])
            ll += float(binomial_log_pmf(s.y20, s.nondiseased_all, np.array([p5]))[0])
            total += np.exp(ll)
        assert count == 56
        assert total == pytest.approx(1.0, abs=1e-9)
        del grid


class TestDatasetLogLik:
    def test_additive_over_studies(self):
        m = frank_model()
        q = gauss_legendre_01(15)
        studies = [
            StudyData(40, 5, 8, 30, 4, 3),
            StudyData(12, 2, 1, 9, 0, 1),
            StudyData(100, 10, 20, 60, 5, 5),
        ]
        total = dataset_log_lik(studies, m, q)
        assert total == pytest.approx(
            sum(study_log_lik(s, m, q) for s in studies), abs=1e-9
        )

    def test_order_invariant(self):
        m = frank_model()
        q = gauss_legendre_01(15)
        studies = [StudyData(40, 5, 8, 30, 4, 3), StudyData(12, 2, 1, 9, 0, 1)]
        assert dataset_log_lik(studies, m, q) == pytest.approx(
            dataset_log_lik(studies[::-1], m, q), abs=1e-12
        )

    def test_duplication_doubles(self):
        m = indep_model()
        q = gauss_legendre_01(15)
        s = StudyData(40, 5, 8, 30, 4, 3)
        assert dataset_log_lik([s, s], m, q) == pytest.approx(
            2 * study_log_lik(s, m, q), abs=1e-9
        )

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            dataset_log_lik([], indep_model(), gauss_legendre_01(15))


class TestPooledNonevaluable:
    def test_pooled_ratios(self):
        data = [
            StudyData(40, 5, 8, 30, 4, 3),
            StudyData(12, 2, 1, 9, 2, 1),
        ]
        p4, p5 = pooled_nonevaluable_probs(data)
        assert p4 == pytest.approx(4 / 50)
        assert p5 == pytest.approx(6 / 67)

    def test_zero_denominator_gives_nan(self):
        p4, p5 = pooled_nonevaluable_probs([StudyData(0, 0, 0, 0, 0, 0)])
        assert np.isnan(p4) and np.isnan(p5)
