import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate
from scipy.special import beta as beta_fn
from scipy.stats import gamma as gamma_law

from bernstein_risk.aggregate import (
    AggregateModel,
    BracketError,
    agg_pdf,
    agg_survival,
    gamma_agg_pdf,
    gamma_agg_weights,
    pareto_agg_pdf,
    var,
)
from bernstein_risk.alpha import FAMILIES, make_alpha
from bernstein_risk.bernstein import gamma_coeffs
from bernstein_risk.counts import total_count_pmf
from bernstein_risk.mixing import GammaClaims, GammaMixing

from conftest import CLAIMS, PARETO, build


def integrate_pdf(model, lo=0.0, hi=np.inf):
    total = 0.0
    edges = [lo, 25.0, 100.0, 400.0, 2000.0, hi] if hi == np.inf else [lo, hi]
    edges = [e for e in edges if lo <= e <= hi]
    for a, b in zip(edges[:-1], edges[1:]):
        value, _ = integrate.quad(lambda t: agg_pdf(model, t) if t > 0 else 0.0, a, b,
                                  epsabs=1e-13, epsrel=1e-11, limit=200)
        total += value
    return total


class TestDensity:
    def test_m1_closed_form(self):
        _, _, model = build("comonotonic", 1)
        assert agg_pdf(model, 100.0) == pytest.approx(0.3 * 2.0**-7, rel=1e-13)

    @pytest.mark.parametrize("x", [3.0, 70.0, 640.0])
    def test_m1_is_pareto_sum_for_any_family(self, x):
        # m = 1: (x^(n-1)) / (b^n B(n, a) (1 + x/b)^(a + n))
        expected = x / (100.0**2 * beta_fn(2, 5) * (1 + x / 100.0) ** 7)
        for kind in ("independence", "liebscher_clayton"):
            assert agg_pdf(build(kind, 1)[2], x) == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("kind", ["comonotonic", "counter_comonotonic", "liebscher_clayton"])
    def test_integrates_to_one(self, kind):
        _, _, model = build(kind, 5)
        assert integrate_pdf(model) == pytest.approx(1.0, abs=1e-8)

    def test_terms_nonnegative_and_error_reported(self):
        _, _, model = build("comonotonic", 20)
        value, err = agg_pdf(model, 150.0, return_error=True)
        assert value > 0 and 0 <= err < 1e-12 * max(1.0, value) + 1e-12

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            agg_pdf(build("comonotonic", 2)[2], 0.0)

    @pytest.mark.parametrize("x", [10.0, 100.0, 500.0])
    def test_pareto_closed_form_matches_series(self, x):
        _, _, model = build("comonotonic", 5)
        assert pareto_agg_pdf(5.0, 100.0, model.counts, x) == pytest.approx(agg_pdf(model, x), rel=1e-12)

    def test_pareto_closed_form_normalised(self):
        counts = build("liebscher_clayton", 10)[2].counts
        value = sum(
            integrate.quad(lambda t: pareto_agg_pdf(5.0, 100.0, counts, t), a, b, epsrel=1e-12, limit=200)[0]
            for a, b in [(1e-300, 100), (100, 1000), (1000, np.inf)]
        )
        assert value == pytest.approx(1.0, abs=1e-8)

    def test_density_derivative_of_survival(self):
        _, _, model = build("piecewise_gaussian", 8)
        h = 1e-3
        fd = -(agg_survival(model, 120 + h) - agg_survival(model, 120 - h)) / (2 * h)
        assert agg_pdf(model, 120.0) == pytest.approx(fd, rel=1e-7)


class TestSurvival:
    def test_at_zero(self):
        assert agg_survival(build("comonotonic", 5)[2], 0.0) == 1.0

    def test_m1_closed_form(self):
        # m = 1: P(S > x) from the Gamma(2) mixture is (1 + x/b)^-a (1 + a x/(b + x))
        x = 139.12
        expected = (1 + x / 100) ** -5 * (1 + 5 * x / (100 + x))
        assert agg_survival(build("counter_comonotonic", 1)[2], x) == pytest.approx(expected, rel=1e-13)
        assert expected == pytest.approx(0.05, abs=5e-5)

    @pytest.mark.parametrize("x", [50.0, 139.12, 300.0])
    def test_complement_of_density(self, x):
        _, _, model = build("comonotonic", 5)
        assert agg_survival(model, x) == pytest.approx(1 - integrate_pdf(model, 0.0, x), abs=1e-9)

    def test_monotone(self):
        _, _, model = build("liebscher_clayton", 10)
        xs = np.linspace(0, 1000, 41)
        values = [agg_survival(model, x) for x in xs]
        assert all(a >= b for a, b in zip(values, values[1:]))
        assert all(0 <= v <= 1 for v in values)

    def test_truncation_error_reported(self):
        _, _, model = build("comonotonic", 10)
        _, err = agg_survival(model, 100.0, return_error=True)
        assert err == model.counts.tail_mass

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            agg_survival(build("comonotonic", 2)[2], -1.0)


class TestValueAtRisk:
    def test_m1_table_value(self):
        assert var(build("comonotonic", 1)[2], 0.95) == pytest.approx(139.12, abs=0.01)

    def test_comonotonic_m5(self):
        assert var(build("comonotonic", 5)[2], 0.95) == pytest.approx(155.60, rel=5e-3)

    @pytest.mark.parametrize("kappa", [0.9, 0.95, 0.99])
    @pytest.mark.parametrize("kind", ["comonotonic", "piecewise_gaussian"])
    def test_round_trip(self, kind, kappa):
        _, _, model = build(kind, 10)
        assert agg_survival(model, var(model, kappa)) == pytest.approx(1 - kappa, abs=1e-9)

    def test_monotone_in_level(self):
        _, _, model = build("comonotonic", 5)
        assert var(model, 0.99) > var(model, 0.95)

    @pytest.mark.parametrize("m", [1, 5, 20])
    def test_m1_invariance_and_dependence_order(self, m):
        values = {kind: var(build(kind, m)[2], 0.95) for kind in ("comonotonic", "independence", "counter_comonotonic")}
        if m == 1:
            assert len({round(v, 9) for v in values.values()}) == 1
        else:
            assert values["comonotonic"] > values["independence"] > values["counter_comonotonic"]

    def test_level_checked(self):
        with pytest.raises(ValueError):
            var(build("comonotonic", 2)[2], 1.0)

    def test_no_bracket_for_extreme_heavy_tail(self):
        gamma = gamma_coeffs(make_alpha("independence", m=1))
        model = AggregateModel(GammaMixing(1.0, 100.0), total_count_pmf(gamma))
        with pytest.raises(BracketError):
            var(model, 1 - 1e-15)


class TestGammaClaims:
    def test_exponential_case_is_erlang(self):
        # a = 1, m = 1: independent Exp(lam) claims, S ~ Gamma(n, lam)
        gamma = gamma_coeffs(make_alpha("comonotonic", m=1, n=3))
        counts = total_count_pmf(gamma)
        omega = gamma_agg_weights(1.0, 0.5, counts)
        assert omega[3] == pytest.approx(1.0, abs=1e-15) and omega.sum() == pytest.approx(1.0, abs=1e-15)
        assert gamma_agg_pdf(1.0, 0.5, counts, 4.0) == pytest.approx(gamma_law.pdf(4.0, 3, scale=2.0), rel=1e-13)

    @pytest.mark.parametrize("n", [2, 3])
    def test_m1_weights(self, n):
        a = 0.4
        counts = total_count_pmf(gamma_coeffs(make_alpha("independence", m=1, n=n)))
        omega = gamma_agg_weights(a, 0.02, counts)
        for k in range(1, n + 1):
            expected = (mp.gamma(a + k - 1) / (mp.gamma(k) * mp.gamma(n - k + 1) * mp.gamma(a))
                        * (-1) ** (n - k) * mp.ff(a - 1, n - k))
            assert omega[k] == pytest.approx(float(expected), rel=1e-12)
        assert not omega[n + 1:].any()

    @pytest.mark.parametrize("kind", ["comonotonic", "liebscher_clayton"])
    def test_weights_normalised_and_match_series(self, kind):
        _, gamma, model = build(kind, 6, mixing=CLAIMS)
        omega = gamma_agg_weights(CLAIMS.a, CLAIMS.lam, model.counts)
        assert omega.min() >= 0
        assert omega.sum() == pytest.approx(1.0, abs=1e-8)
        for x in (5.0, 40.0, 200.0):
            assert gamma_agg_pdf(CLAIMS.a, CLAIMS.lam, model.counts, x) == pytest.approx(agg_pdf(model, x), rel=1e-10)

    def test_density_moments(self):
        _, _, model = build("piecewise_gaussian", 5, mixing=CLAIMS)
        f = lambda t: gamma_agg_pdf(CLAIMS.a, CLAIMS.lam, model.counts, t)
        pieces = [(0, 1), (1, 50), (50, 400), (400, np.inf)]
        mass = sum(integrate.quad(f, a, b, epsrel=1e-12, limit=200)[0] for a, b in pieces)
        mean = sum(integrate.quad(lambda t: t * f(t), a, b, epsrel=1e-12, limit=200)[0] for a, b in pieces)
        assert mass == pytest.approx(1.0, abs=1e-8)
        assert mean == pytest.approx(2 * CLAIMS.a / CLAIMS.lam, rel=1e-6)

    def test_shape_range(self):
        with pytest.raises(ValueError):
            gamma_agg_weights(1.5, 1.0, build("comonotonic", 2)[2].counts)
