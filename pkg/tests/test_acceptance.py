"""Acceptance criteria for the risk-aggregation engine.

Each test prints exactly one ``PASS``/``FAIL`` line (shown even under output
capture) and then asserts, so the pytest summary and the printed ledger of
criteria agree. Reference values are VaR, TVaR and TVaR allocations at level
0.95 under Gamma(5, 100) mixing, for the Frechet-bound lattices
(``BOUND_REFERENCE``) and two non-exchangeable lattices
(``ALLOCATION_REFERENCE``).
"""

import os
import warnings

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.optimize import fsolve

from bernstein_risk.aggregate import (
    AggregateModel,
    agg_pdf,
    agg_survival,
    gamma_agg_pdf,
    gamma_agg_weights,
    pareto_agg_pdf,
    var,
)
from bernstein_risk.alpha import FAMILIES, make_alpha
from bernstein_risk.bernstein import IllConditionedWarning, beta_coeffs, gamma_coeffs
from bernstein_risk.counts import (
    allocation_weights,
    conditional_count_pmf,
    joint_count_pmf,
    tail_sums,
    total_count_pmf,
    tvar_weights,
)
from bernstein_risk.measures import ADDITIVITY_RTOL, mixed_copula, risk_report, spearman_rho, tvar
from bernstein_risk.mixing import GammaClaims, GammaMixing
from bernstein_risk.montecarlo import check_theta_sampler, empirical_measures, sample_batch

from conftest import CLAIMS, PARETO, build
from test_counts import FAMILY_PARAMS, enumerate_conditional, enumerate_counts
from test_measures import clayton_rho

KAPPA = 0.95
ORDERS = (1, 5, 10, 20, 30, 40, 50)
REL = 5e-3
MC_PATHS = 10_000_000
WORKERS = os.cpu_count() or 1

BOUND_REFERENCE = {
    "comonotonic": {
        "var": (139.12, 155.60, 159.76, 162.15, 162.95, 163.34, 163.55),
        "tvar": (205.30, 233.06, 241.33, 247.00, 249.30, 250.57, 251.37),
    },
    "counter_comonotonic": {
        "var": (139.12, 123.41, 119.98, 118.06, 117.39, 117.05, 116.84),
        "tvar": (205.30, 178.71, 173.63, 170.91, 169.98, 169.51, 169.22),
    },
}

ALLOCATION_REFERENCE = {
    "piecewise_gaussian": {
        "var": (139.12, 139.86, 141.87, 142.99, 143.31, 143.43, 143.49),
        "tvar": (205.30, 209.14, 215.04, 219.35, 221.09, 222.04, 222.64),
        "contrib_1": (102.65, 105.48, 109.01, 111.47, 112.43, 112.94, 113.26),
        "contrib_2": (102.65, 103.66, 106.03, 107.88, 108.66, 109.10, 109.38),
    },
    "liebscher_clayton": {
        "var": (139.12, 148.88, 152.44, 154.52, 155.20, 155.53, 155.71),
        "tvar": (205.30, 222.08, 229.17, 234.16, 236.19, 237.30, 238.01),
        "contrib_1": (102.65, 110.99, 114.51, 116.99, 118.00, 118.56, 118.91),
        "contrib_2": (102.65, 111.09, 114.66, 117.16, 118.18, 118.74, 119.10),
    },
}


class Checks:
    """Collects named sub-checks and reports them as one line."""

    def __init__(self, label):
        self.label = label
        self.failures = []
        self.count = 0

    def check(self, ok, description):
        self.count += 1
        if not ok:
            self.failures.append(description)

    def report(self, capsys):
        if self.failures:
            shown = "; ".join(self.failures[:4])
            more = f" (+{len(self.failures) - 4} more)" if len(self.failures) > 4 else ""
            line = f"FAIL {self.label}: {len(self.failures)}/{self.count} checks failed: {shown}{more}"
        else:
            line = f"PASS {self.label}: {self.count} checks"
        with capsys.disabled():
            print("\n" + line)
        assert not self.failures, line


def within(value, target, rel=REL):
    return abs(value - target) <= rel * abs(target)


def integrate_pdf(model, lo, hi):
    edges = [e for e in (lo, 25.0, 100.0, 400.0, 2000.0, hi) if lo <= e <= hi]
    return sum(
        integrate.quad(lambda t: agg_pdf(model, t) if t > 0 else 0.0, a, b,
                       epsabs=1e-13, epsrel=1e-11, limit=200)[0]
        for a, b in zip(edges[:-1], edges[1:])
    )


def test_parameter_recovery(capsys):
    checks = Checks("prerequisite, mixing parameters recovered from the m = 1 column")
    counts = build("comonotonic", 1)[2].counts

    def equations(p):
        model = AggregateModel(GammaMixing(*p), counts)
        return [agg_survival(model, 139.12) - 0.05, tvar(model, kappa=KAPPA) - 205.30]

    a, b = fsolve(equations, [4.0, 80.0], xtol=1e-13)
    checks.check(round(a) == 5 and round(b) == 100, f"solve gave a={a:.4f}, b={b:.4f}")
    model = AggregateModel(PARETO, counts)
    sf = agg_survival(model, 139.12)
    checks.check(round(sf, 4) == 0.05, f"P(S > 139.12) = {sf:.6f}")
    checks.check(round(var(model, KAPPA), 2) == 139.12, f"VaR {var(model, KAPPA):.4f}")
    checks.check(round(tvar(model, kappa=KAPPA), 2) == 205.30, f"TVaR {tvar(model, kappa=KAPPA):.4f}")
    checks.report(capsys)


def test_criterion_1_bounds_first_order(capsys):
    checks = Checks("criterion 1, Frechet-bound lattices at m = 1")
    values = []
    for kind in ("comonotonic", "counter_comonotonic"):
        model = build(kind, 1)[2]
        v, t = var(model, KAPPA), tvar(model, kappa=KAPPA)
        values.append((v, t))
        checks.check(abs(v - 139.12) <= 0.01, f"{kind} VaR {v:.4f}")
        checks.check(abs(t - 205.30) <= 0.01, f"{kind} TVaR {t:.4f}")
    checks.check(values[0] == values[1], f"families differ: {values}")
    checks.report(capsys)


@pytest.mark.slow
def test_criterion_2_bounds_all_orders(capsys):
    checks = Checks("criterion 2, Frechet-bound VaR/TVaR for all orders, with 10^7-path Monte Carlo")
    for kind, table in BOUND_REFERENCE.items():
        for j, m in enumerate(ORDERS):
            _, gamma, model = build(kind, m)
            v, t = var(model, KAPPA), tvar(model, kappa=KAPPA)
            checks.check(within(v, table["var"][j]), f"{kind} m={m} VaR {v:.2f} vs {table['var'][j]}")
            checks.check(within(t, table["tvar"][j]), f"{kind} m={m} TVaR {t:.2f} vs {table['tvar'][j]}")
            batch = sample_batch(gamma, PARETO, MC_PATHS, seed=1000 + m, workers=WORKERS, method="beta")
            emp = empirical_measures(batch, KAPPA)
            del batch
            checks.check(abs(v - emp.var) <= 4 * emp.stderr["var"],
                         f"{kind} m={m} VaR {v:.3f} vs MC {emp.var:.3f}±{emp.stderr['var']:.3f}")
            checks.check(abs(t - emp.tvar) <= 4 * emp.stderr["tvar"],
                         f"{kind} m={m} TVaR {t:.3f} vs MC {emp.tvar:.3f}±{emp.stderr['tvar']:.3f}")
    checks.report(capsys)


def test_criterion_3_allocation_all_orders(capsys):
    checks = Checks("criterion 3, non-exchangeable VaR/TVaR/allocations for all orders")
    for kind, table in ALLOCATION_REFERENCE.items():
        for j, m in enumerate(ORDERS):
            _, gamma, model = build(kind, m)
            report = risk_report(model, gamma, KAPPA)
            got = {"var": report.var, "tvar": report.tvar,
                   "contrib_1": report.contributions[0], "contrib_2": report.contributions[1]}
            for key, value in got.items():
                checks.check(within(value, table[key][j]),
                             f"{kind} m={m} {key} {value:.2f} vs {table[key][j]}")
            checks.check(report.additivity_gap() <= ADDITIVITY_RTOL,
                         f"{kind} m={m} additivity gap {report.additivity_gap():.1e}")
            if m == 1:
                for c in report.contributions:
                    checks.check(abs(c - report.tvar / 2) <= 0.01, f"{kind} m=1 contribution {c:.4f}")
    checks.report(capsys)


def test_criterion_4_count_lattice(capsys):
    checks = Checks("criterion 4, count lattice against exhaustive enumeration")
    L = 18
    for kind in sorted(FAMILIES):
        for m in (1, 2, 3):
            gamma = gamma_coeffs(make_alpha(kind, FAMILY_PARAMS.get(kind), m=m))
            for nu in range(m):
                cond = conditional_count_pmf(m, nu, L)
                checks.check(np.allclose(cond, enumerate_conditional(m, nu, L), atol=1e-12, rtol=0),
                             f"{kind} m={m} conditional nu={nu}")
            counts = total_count_pmf(gamma, L_start=L, hard_cap=L, eps_tail=1.0)
            A, q = enumerate_counts(gamma, L)
            tail = 1.0 - A.sum()
            B = [A[max(i + 1, 2):].sum() + tail for i in range(L + 1)]
            P = [sum(l * A[l] for l in range(max(v, 2), L + 1)) for v in range(L + 1)]
            checks.check(np.allclose(counts.probs, A, atol=1e-12, rtol=0), f"{kind} m={m} A_l")
            checks.check(np.allclose(tail_sums(counts), B, atol=1e-12, rtol=0), f"{kind} m={m} B_i")
            checks.check(np.allclose(tvar_weights(counts), P, atol=1e-12, rtol=0), f"{kind} m={m} P_nu")
            joint = joint_count_pmf(gamma, 0, L_start=L, hard_cap=L, eps_tail=1.0)
            keep = np.add.outer(np.arange(L + 1), np.arange(L + 1)) <= L
            checks.check(np.allclose(joint.probs[keep], q[keep], atol=1e-12, rtol=0), f"{kind} m={m} q_kl")
            P1 = [sum(k * q[k, l] for k in range(L + 1) for l in range(L + 1 - k) if k + l >= max(v, 2))
                  for v in range(L + 1)]
            checks.check(np.allclose(allocation_weights(joint), P1, atol=1e-12, rtol=0),
                         f"{kind} m={m} P_nu^(1)")
    for kind in sorted(FAMILIES):
        for m in (1, 5, 10, 20, 30, 40, 50):
            counts = total_count_pmf(gamma_coeffs(make_alpha(kind, FAMILY_PARAMS.get(kind), m=m)))
            total = counts.probs.sum() + counts.tail_mass
            checks.check(abs(counts.probs.sum() - 1) <= 1e-8, f"{kind} m={m} sum A_l = {total}")
            checks.check(abs(counts.mean() - 2 * m) <= 1e-8 * 2 * m, f"{kind} m={m} mean {counts.mean()}")
    checks.report(capsys)


def test_criterion_5_distribution_consistency(capsys):
    checks = Checks("criterion 5, density and survival consistency")
    for mixing, name in ((PARETO, "gamma_mixing"), (CLAIMS, "gamma_claims")):
        for kind in ("comonotonic", "counter_comonotonic", "piecewise_gaussian", "liebscher_clayton"):
            for m in (1, 5, 20):
                model = build(kind, m, mixing=mixing)[2]
                mass = integrate_pdf(model, 0.0, np.inf)
                checks.check(abs(mass - 1) <= 1e-6, f"{name} {kind} m={m} mass {mass:.10f}")
                for x in (20.0, 139.12, 600.0):
                    gap = abs(agg_survival(model, x) - (1 - integrate_pdf(model, 0.0, x)))
                    checks.check(gap <= 1e-6, f"{name} {kind} m={m} survival gap {gap:.1e} at {x}")
                if mixing is PARETO:
                    for x in (5.0, 139.12, 1000.0):
                        closed, series = pareto_agg_pdf(5.0, 100.0, model.counts, x), agg_pdf(model, x)
                        checks.check(abs(closed - series) <= 1e-12 * series,
                                     f"{kind} m={m} Pareto form at {x}")
                else:
                    omega = gamma_agg_weights(CLAIMS.a, CLAIMS.lam, model.counts)
                    checks.check(abs(omega.sum() - 1) <= 1e-8, f"{kind} m={m} sum omega {omega.sum()}")
                    for x in (5.0, 139.12, 1000.0):
                        closed, series = gamma_agg_pdf(CLAIMS.a, CLAIMS.lam, model.counts, x), agg_pdf(model, x)
                        checks.check(abs(closed - series) <= 1e-10 * series,
                                     f"{kind} m={m} Gamma-claims form at {x}")
    checks.report(capsys)


def test_criterion_6_rank_correlation_curves(capsys):
    checks = Checks("criterion 6, Spearman rho bounds over m")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedWarning)
        for a in (1.0, 5.0, 10.0):
            mixing = GammaMixing(a, 1.0)
            up, lo, ind = [], [], []
            for m in range(1, 16):
                up.append(spearman_rho(beta_coeffs(make_alpha("comonotonic", m=m)), mixing))
                lo.append(spearman_rho(beta_coeffs(make_alpha("counter_comonotonic", m=m)), mixing))
                ind.append(spearman_rho(beta_coeffs(make_alpha("independence", m=m)), mixing))
            checks.check(all(x <= y for x, y in zip(up, up[1:])), f"a={a} upper curve not nondecreasing")
            checks.check(all(x >= y for x, y in zip(lo, lo[1:])), f"a={a} lower curve not nonincreasing")
            oracle = clayton_rho(1.0 / a)
            checks.check(abs(up[0] - oracle) <= 1e-3, f"a={a} m=1 rho {up[0]:.6f} vs Clayton {oracle:.6f}")
            spread = max(ind) - min(ind)
            checks.check(spread <= 1e-6, f"a={a} independence rho spread {spread:.1e}")
    checks.report(capsys)


def test_criterion_7_simulation_fidelity(capsys):
    checks = Checks("criterion 7, Monte Carlo fidelity")
    for mixing, name in ((CLAIMS, "gamma_claims"), (GammaClaims(0.8, 1.0), "gamma_claims(0.8)")):
        z = check_theta_sampler(mixing)
        checks.check(z <= 3, f"{name} Theta sampler z = {z:.2f}")
    for mixing, name in ((PARETO, "gamma_mixing"), (CLAIMS, "gamma_claims")):
        cdf = lambda x, mixing=mixing: 1 - np.asarray(mixing.laplace(x))
        for kind in ("comonotonic", "piecewise_gaussian", "liebscher_clayton"):
            grid = make_alpha(kind, m=10)
            gamma, beta = gamma_coeffs(grid), beta_coeffs(grid)
            batch = sample_batch(gamma, mixing, 1_000_000, seed=77, workers=WORKERS)
            for i in range(2):
                p = stats.kstest(batch.losses[:100_000, i], cdf).pvalue
                checks.check(p > 0.01, f"{name} {kind} margin {i + 1} KS p = {p:.4f}")
            u = np.asarray(mixing.laplace(batch.losses))
            worst = 0.0
            for u1 in np.linspace(0.1, 1.0, 10):
                below = u[:, 0] <= u1
                for u2 in np.linspace(0.1, 1.0, 10):
                    emp = np.mean(below & (u[:, 1] <= u2))
                    worst = max(worst, abs(emp - mixed_copula(beta, mixing, [u1, u2])))
            checks.check(worst <= 0.01, f"{name} {kind} copula sup-distance {worst:.4f}")
    checks.report(capsys)
