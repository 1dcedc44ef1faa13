"""Distribution of the aggregate loss ``S = X_1 + ... + X_n``.

Conditionally on the total count ``T = l`` the latent sum is Gamma(l, m),
so ``S`` is a mixture over ``A_l`` of scale mixtures of Gamma densities:

    f_S(x)  = sum_l A_l (-1)^l m^l x^(l-1) / Gamma(l) f*^(l)(m x)
    P(S>x)  = sum_i B_i (-1)^i (m x)^i / i! f*^(i)(m x)

Every term is nonnegative. Terms are formed in log space because
``x^(l-1) / Gamma(l)`` and ``f*^(l)`` over/underflow separately long before
their product does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import betaln, gammaln, xlogy

from .counts import CountPmf, tail_sums
from .mixing import GammaClaims, GammaMixing, MixingFamily

__all__ = [
    "AggregateModel",
    "agg_pdf",
    "agg_survival",
    "var",
    "pareto_agg_pdf",
    "gamma_agg_weights",
    "gamma_agg_pdf",
    "BracketError",
]

VAR_RTOL = 1e-12
OVERFLOW_GUARD = 1e15


class BracketError(RuntimeError):
    """No finite upper bracket for the quantile below the overflow guard."""


@dataclass(frozen=True)
class AggregateModel:
    """Mixing family plus the total-count pmf of one Bernstein model."""

    mixing: MixingFamily
    counts: CountPmf
    tails: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.tails is None:
            object.__setattr__(self, "tails", tail_sums(self.counts))
        if len(self.tails) != self.counts.L_cap + 1:
            raise ValueError("tail sums and count pmf have different truncation")

    @property
    def n(self):
        return self.counts.n

    @property
    def m(self):
        return self.counts.m


def _log_kernel(model, x):
    """``log`` of the conditional density of S given ``T = l``, for every l."""
    m = model.m
    L = model.counts.L_cap
    ell = np.arange(L + 1)
    logd = model.mixing.log_abs_derivs(L, m * x)
    out = ell * math.log(m) + xlogy(ell - 1, x) - gammaln(np.maximum(ell, 1)) + logd
    out[0] = -np.inf
    return out


def agg_pdf(model: AggregateModel, x, return_error=False):
    """Density of the aggregate loss at ``x > 0``.

    With ``return_error=True`` also returns a truncation envelope:
    ``tail_mass`` times the largest conditional density among the orders
    ``l >= L_cap / 2``.
    """
    x = float(x)
    if not x > 0:
        raise ValueError(f"aggregate density needs x > 0, got {x}")
    logk = _log_kernel(model, x)
    probs = model.counts.probs
    with np.errstate(divide="ignore"):
        terms = np.exp(np.log(probs) + logk)
    assert np.all(terms >= 0) and np.all(np.isfinite(terms)), "negative or invalid series term"
    value = float(terms.sum())
    if return_error:
        half = model.counts.L_cap // 2
        envelope = float(np.exp(logk[half:]).max()) if half > 0 else 0.0
        return value, model.counts.tail_mass * envelope
    return value


def agg_survival(model: AggregateModel, x, return_error=False):
    """``P(S > x)``; the truncation error is at most ``tail_mass``."""
    x = float(x)
    if x < 0:
        raise ValueError(f"survival needs x >= 0, got {x}")
    if x == 0:
        return (1.0, 0.0) if return_error else 1.0
    m = model.m
    L = model.counts.L_cap
    i = np.arange(L + 1)
    y = m * x
    logt = i * math.log(y) - gammaln(i + 1) + model.mixing.log_abs_derivs(L, y)
    with np.errstate(divide="ignore"):
        terms = np.exp(np.log(model.tails) + logt)
    value = float(min(1.0, terms.sum()))
    if return_error:
        return value, model.counts.tail_mass
    return value


def var(model: AggregateModel, kappa):
    """Value at risk: the ``kappa``-quantile of ``S``.

    Brackets by doubling from the marginal median scale, then solves
    ``P(S > x) = 1 - kappa`` with Brent's method.
    """
    kappa = float(kappa)
    if not 0 < kappa < 1:
        raise ValueError(f"level must lie in (0, 1), got {kappa}")
    target = 1.0 - kappa

    def excess(x):
        return agg_survival(model, x) - target

    lo = 0.0
    hi = max(float(model.mixing.inv(0.5)), 1e-8)
    while excess(hi) > 0:
        lo = hi
        hi *= 2.0
        if hi > OVERFLOW_GUARD:
            raise BracketError(
                f"no bracket for VaR at kappa={kappa} below {OVERFLOW_GUARD:g}"
            )
    return brentq(excess, lo, hi, xtol=1e-300, rtol=VAR_RTOL, maxiter=500)


def pareto_agg_pdf(a, b, counts: CountPmf, x):
    """Aggregate density for Gamma(a, b) mixing (Pareto margins).

    ``sum_l A_l m^l x^(l-1) / (b^l B(l, a) (1 + m x / b)^(a + l))``.
    """
    x = float(x)
    if not x > 0:
        raise ValueError(f"aggregate density needs x > 0, got {x}")
    m = counts.m
    ell = np.arange(1, counts.L_cap + 1)
    logt = (
        ell * math.log(m)
        + (ell - 1) * math.log(x)
        - ell * math.log(b)
        - betaln(ell, a)
        - (a + ell) * math.log1p(m * x / b)
    )
    with np.errstate(divide="ignore"):
        return float(np.exp(np.log(counts.probs[1:]) + logt).sum())


def gamma_agg_weights(a, lam, counts: CountPmf):
    """Weights ``omega_k`` (``k = 0..L_cap``, ``omega_0 = 0``) of the Gamma mixture.

    The aggregate density of Gamma(a, lam) margins is
    ``sum_k omega_k Gamma(a + k - 1, lam m)``. For ``a < 1`` the falling
    factorial sign cancels ``(-1)^(l-k)`` so every weight is nonnegative.
    """
    if not 0 < a <= 1:
        raise ValueError(f"gamma claims need 0 < a <= 1, got {a}")
    L = counts.L_cap
    A = counts.probs
    omega = np.zeros(L + 1)
    if a == 1.0:
        omega[1:] = A[1:]
        return omega
    k = np.arange(1, L + 1)
    for kk in k:
        ell = np.arange(max(kk, counts.n), L + 1)
        if ell.size == 0:
            continue
        j = ell - kk
        # (-1)^j (a-1)_j = Gamma(j + 1 - a) / Gamma(1 - a)
        logw = (
            gammaln(a + kk - 1)
            - gammaln(kk)
            - gammaln(j + 1)
            - gammaln(a)
            + gammaln(j + 1 - a)
            - gammaln(1 - a)
        )
        with np.errstate(divide="ignore"):
            omega[kk] = np.exp(np.log(A[ell]) + logw).sum()
    return omega


def gamma_agg_pdf(a, lam, counts: CountPmf, x):
    """Aggregate density evaluated through the Gamma-mixture weights."""
    x = float(x)
    if not x > 0:
        raise ValueError(f"aggregate density needs x > 0, got {x}")
    omega = gamma_agg_weights(a, lam, counts)
    k = np.arange(1, counts.L_cap + 1)
    shape = a + k - 1
    rate = lam * counts.m
    logf = shape * math.log(rate) + (shape - 1) * math.log(x) - rate * x - gammaln(shape)
    return float(np.dot(omega[1:], np.exp(logf)))


def model_from(mixing, counts):
    """Convenience constructor used by the estimator and CLI."""
    if not isinstance(mixing, (GammaMixing, GammaClaims, MixingFamily)):
        raise TypeError("mixing must be a MixingFamily")
    return AggregateModel(mixing, counts)
