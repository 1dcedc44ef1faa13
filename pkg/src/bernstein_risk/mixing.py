"""Mixing variables described through their Laplace transforms.

``f*(x) = E[exp(-x Theta)]`` doubles as the marginal survival function of
every risk and as the generator of the mixed copula. Series formulas need
derivatives of very high order, so families expose ``log |f*^(l)(x)|``
for a whole range of orders at once; the sign of ``f*^(l)`` is always
``(-1)^l`` (complete monotonicity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, gammainccinv, gammaln, logsumexp

__all__ = [
    "MixingFamily",
    "GammaMixing",
    "GammaClaims",
    "make_mixing",
    "laplace",
    "laplace_deriv",
    "laplace_inv",
    "sample_theta",
]


class MixingFamily:
    """Interface shared by the mixing families."""

    name = "abstract"

    def laplace(self, x):
        raise NotImplementedError

    def log_abs_derivs(self, max_order, x):
        """``log |f*^(l)(x)|`` for ``l = 0..max_order`` as an array."""
        raise NotImplementedError

    def deriv(self, order, x):
        order = int(order)
        if order < 0:
            raise ValueError("derivative order must be >= 0")
        if order == 0:
            return self.laplace(x)
        value = math.exp(self.log_abs_derivs(order, x)[order])
        return value if order % 2 == 0 else -value

    def inv(self, u):
        raise NotImplementedError

    def tail_integral(self, x):
        """``int_x^inf f*(t) dt`` (the mean excess numerator of one risk)."""
        raise NotImplementedError

    def sample(self, rng, size=None):
        raise NotImplementedError

    def mean(self):
        """Marginal mean of a risk, ``int_0^inf f*``."""
        return self.tail_integral(0.0)

    def params(self):
        raise NotImplementedError


def _check_inv_arg(u):
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u > 1)):
        raise ValueError("inverse Laplace transform needs u in (0, 1]")
    return u


@dataclass(frozen=True)
class GammaMixing(MixingFamily):
    """``Theta ~ Gamma(shape a, rate b)``: Pareto(a, b) margins, Clayton generator.

    ``f*(x) = (1 + x/b)^(-a)``. Only ``a >= 1`` is accepted.
    """

    a: float
    b: float
    name = "gamma_mixing"

    def __post_init__(self):
        if not self.a >= 1:
            raise ValueError(f"gamma_mixing requires a >= 1, got a={self.a}")
        if not self.b > 0:
            raise ValueError(f"gamma_mixing requires b > 0, got b={self.b}")

    def params(self):
        return {"a": self.a, "b": self.b}

    def laplace(self, x):
        return (1.0 + np.asarray(x, dtype=float) / self.b) ** (-self.a)

    def log_abs_derivs(self, max_order, x):
        if x < 0:
            raise ValueError("x must be >= 0")
        ell = np.arange(max_order + 1)
        return (
            gammaln(self.a + ell)
            - gammaln(self.a)
            - ell * math.log(self.b)
            - (self.a + ell) * math.log1p(x / self.b)
        )

    def inv(self, u):
        u = _check_inv_arg(u)
        out = self.b * np.expm1(-np.log(u) / self.a)
        return float(out) if out.ndim == 0 else out

    def tail_integral(self, x):
        if self.a <= 1:
            raise ValueError(
                "int f* diverges for a <= 1 (infinite-mean Pareto margins); TVaR undefined"
            )
        return self.b / (self.a - 1.0) * (1.0 + x / self.b) ** (1.0 - self.a)

    def sample(self, rng, size=None):
        return rng.gamma(self.a, 1.0 / self.b, size=size)


@dataclass(frozen=True)
class GammaClaims(MixingFamily):
    """Gamma(a, lam) margins with ``0 < a <= 1``; ``f*(x) = Q(a, lam x)``.

    ``Theta = lam / V`` with ``V ~ Beta(a, 1 - a)`` since a Gamma(a) variable
    with ``a < 1`` is ``Exp(1) * Beta(a, 1 - a)``.
    """

    a: float
    lam: float
    name = "gamma_claims"

    def __post_init__(self):
        if not 0 < self.a <= 1:
            raise ValueError(f"gamma_claims requires 0 < a <= 1, got a={self.a}")
        if not self.lam > 0:
            raise ValueError(f"gamma_claims requires lambda > 0, got {self.lam}")

    def params(self):
        return {"a": self.a, "lambda": self.lam}

    def laplace(self, x):
        return gammaincc(self.a, self.lam * np.asarray(x, dtype=float))

    def log_abs_derivs(self, max_order, x):
        a, lam = self.a, self.lam
        out = np.empty(max_order + 1)
        with np.errstate(divide="ignore"):
            out[0] = np.log(gammaincc(a, lam * x))
        if max_order == 0:
            return out
        if a == 1.0:
            out[1:] = np.arange(1, max_order + 1) * math.log(lam) - lam * x
            return out
        if x <= 0:
            raise ValueError("derivatives of Q(a, lam x) are singular at x = 0 when a < 1")
        # |f*^(l)| = lam^a/G(a) e^{-lam x} x^{a-1}
        #            * sum_k C(l-1,k) |(a-1)_k| lam^{l-1-k} x^{-k}, all terms >= 0
        # where |(a-1)_k| = G(k+1-a)/G(1-a) for the falling factorial.
        orders = np.arange(1, max_order + 1)
        k = np.arange(max_order)
        log_ff = gammaln(k + 1 - a) - gammaln(1 - a)
        lgl = gammaln(orders)  # log (l-1)!
        log_binom = lgl[:, None] - gammaln(k + 1)[None, :] - gammaln(orders[:, None] - k[None, :])
        terms = (
            log_binom
            + log_ff[None, :]
            + (orders[:, None] - 1 - k[None, :]) * math.log(lam)
            - k[None, :] * math.log(x)
        )
        terms = np.where(k[None, :] <= orders[:, None] - 1, terms, -np.inf)
        prefix = a * math.log(lam) - gammaln(a) - lam * x + (a - 1) * math.log(x)
        out[1:] = prefix + logsumexp(terms, axis=1)
        return out

    def inv(self, u):
        u = _check_inv_arg(u)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        x = gammainccinv(self.a, u) / self.lam
        for _ in range(3):
            # Newton polish on Q(a, lam x) = u; d/dx Q = -density
            pos = x > 0
            dens = np.zeros_like(x)
            dens[pos] = np.exp(
                self.a * math.log(self.lam) - gammaln(self.a)
                + (self.a - 1) * np.log(x[pos]) - self.lam * x[pos]
            )
            step = np.zeros_like(x)
            ok = dens > 0
            step[ok] = (gammaincc(self.a, self.lam * x[ok]) - u[ok]) / dens[ok]
            x = np.maximum(x + step, 0.0)
        return float(x[0]) if scalar else x

    def tail_integral(self, x):
        # stop-loss transform of Gamma(a, lam): E[(X - x)_+]
        a, lam = self.a, self.lam
        return a / lam * gammaincc(a + 1.0, lam * x) - x * gammaincc(a, lam * x)

    def sample(self, rng, size=None):
        if self.a == 1.0:
            return np.full(size, self.lam) if size is not None else self.lam
        return self.lam / rng.beta(self.a, 1.0 - self.a, size=size)


def make_mixing(kind, **params):
    """Build a family from a name and keyword parameters.

    ``gamma_mixing`` takes ``a, b``; ``gamma_claims`` takes ``a`` and
    ``lam`` (``lambda`` is accepted as an alias).
    """
    if kind == "gamma_mixing":
        return GammaMixing(float(params["a"]), float(params["b"]))
    if kind == "gamma_claims":
        lam = params.get("lam", params.get("lambda"))
        if lam is None:
            raise ValueError("gamma_claims requires lambda")
        return GammaClaims(float(params["a"]), float(lam))
    raise ValueError(f"unknown mixing family {kind!r}")


def laplace(fam, x):
    return fam.laplace(x)


def laplace_deriv(fam, order, x):
    return fam.deriv(order, x)


def laplace_inv(fam, u):
    return fam.inv(u)


def sample_theta(fam, rng, size=None):
    return fam.sample(rng, size)

