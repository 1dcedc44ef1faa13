"""Bernstein copula coefficients and evaluation.

``gamma`` is the cell mass of the lattice copula (a pmf on ``{0..m-1}^n``);
``beta`` is the expansion of the copula in the exponential basis used by the
joint survival function ``sum_l beta_l f*(sum_i l_i x_i)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import binom

from .alpha import MASS_TOL, AlphaGrid

__all__ = [
    "GammaTensor",
    "BetaTensor",
    "InvalidAlphaError",
    "gamma_coeffs",
    "beta_coeffs",
    "eval_copula_bernstein",
    "eval_density_bernstein",
    "bernstein_basis",
]

MAX_ORDER = 64
CONDITION_WARN = 1e12


class InvalidAlphaError(ValueError):
    """The alpha grid does not define a copula."""


class IllConditionedWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class GammaTensor:
    """Joint pmf of the lattice indices ``(N_1, ..., N_n)``.

    ``weights`` has shape ``(m,) * n``; tiny negative rounding noise has
    already been clamped to zero.
    """

    n: int
    m: int
    weights: np.ndarray = field(repr=False)

    def marginal(self, i):
        axes = tuple(a for a in range(self.n) if a != i)
        return self.weights.sum(axis=axes) if axes else self.weights

    def is_exchangeable(self, atol=1e-12):
        import itertools

        w = self.weights
        return all(
            np.allclose(w, np.transpose(w, perm), rtol=0.0, atol=atol)
            for perm in itertools.permutations(range(self.n))
        )


@dataclass(frozen=True)
class BetaTensor:
    """Signed coefficients of the exponential-basis expansion.

    ``condition = sum |beta| / |sum beta|`` bounds the relative error
    amplification of any evaluation ``sum_l beta_l f*(...)``.
    """

    n: int
    m: int
    coeffs: np.ndarray = field(repr=False)
    condition: float = 1.0


def _check_order(m):
    if m > MAX_ORDER:
        raise ValueError(f"Bernstein order m={m} exceeds supported maximum {MAX_ORDER}")


def gamma_coeffs(grid: AlphaGrid) -> GammaTensor:
    """Cell masses ``sum_{l in {0,1}^n} (-1)^(n + |l|) alpha((nu + l)/m)``.

    Raises
    ------
    InvalidAlphaError
        If any mass is below ``-1e-12``.
    """
    _check_order(grid.m)
    w = grid.mass()
    worst = w.min()
    if worst < -MASS_TOL:
        index = tuple(int(i) for i in np.unravel_index(np.argmin(w), w.shape))
        raise InvalidAlphaError(
            f"negative cell mass {worst:.3g} at {index}: alpha is not n-increasing"
        )
    w = np.where(w < 0.0, 0.0, w)
    w.setflags(write=False)
    return GammaTensor(grid.n, grid.m, w)


@lru_cache(maxsize=None)
def _transform_matrix(m):
    # M[l, nu] = (-1)^(l-nu) C(m-nu, m-l) C(m, nu) for nu <= l, exact integers
    return np.array(
        [
            [
                (-1) ** (ell - nu) * math.comb(m - nu, m - ell) * math.comb(m, nu)
                if nu <= ell
                else 0
                for nu in range(m + 1)
            ]
            for ell in range(m + 1)
        ],
        dtype=object,
    )


def _exact_integers(values):
    # floats are dyadic rationals: scale everything to a common power of two
    ratios = [float(v).as_integer_ratio() for v in values.ravel()]
    scale = max(den for _, den in ratios)
    ints = np.array([num * (scale // den) for num, den in ratios], dtype=object)
    return ints.reshape(values.shape), scale


def beta_coeffs(grid: AlphaGrid) -> BetaTensor:
    """Exponential-basis coefficients of the joint survival function.

    ``beta_l = sum_{nu <= l} (-1)^(sum(l - nu)) prod C(m - nu_i, m - l_i)
    prod C(m, nu_i) alpha(nu / m)``.

    The alternating sum is carried out exactly in integer arithmetic (the
    alpha values are binary fractions) and each coefficient is rounded once,
    so the coefficients themselves carry no cancellation error. What remains
    ill-conditioned is any later sum ``sum_l beta_l f*(...)``: ``condition``
    records ``sum |beta_l| / |sum beta_l|`` and an
    :class:`IllConditionedWarning` is emitted above 1e12.
    """
    _check_order(grid.m)
    matrix = _transform_matrix(grid.m)
    exact, scale = _exact_integers(np.asarray(grid.values))
    for axis in range(grid.n):
        moved = np.moveaxis(exact, axis, -1)
        exact = np.moveaxis(moved.dot(matrix.T), -1, axis)
    coeffs = np.array([int(v) / scale for v in exact.ravel()]).reshape(exact.shape)
    total = abs(sum(exact.ravel())) / scale
    condition = float(np.abs(coeffs).sum() / total) if total > 0 else math.inf
    if condition > CONDITION_WARN:
        warnings.warn(
            f"evaluating sum(beta * f*) loses ~{math.log10(condition):.0f} digits "
            f"to cancellation (m={grid.m}, n={grid.n})",
            IllConditionedWarning,
            stacklevel=2,
        )
    coeffs.setflags(write=False)
    return BetaTensor(grid.n, grid.m, coeffs, condition)


def bernstein_basis(m, u):
    """``G_{nu:m}(u)`` for ``nu = 0..m``; shape ``u.shape + (m + 1,)``."""
    u = np.asarray(u, dtype=float)
    return binom.pmf(np.arange(m + 1), m, u[..., None])


def _contract(tensor, bases):
    # tensor (K,)*n, bases: list of (P, K) -> (P,)
    out = np.einsum("pk,k...->p...", bases[0], tensor)
    for basis in bases[1:]:
        out = np.einsum("pk,pk...->p...", basis, out)
    return out


def _points(u, n):
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 1
    u = np.atleast_2d(u)
    if u.shape[-1] != n:
        raise ValueError(f"points must have trailing dimension {n}, got {u.shape}")
    return u.reshape(-1, n), scalar, u.shape[:-1]


def eval_copula_bernstein(grid: AlphaGrid, u):
    """``C_B(u) = sum_nu alpha(nu/m) prod_i G_{nu_i:m}(u_i)``.

    ``u`` is a point of shape ``(n,)`` or an array of points ``(..., n)``.
    """
    pts, scalar, shape = _points(u, grid.n)
    if np.any((pts < 0) | (pts > 1)):
        raise ValueError("points must lie in [0, 1]^n")
    bases = [bernstein_basis(grid.m, pts[:, i]) for i in range(grid.n)]
    out = _contract(grid.values, bases)
    return float(out[0]) if scalar else out.reshape(shape)


def eval_density_bernstein(gamma: GammaTensor, u):
    """``c_B(u) = sum_nu gamma(nu) prod_i m G_{nu_i:m-1}(u_i)``."""
    pts, scalar, shape = _points(u, gamma.n)
    m = gamma.m
    bases = [m * bernstein_basis(m - 1, pts[:, i]) for i in range(gamma.n)]
    out = _contract(gamma.weights, bases)
    return float(out[0]) if scalar else out.reshape(shape)
