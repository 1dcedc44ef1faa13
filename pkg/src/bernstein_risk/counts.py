"""Discrete count distributions behind the closed-form risk formulas.

Given lattice indices ``N`` drawn from the gamma pmf, each risk carries the
count ``T_i = sum_{j=N_i+1}^m Delta_{i,j}`` with independent shifted
geometrics ``Delta_{i,j} ~ Geom(j/m)`` on ``{1, 2, ...}``. The aggregate
density, survival function, TVaR and allocations are all mixtures indexed
by ``T = sum_i T_i`` (or by the pair ``(T_i, T - T_i)``).

Adding one shifted geometric to a pmf ``P`` is the recurrence
``Q[k] = p P[k-1] + (1-p) Q[k-1]``, so every conditional pmf is built with
exact nonnegative arithmetic and a truncation at ``L`` never pollutes the
retained entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import lfilter

from .bernstein import GammaTensor

__all__ = [
    "CountPmf",
    "JointCountPmf",
    "TruncationError",
    "conditional_count_pmf",
    "total_count_pmf",
    "tail_sums",
    "tvar_weights",
    "joint_count_pmf",
    "allocation_weights",
]

EPS_TAIL = 1e-12
NEGATIVE_FLOOR = 1e-12


class TruncationError(RuntimeError):
    """The requested tail mass cannot be reached below the hard cap."""


@dataclass(frozen=True)
class CountPmf:
    """Truncated pmf of the total count ``T``.

    ``probs[l]`` is ``P(T = l)`` for ``l = 0..L_cap``; entries below ``n``
    are zero. ``tail_mass = P(T > L_cap)``.
    """

    n: int
    m: int
    probs: np.ndarray = field(repr=False)
    tail_mass: float

    @property
    def L_cap(self):
        return len(self.probs) - 1

    def mean(self):
        return float(np.dot(np.arange(len(self.probs)), self.probs))


@dataclass(frozen=True)
class JointCountPmf:
    """Truncated joint pmf of ``(T_i, T - T_i)`` for one risk ``i`` (0-based).

    ``probs[k, l] = q_{k,l}`` for ``k, l = 0..L_cap``. Only pairs with
    ``k + l <= L_cap`` are used downstream, which keeps the diagonal sums
    identical to the total-count pmf.
    """

    n: int
    m: int
    risk: int
    probs: np.ndarray = field(repr=False)
    tail_mass: float

    @property
    def L_cap(self):
        return self.probs.shape[0] - 1

    def diagonal(self, weight_by_k=False):
        """``sum_{k+l=r} (k *) q_{k,l}`` for ``r = 0..L_cap``."""
        size = self.probs.shape[0]
        k = np.arange(size)
        q = self.probs * k[:, None] if weight_by_k else self.probs
        r = k[:, None] + k[None, :]
        keep = r < size
        return np.bincount(r[keep], weights=q[keep], minlength=size)

    def other_marginal(self):
        return self.probs.sum(axis=0)


def _add_geometric(pmf, p):
    return lfilter([0.0, p], [1.0, -(1.0 - p)], pmf)


@lru_cache(maxsize=256)
def _conditional(m, nu, L):
    pmf = np.zeros(L + 1)
    pmf[0] = 1.0
    for j in range(nu + 1, m + 1):
        pmf = _add_geometric(pmf, j / m)
    pmf.setflags(write=False)
    return pmf


def conditional_count_pmf(m, nu, L_cap):
    """Pmf of ``sum_{j=nu+1}^m Delta_j`` on ``0..L_cap`` (truncated).

    The truncated mass is ``1 - pmf.sum()``.
    """
    if not 0 <= nu <= m - 1:
        raise ValueError(f"conditioning value must be in 0..{m - 1}, got {nu}")
    return _conditional(int(m), int(nu), int(L_cap))


def _mix(weights, m, L):
    """``sum_nu weights[nu] * conv_i(pmf_{nu_i})`` over all remaining axes.

    Uses the nesting ``sum_v c_v * R_v = G_m(R_{m-1} + G_{m-1}(... + G_1(R_0)))``
    where ``c_v = G_{v+1} * ... * G_m``, so each axis costs ``O(m L)``.
    """
    if np.ndim(weights) == 0:
        out = np.zeros(L + 1)
        out[0] = float(weights)
        return out
    acc = _add_geometric(_mix(weights[0], m, L), 1.0 / m)
    for j in range(2, m + 1):
        acc = _add_geometric(acc + _mix(weights[j - 1], m, L), j / m)
    return acc


def _clean_weights(gamma):
    w = np.asarray(gamma.weights, dtype=float)
    if w.min() < -NEGATIVE_FLOOR:
        raise ValueError(f"gamma weights contain {w.min():.3g} < 0; not a pmf")
    return np.where(w < 0, 0.0, w)


def _grow(build, gamma, eps_tail, L_start, hard_cap):
    n, m = gamma.n, gamma.m
    cap = hard_cap if hard_cap is not None else 20 * m * n
    L = min(max(L_start or 4 * m * n, 2 * n, 16), cap)
    while True:
        result = build(L)
        if result.tail_mass <= eps_tail:
            return result
        if L >= cap:
            raise TruncationError(
                f"tail mass {result.tail_mass:.3g} > {eps_tail:.3g} at the hard cap "
                f"L_cap={cap} (m={m}, n={n})"
            )
        L = min(2 * L, cap)


def total_count_pmf(gamma: GammaTensor, eps_tail=EPS_TAIL, L_start=None, hard_cap=None):
    """Pmf ``A_l`` of the total count, truncated so ``P(T > L_cap) <= eps_tail``.

    ``L_cap`` starts at ``4 m n`` and doubles up to the hard cap ``20 m n``.
    """
    weights = _clean_weights(gamma)

    def build(L):
        probs = _mix(weights, gamma.m, L)
        probs[: gamma.n] = 0.0
        tail = max(0.0, 1.0 - probs.sum())
        probs.setflags(write=False)
        return CountPmf(gamma.n, gamma.m, probs, tail)

    return _grow(build, gamma, eps_tail, L_start, hard_cap)


def tail_sums(count: CountPmf):
    """``B_i = P(T >= max(i + 1, n))`` for ``i = 0..L_cap``, tail mass included."""
    probs = count.probs
    L = count.L_cap
    # suffix[j] = sum_{l >= j} A_l over the retained support
    suffix = np.concatenate([np.cumsum(probs[::-1])[::-1], [0.0]])
    i = np.arange(L + 1)
    start = np.maximum(i + 1, count.n)
    return suffix[np.minimum(start, L + 1)] + count.tail_mass


def tvar_weights(count: CountPmf):
    """``P_nu = sum_{l >= max(nu, n)} l A_l`` for ``nu = 0..L_cap``."""
    moment = np.arange(count.L_cap + 1) * count.probs
    suffix = np.cumsum(moment[::-1])[::-1]
    nu = np.arange(count.L_cap + 1)
    return suffix[np.maximum(nu, count.n)]


def joint_count_pmf(gamma: GammaTensor, i, eps_tail=EPS_TAIL, L_start=None, hard_cap=None):
    """Joint pmf ``q_{k,l}`` of ``(T_i, T - T_i)`` for risk ``i`` (0-based)."""
    n, m = gamma.n, gamma.m
    if not 0 <= i < n:
        raise ValueError(f"risk index must be in 0..{n - 1}, got {i}")
    weights = np.moveaxis(_clean_weights(gamma), i, 0)

    def build(L):
        own = np.stack([conditional_count_pmf(m, v, L) for v in range(m)])
        rest = np.stack([_mix(weights[v], m, L) for v in range(m)])
        probs = own.T @ rest
        joint = JointCountPmf(n, m, i, probs, 0.0)
        tail = max(0.0, 1.0 - joint.diagonal().sum())
        probs.setflags(write=False)
        return JointCountPmf(n, m, i, probs, tail)

    return _grow(build, gamma, eps_tail, L_start, hard_cap)


def allocation_weights(joint: JointCountPmf, L_cap=None):
    """``P^(i)_nu = sum_{k+l >= max(nu, n)} k q_{k,l}`` for ``nu = 0..L_cap``.

    ``L_cap`` defaults to the joint pmf's own cap; a larger value pads with
    zeros so the weights align with a total-count pmf.
    """
    d = joint.diagonal(weight_by_k=True)
    suffix = np.cumsum(d[::-1])[::-1]
    nu = np.arange(joint.L_cap + 1)
    out = suffix[np.maximum(nu, joint.n)]
    if L_cap is not None and L_cap > joint.L_cap:
        out = np.concatenate([out, np.zeros(L_cap - joint.L_cap)])
    return out
