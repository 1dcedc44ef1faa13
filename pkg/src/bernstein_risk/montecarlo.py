"""Monte Carlo simulation of the mixed Bernstein model.

Each path draws lattice indices ``nu`` from the gamma pmf, latent
exponential-margin variables ``Z_i`` given ``nu_i``, one mixing variable
``Theta`` and returns ``X_i = Z_i / Theta``.

Given ``nu_i`` the latent ``Z_i`` is the ``(m - nu_i)``-th smallest of ``m``
standard exponentials. Two exact samplers are provided:

``"spacings"``
    ``Z = sum_{j=1}^{m-nu} Q_j / (m - j + 1)`` with iid Exp(1) ``Q_j``
    drawn by inversion (Renyi's representation of exponential spacings).
``"beta"``
    ``Z = -log(1 - U_(k))`` with the uniform order statistic
    ``U_(k) ~ Beta(k, m - k + 1)``; one draw per coordinate.

Paths are generated in fixed-size chunks, each with its own substream
spawned from ``SeedSequence(seed)``, so a batch depends only on
``(seed, paths, method)`` and never on the number of worker threads.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .bernstein import GammaTensor
from .measures import RiskReport
from .mixing import MixingFamily

__all__ = [
    "SimulationBatch",
    "sample_batch",
    "empirical_measures",
    "write_batch_csv",
    "check_theta_sampler",
    "default_workers",
    "InsufficientDataError",
    "CHUNK",
]

CHUNK = 1 << 16
MIN_PATHS = 1000
MIN_EXCEEDANCES = 50
THREADS_ENV = "BERNSTEIN_RISK_THREADS"


class InsufficientDataError(ValueError):
    """Too few paths or exceedances for a reliable empirical estimate."""


@dataclass(frozen=True)
class SimulationBatch:
    """Simulated losses, one row per path; ``sums`` is the row total."""

    seed: int
    losses: np.ndarray = field(repr=False)
    sums: np.ndarray = field(repr=False)

    @property
    def paths(self):
        return self.losses.shape[0]

    @property
    def n(self):
        return self.losses.shape[1]


def default_workers():
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {value!r}") from None
    return 1


def _cell_table(gamma: GammaTensor):
    w = np.asarray(gamma.weights, dtype=float).ravel()
    if np.any(w < -1e-12) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("gamma weights do not form a pmf")
    cdf = np.cumsum(np.clip(w, 0.0, None))
    cdf /= cdf[-1]
    return cdf


def _latent_spacings(rng, k, m):
    # k: (size, n) number of spacings per coordinate, 0..m
    j = np.arange(1, m + 1)
    q = -np.log1p(-rng.random(k.shape + (m,)))
    q /= (m - j + 1)
    q[j > k[..., None]] = 0.0
    return q.sum(axis=-1)


def _latent_beta(rng, k, m):
    out = np.zeros(k.shape)
    pos = k > 0
    u = rng.beta(k[pos], m - k[pos] + 1)
    out[pos] = -np.log1p(-u)
    return out


_SAMPLERS = {"spacings": _latent_spacings, "beta": _latent_beta}


def _chunk(seed_seq, size, cdf, gamma, mixing, sampler):
    rng = np.random.default_rng(seed_seq)
    n, m = gamma.n, gamma.m
    cells = np.searchsorted(cdf, rng.random(size), side="right")
    cells = np.minimum(cells, len(cdf) - 1)
    nu = np.stack(np.unravel_index(cells, (m,) * n), axis=-1)
    z = sampler(rng, m - nu, m)
    theta = np.asarray(mixing.sample(rng, size=size), dtype=float)
    return z / theta[:, None]


def sample_batch(gamma: GammaTensor, mixing: MixingFamily, paths, seed=0,
                 workers=None, method="spacings"):
    """Simulate ``paths`` loss vectors.

    Parameters
    ----------
    gamma : GammaTensor
        Cell masses of the Bernstein copula.
    mixing : MixingFamily
    paths : int
    seed : int
        Root of the ``SeedSequence``; chunk ``c`` uses its ``c``-th child.
    workers : int, optional
        Threads; defaults to ``$BERNSTEIN_RISK_THREADS`` or 1. The result
        does not depend on this value.
    method : {"spacings", "beta"}
    """
    paths = int(paths)
    if paths < 1:
        raise ValueError("need at least one path")
    if method not in _SAMPLERS:
        raise ValueError(f"unknown sampler {method!r}; choose from {sorted(_SAMPLERS)}")
    workers = default_workers() if workers is None else max(1, int(workers))
    cdf = _cell_table(gamma)
    sizes = [CHUNK] * (paths // CHUNK) + ([paths % CHUNK] if paths % CHUNK else [])
    children = np.random.SeedSequence(int(seed)).spawn(len(sizes))
    sampler = _SAMPLERS[method]

    def run(c):
        return _chunk(children[c], sizes[c], cdf, gamma, mixing, sampler)

    if workers == 1:
        parts = [run(c) for c in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    losses = np.concatenate(parts, axis=0)
    sums = losses.sum(axis=1)
    losses.setflags(write=False)
    sums.setflags(write=False)
    return SimulationBatch(int(seed), losses, sums)


def empirical_measures(batch: SimulationBatch, kappa, confidence=0.95):
    """Empirical VaR, TVaR and contributions with standard errors.

    VaR is the order statistic at ``ceil(kappa * paths)``; its standard
    error comes from the distribution-free order-statistic confidence
    interval (half-width divided by the normal quantile). TVaR and the
    contributions are means over the paths with ``S > VaR``, with the usual
    standard error of a mean. ``stderr`` maps ``"var"``, ``"tvar"`` and
    ``"contributions"`` to these.
    """
    kappa = float(kappa)
    if not 0 < kappa < 1:
        raise ValueError(f"level must lie in (0, 1), got {kappa}")
    P = batch.paths
    if P < MIN_PATHS:
        raise InsufficientDataError(f"{P} paths < {MIN_PATHS} required")
    order = np.argsort(batch.sums, kind="stable")
    sorted_sums = batch.sums[order]
    k = math.ceil(kappa * P)
    v = float(sorted_sums[k - 1])
    exceed = order[k:]
    exceed = exceed[batch.sums[exceed] > v]
    if len(exceed) < MIN_EXCEEDANCES:
        raise InsufficientDataError(
            f"only {len(exceed)} exceedances of VaR; need {MIN_EXCEEDANCES}"
        )
    s_exc = batch.sums[exceed]
    x_exc = batch.losses[exceed]
    tv = float(s_exc.mean())
    contrib = x_exc.mean(axis=0)

    z = norm.ppf(0.5 + confidence / 2)
    half = z * math.sqrt(P * kappa * (1 - kappa))
    lo = int(max(math.floor(k - half), 1))
    hi = int(min(math.ceil(k + half), P))
    var_se = float(sorted_sums[hi - 1] - sorted_sums[lo - 1]) / (2 * z)
    count = len(exceed)
    stderr = {
        "var": var_se,
        "tvar": float(s_exc.std(ddof=1)) / math.sqrt(count),
        "contributions": x_exc.std(axis=0, ddof=1) / math.sqrt(count),
    }
    return RiskReport(kappa, v, tv, contrib, truncation_bound=0.0, stderr=stderr)


def write_batch_csv(batch: SimulationBatch, path):
    """Write ``x_1,...,x_n,sum`` rows."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([f"x_{i + 1}" for i in range(batch.n)] + ["sum"])
        for row, total in zip(batch.losses, batch.sums):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(total))])


def check_theta_sampler(mixing: MixingFamily, paths=200_000, seed=0, points=(0.5, 1.0, 2.0, 5.0),
                        scale=None):
    """Largest z-score of ``mean(exp(-s Theta))`` against ``f*(s)``.

    ``points`` are multiples of ``scale`` (default: the marginal median,
    ``f*^{-1}(1/2)``), so the check probes the transform where it varies.
    A sampler is accepted when the returned value is at most 3.
    """
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    theta = np.asarray(mixing.sample(rng, size=int(paths)), dtype=float)
    scale = float(mixing.inv(0.5)) if scale is None else float(scale)
    worst = 0.0
    for p in points:
        s = p * scale
        draws = np.exp(-s * theta)
        se = draws.std(ddof=1) / math.sqrt(len(draws))
        exact = float(mixing.laplace(s))
        if se <= 1e-12 * exact:
            # degenerate Theta: the sample mean must equal the transform
            z = 0.0 if math.isclose(draws.mean(), exact, rel_tol=1e-12) else math.inf
        else:
            z = abs(draws.mean() - exact) / se
        worst = max(worst, z)
    return worst
