"""Lattice samplings of copulas used as Bernstein coefficients.

An :class:`AlphaGrid` stores ``alpha(nu_1/m, ..., nu_n/m)`` for every
``nu_i in {0, ..., m}``. The built-in families are the independence copula,
both Frechet bounds, FGM, Clayton, a piecewise (glued) Gaussian copula and the
asymmetric two-Clayton construction of Liebscher.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .normal import bivariate_normal_cdf

__all__ = [
    "AlphaGrid",
    "ValidationReport",
    "Violation",
    "FAMILIES",
    "make_alpha",
    "alpha_function",
    "validate_alpha",
    "read_alpha_csv",
    "write_alpha_csv",
]

MASS_TOL = 1e-12
BOUNDARY_TOL = 1e-12

LIEBSCHER_DEFAULTS = {"gamma": 6.0, "delta": 2.0, "theta1": 0.525, "theta2": 0.3}
PIECEWISE_GAUSSIAN_DEFAULTS = {"tau": 0.5, "r1": -0.95, "r2": 0.95}


@dataclass(frozen=True)
class AlphaGrid:
    """Copula values on the regular lattice ``{0, 1/m, ..., 1}^n``.

    Attributes
    ----------
    n : int
        Dimension.
    m : int
        Bernstein order shared by every coordinate.
    values : ndarray of shape ``(m + 1,) * n``
        ``values[nu] = alpha(nu / m)``. Stored read-only.
    """

    n: int
    m: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if self.n < 2:
            raise ValueError(f"dimension must be >= 2, got {self.n}")
        if self.m < 1:
            raise ValueError(f"order must be >= 1, got {self.m}")
        if values.shape != (self.m + 1,) * self.n:
            raise ValueError(
                f"values shape {values.shape} inconsistent with n={self.n}, m={self.m}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_value(self, index, value):
        """Return a copy with a single lattice value replaced."""
        values = self.values.copy()
        values[tuple(index)] = value
        return AlphaGrid(self.n, self.m, values)

    def mass(self):
        """Copula mass of every lattice cell (alternating finite differences)."""
        d = self.values
        for axis in range(self.n):
            d = np.diff(d, axis=axis)
        return d


@dataclass(frozen=True)
class Violation:
    condition: str
    index: tuple
    value: float


@dataclass
class ValidationReport:
    """Outcome of :func:`validate_alpha`; valid iff no violations."""

    violations: list = field(default_factory=list)

    @property
    def is_valid(self):
        return not self.violations

    def lines(self):
        return [
            f"{v.condition} at {v.index}: {v.value:.17g}" for v in self.violations
        ]


# --------------------------------------------------------------------------
# families

def _independence(u):
    return np.prod(u, axis=-1)


def _comonotonic(u):
    return np.min(u, axis=-1)


def _counter_comonotonic(u):
    return np.maximum(u[..., 0] + u[..., 1] - 1.0, 0.0)


def _fgm(u, delta):
    a, b = u[..., 0], u[..., 1]
    return a * b + delta * a * b * (1.0 - a) * (1.0 - b)


def _clayton(u, theta):
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape[:-1])
    pos = np.all(u > 0, axis=-1)
    s = np.sum(u[pos] ** (-theta), axis=-1) - u.shape[-1] + 1.0
    out[pos] = s ** (-1.0 / theta)
    return out


def _gaussian_copula(a, b, r):
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    # exact boundary values; ndtri(0) and ndtri(1) are infinite
    out = np.zeros(a.shape)
    out = np.where(a >= 1.0, b, out)
    out = np.where(b >= 1.0, a, out)
    inner = (a > 0) & (a < 1) & (b > 0) & (b < 1)
    if np.any(inner):
        out = np.array(out, dtype=float)
        out[inner] = bivariate_normal_cdf(ndtri(a[inner]), ndtri(b[inner]), r)
    return out


def _piecewise_gaussian(u, tau, r1, r2):
    u1, u2 = u[..., 0], u[..., 1]
    left = u1 <= tau
    out = np.empty(u1.shape)
    out[left] = tau * _gaussian_copula(u1[left] / tau, u2[left], r1)
    right = ~left
    out[right] = tau * u2[right] + (1.0 - tau) * _gaussian_copula(
        (u1[right] - tau) / (1.0 - tau), u2[right], r2
    )
    return out


def _liebscher_clayton(u, gamma, delta, theta1, theta2):
    u1, u2 = u[..., 0], u[..., 1]
    out = np.zeros(u1.shape)
    pos = (u1 > 0) & (u2 > 0)
    a, b = u1[pos], u2[pos]
    first = (1.0 + (a ** (-gamma * theta1) - 1.0) + (b ** (-gamma * theta2) - 1.0)) ** (
        -1.0 / gamma
    )
    second = (
        1.0
        + (a ** (-delta * (1.0 - theta1)) - 1.0)
        + (b ** (-delta * (1.0 - theta2)) - 1.0)
    ) ** (-1.0 / delta)
    out[pos] = first * second
    return out


def _check_fgm(n, p):
    if n != 2:
        raise ValueError("fgm family is bivariate")
    if not -1.0 <= p["delta"] <= 1.0:
        raise ValueError(f"fgm requires delta in [-1, 1], got {p['delta']}")


def _check_clayton(n, p):
    if not p["theta"] > 0:
        raise ValueError(f"clayton requires theta > 0, got {p['theta']}")


def _check_counter(n, p):
    if n != 2:
        raise ValueError(
            "counter_comonotonic requires n = 2: the lower Frechet bound "
            "max(sum u - n + 1, 0) is not a copula for n > 2"
        )


def _check_pg(n, p):
    if n != 2:
        raise ValueError("piecewise_gaussian family is bivariate")
    if not 0.0 < p["tau"] < 1.0:
        raise ValueError(f"piecewise_gaussian requires tau in (0, 1), got {p['tau']}")
    for key in ("r1", "r2"):
        if not -1.0 < p[key] < 1.0:
            raise ValueError(f"piecewise_gaussian requires {key} in (-1, 1), got {p[key]}")


def _check_liebscher(n, p):
    if n != 2:
        raise ValueError("liebscher_clayton family is bivariate")
    if not (p["gamma"] > 0 and p["delta"] > 0):
        raise ValueError("liebscher_clayton requires gamma > 0 and delta > 0")
    for key in ("theta1", "theta2"):
        if not 0.0 <= p[key] <= 1.0:
            raise ValueError(f"liebscher_clayton requires {key} in [0, 1], got {p[key]}")


def _noop(n, p):
    pass


# name -> (function, default parameters, validator)
FAMILIES = {
    "independence": (_independence, {}, _noop),
    "comonotonic": (_comonotonic, {}, _noop),
    "counter_comonotonic": (_counter_comonotonic, {}, _check_counter),
    "fgm": (_fgm, {"delta": None}, _check_fgm),
    "clayton": (_clayton, {"theta": None}, _check_clayton),
    "piecewise_gaussian": (_piecewise_gaussian, PIECEWISE_GAUSSIAN_DEFAULTS, _check_pg),
    "liebscher_clayton": (_liebscher_clayton, LIEBSCHER_DEFAULTS, _check_liebscher),
}


def _resolve(kind, params, n):
    if kind not in FAMILIES:
        raise ValueError(f"unknown alpha family {kind!r}; choose from {sorted(FAMILIES)}")
    func, defaults, check = FAMILIES[kind]
    params = dict(params or {})
    unknown = set(params) - set(defaults)
    if unknown:
        raise ValueError(f"unknown parameters for {kind}: {sorted(unknown)}")
    resolved = {**defaults, **{k: float(v) for k, v in params.items()}}
    missing = [k for k, v in resolved.items() if v is None]
    if missing:
        raise ValueError(f"{kind} requires parameters {missing}")
    check(n, resolved)
    return func, resolved


def alpha_function(kind, params=None, n=2):
    """Vectorised copula function ``u[..., n] -> alpha(u)`` for a family."""
    func, resolved = _resolve(kind, params, n)

    def alpha(u):
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != n:
            raise ValueError(f"points must have trailing dimension {n}")
        return func(u, **resolved)

    return alpha


def make_alpha(kind, params=None, m=5, n=2):
    """Sample a built-in copula on the order-``m`` lattice.

    Parameters
    ----------
    kind : str
        One of :data:`FAMILIES`.
    params : dict, optional
        Family parameters (``delta`` for fgm, ``theta`` for clayton,
        ``tau, r1, r2`` for piecewise_gaussian, ``gamma, delta, theta1,
        theta2`` for liebscher_clayton). Missing optional values take the
        documented defaults.
    m : int
        Bernstein order.
    n : int
        Dimension.
    """
    m, n = int(m), int(n)
    if m < 1:
        raise ValueError(f"order must be >= 1, got {m}")
    if n < 2:
        raise ValueError(f"dimension must be >= 2, got {n}")
    alpha = alpha_function(kind, params, n)
    ticks = np.arange(m + 1) / m
    mesh = np.stack(np.meshgrid(*([ticks] * n), indexing="ij"), axis=-1)
    values = alpha(mesh)
    # enforce the exact lattice boundary: grounded faces and uniform margins
    for axis in range(n):
        idx = [slice(None)] * n
        idx[axis] = 0
        values[tuple(idx)] = 0.0
        idx = [m] * n
        idx[axis] = slice(None)
        values[tuple(idx)] = ticks
    return AlphaGrid(n, m, values)


def validate_alpha(grid):
    """Check grounded faces, uniform margins and n-increasingness exhaustively.

    Returns a :class:`ValidationReport` listing every violating lattice
    index. Alternating differences down to ``-1e-12`` count as nonnegative.
    """
    report = ValidationReport()
    n, m, values = grid.n, grid.m, grid.values

    for index in itertools.product(range(m + 1), repeat=n):
        v = values[index]
        if 0 in index and abs(v) > BOUNDARY_TOL:
            report.violations.append(Violation("boundary_zero", index, float(v)))
        others = [i for i in index if i != m]
        if 0 not in index and len(others) <= 1:
            target = (others[0] if others else m) / m
            if abs(v - target) > BOUNDARY_TOL:
                report.violations.append(Violation("uniform_margin", index, float(v)))

    mass = grid.mass()
    for index in zip(*np.nonzero(mass < -MASS_TOL)):
        index = tuple(int(i) for i in index)
        report.violations.append(Violation("n_increasing", index, float(mass[index])))
    return report


# --------------------------------------------------------------------------
# CSV lattice format: first row "n,m", then "nu_1,...,nu_n,value"

def write_lattice_csv(path_or_buffer, n, m, array):
    """Write an ``(m+1)^n`` or ``m^n`` lattice tensor in the CSV lattice format."""
    own = isinstance(path_or_buffer, (str, Path))
    fh = open(path_or_buffer, "w", newline="") if own else path_or_buffer
    try:
        writer = csv.writer(fh)
        writer.writerow([n, m])
        for index in itertools.product(*(range(s) for s in array.shape)):
            writer.writerow([*index, repr(float(array[index]))])
    finally:
        if own:
            fh.close()


def write_alpha_csv(grid, path_or_buffer):
    write_lattice_csv(path_or_buffer, grid.n, grid.m, grid.values)


def read_alpha_csv(path_or_buffer):
    """Read an :class:`AlphaGrid` written by :func:`write_alpha_csv`.

    Lattice points absent from the file raise ``ValueError``.
    """
    if isinstance(path_or_buffer, (str, Path)):
        text = Path(path_or_buffer).read_text()
    else:
        text = path_or_buffer.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError("empty alpha CSV")
    try:
        n, m = (int(c) for c in rows[0][:2])
    except ValueError:
        raise ValueError(f"malformed header row {rows[0]!r}; expected 'n,m'") from None
    values = np.full((m + 1,) * n, np.nan)
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != n + 1:
            raise ValueError(f"line {line}: expected {n + 1} fields, got {len(row)}")
        index = tuple(int(c) for c in row[:n])
        if any(not 0 <= i <= m for i in index):
            raise ValueError(f"line {line}: index {index} outside 0..{m}")
        values[index] = float(row[n])
    if np.isnan(values).any():
        missing = tuple(int(i) for i in np.argwhere(np.isnan(values))[0])
        raise ValueError(f"alpha CSV is missing lattice point {missing}")
    return AlphaGrid(n, m, values)
