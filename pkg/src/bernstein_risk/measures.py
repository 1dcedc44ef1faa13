"""Tail risk measures, capital allocation and dependence summaries.

TVaR and the per-risk contributions follow from conditioning on the total
count ``T``: given ``T = l`` the latent sum is Gamma(l, m), and the size-biased
Gamma identity ``E[G 1{G > c}] = l P(G_{l+1} > c)`` turns
``E[S 1{S > v}]`` into

    sum_{nu >= 1} P_nu m^(nu-1) v^nu / nu! |f*^(nu-1)(m v)|  +  n int_{m v}^inf f*

with ``P_nu = sum_{l >= max(nu, n)} l A_l``. The contribution of risk ``i``
replaces ``P_nu`` by its size-biased joint-count analogue and ``n`` by 1.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln, roots_legendre

from .aggregate import AggregateModel, var
from .bernstein import BetaTensor, GammaTensor, eval_copula_bernstein
from .counts import allocation_weights, joint_count_pmf, tvar_weights
from .mixing import GammaClaims, GammaMixing, MixingFamily

__all__ = [
    "RiskReport",
    "tvar",
    "tvar_contribution",
    "truncation_bound",
    "risk_report",
    "joint_survival",
    "joint_survival_mixture",
    "mixed_copula",
    "spearman_rho",
    "write_reports_csv",
]

ADDITIVITY_RTOL = 1e-8
RHO_TOL = 1e-7
RHO_MAX_NODES = 1024


@dataclass(frozen=True)
class RiskReport:
    """VaR, TVaR and TVaR-based allocation at one level ``kappa``."""

    kappa: float
    var: float
    tvar: float
    contributions: np.ndarray = field(repr=False)
    truncation_bound: float = 0.0
    stderr: dict = field(default=None, repr=False)

    def __post_init__(self):
        if self.tvar < self.var * (1 - 1e-12):
            raise ValueError(f"tvar {self.tvar} below var {self.var}")

    @property
    def n(self):
        return len(self.contributions)

    def additivity_gap(self):
        """Relative gap ``|sum contributions - tvar| / tvar``."""
        return abs(float(np.sum(self.contributions)) - self.tvar) / self.tvar

    def row(self):
        return [self.kappa, self.var, self.tvar, *map(float, self.contributions), self.truncation_bound]

    def header(self):
        return ["kappa", "var", "tvar", *[f"contrib_{i + 1}" for i in range(self.n)], "truncation_bound"]


def write_reports_csv(reports, path_or_buffer=None):
    """Write reports as ``kappa,var,tvar,contrib_1..n,truncation_bound``.

    Returns the CSV text when no destination is given.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to write")
    buffer = io.StringIO() if path_or_buffer is None else None
    handle = buffer if buffer is not None else path_or_buffer
    close = False
    if isinstance(handle, (str, bytes)) or hasattr(handle, "__fspath__"):
        handle = open(handle, "w", newline="")
        close = True
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(reports[0].header())
        for report in reports:
            writer.writerow([repr(float(v)) for v in report.row()])
    finally:
        if close:
            handle.close()
    return buffer.getvalue() if buffer is not None else None


def _tail_integral(mixing: MixingFamily, y):
    """``int_y^inf f*(t) dt``: closed form when the family provides one."""
    try:
        return float(mixing.tail_integral(y))
    except NotImplementedError:
        pass

    # t = y + s / (1 - s) maps (0, 1) onto (y, inf)
    def integrand(s):
        return float(mixing.laplace(y + s / (1.0 - s))) / (1.0 - s) ** 2

    value, _ = integrate.quad(integrand, 0.0, 1.0, limit=200, epsabs=0.0, epsrel=1e-12)
    return value


def _series(weights, mixing, m, v):
    """``sum_{nu >= 1} w_nu m^(nu-1) v^nu / nu! |f*^(nu-1)(m v)|`` in log space."""
    L = len(weights) - 1
    if L < 1:
        return 0.0
    nu = np.arange(1, L + 1)
    logd = mixing.log_abs_derivs(L - 1, m * v)
    logt = (nu - 1) * math.log(m) + nu * math.log(v) - gammaln(nu + 1) + logd
    w = np.asarray(weights[1:], dtype=float)
    assert np.all(w >= 0), "negative TVaR weight"
    with np.errstate(divide="ignore"):
        return float(np.exp(np.log(w) + logt).sum())


def _check_level(kappa):
    kappa = float(kappa)
    if not 0 < kappa < 1:
        raise ValueError(f"level must lie in (0, 1), got {kappa}")
    return kappa


def tvar(model: AggregateModel, weights=None, kappa=0.95, value_at_risk=None):
    """Tail value at risk ``E[S | S > VaR_kappa]``.

    Parameters
    ----------
    model : AggregateModel
    weights : array, optional
        ``P_nu`` from :func:`~bernstein_risk.counts.tvar_weights`; computed
        from ``model.counts`` when omitted.
    kappa : float
        Level in (0, 1).
    value_at_risk : float, optional
        Precomputed ``var(model, kappa)``.
    """
    kappa = _check_level(kappa)
    if weights is None:
        weights = tvar_weights(model.counts)
    v = var(model, kappa) if value_at_risk is None else float(value_at_risk)
    m = model.m
    tail = model.n * _tail_integral(model.mixing, m * v)
    return (_series(weights, model.mixing, m, v) + tail) / (1.0 - kappa)


def tvar_contribution(model: AggregateModel, weights, i, kappa=0.95, value_at_risk=None):
    """TVaR-based contribution ``E[X_i | S > VaR_kappa]`` of risk ``i`` (0-based).

    ``weights`` are ``P^(i)_nu`` from
    :func:`~bernstein_risk.counts.allocation_weights`, aligned to the
    model's truncation.
    """
    kappa = _check_level(kappa)
    if not 0 <= i < model.n:
        raise ValueError(f"risk index must be in 0..{model.n - 1}, got {i}")
    v = var(model, kappa) if value_at_risk is None else float(value_at_risk)
    m = model.m
    tail = _tail_integral(model.mixing, m * v)
    return (_series(weights, model.mixing, m, v) + tail) / (1.0 - kappa)


def truncation_bound(model: AggregateModel, kappa):
    """Conservative bound on the error that truncating ``T`` at ``L_cap`` causes.

    The survival/VaR error is at most ``tail_mass``. The neglected part of
    ``E[S 1{S > v}]`` is at most ``E[T 1{T > L}] E[1/Theta] / m``, and
    ``E[T] = m n`` exactly gives ``E[T 1{T > L}]`` without summing the tail.
    """
    counts = model.counts
    residual = max(counts.m * counts.n - counts.mean(), 0.0)
    # the subtraction itself is only good to a few ulps of m n
    residual = max(residual, 8 * np.finfo(float).eps * counts.m * counts.n)
    try:
        mean = model.mixing.mean()
    except ValueError:
        mean = math.inf
    return max(counts.tail_mass, residual / counts.m * mean / (1.0 - kappa))


def risk_report(model: AggregateModel, gamma: GammaTensor = None, kappa=0.95, joints=None):
    """VaR, TVaR, all n contributions and the truncation bound at ``kappa``.

    The contributions are only computed when ``gamma`` (or precomputed
    ``joints``) is given; otherwise they are filled by exchangeability
    (``tvar / n``), which is exact only for exchangeable models.
    """
    kappa = _check_level(kappa)
    v = var(model, kappa)
    total = tvar(model, kappa=kappa, value_at_risk=v)
    n = model.n
    if joints is None and gamma is not None:
        joints = [
            joint_count_pmf(gamma, i, L_start=model.counts.L_cap)
            for i in range(n)
        ]
    if joints is None:
        contributions = np.full(n, total / n)
    else:
        contributions = np.array(
            [
                tvar_contribution(
                    model,
                    allocation_weights(joint, L_cap=model.counts.L_cap),
                    i,
                    kappa,
                    value_at_risk=v,
                )
                for i, joint in enumerate(joints)
            ]
        )
    return RiskReport(kappa, v, total, contributions, truncation_bound(model, kappa))


def _exponent_grid(m, n):
    # l-vectors of the beta tensor, shape (m+1,)*n + (n,)
    axes = np.meshgrid(*([np.arange(m + 1)] * n), indexing="ij")
    return np.stack(axes, axis=-1).astype(float)


def joint_survival(beta: BetaTensor, mixing: MixingFamily, x):
    """``P(X > x) = sum_l beta_l f*(sum_i l_i x_i)``.

    ``x`` is one point ``(n,)`` or points ``(..., n)``. Accuracy degrades by
    the factor ``beta.condition`` (see :func:`joint_survival_mixture` for a
    cancellation-free alternative).
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[-1] != beta.n:
        raise ValueError(f"points must have trailing dimension {beta.n}")
    if np.any(pts < 0):
        raise ValueError("joint survival needs x >= 0")
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, beta.n)
    ells = _exponent_grid(beta.m, beta.n).reshape(-1, beta.n)
    coeffs = np.asarray(beta.coeffs).ravel()
    keep = coeffs != 0
    args = pts @ ells[keep].T
    out = mixing.laplace(args) @ coeffs[keep]
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out.reshape(shape)


def _theta_expectation(mixing, func):
    """``E[func(Theta)]`` by adaptive quadrature over the mixing law."""
    if isinstance(mixing, GammaMixing):
        law = stats.gamma(mixing.a, scale=1.0 / mixing.b)
        lo, hi = 0.0, np.inf
        def integrand(t):
            return func(t) * law.pdf(t)
    elif isinstance(mixing, GammaClaims):
        if mixing.a == 1.0:
            return func(mixing.lam)
        law = stats.beta(mixing.a, 1.0 - mixing.a)
        lo, hi = 0.0, 1.0
        def integrand(v):
            return func(mixing.lam / v) * law.pdf(v) if v > 0 else 0.0
    else:
        raise TypeError(f"no mixing density available for {type(mixing).__name__}")
    value, _ = integrate.quad(integrand, lo, hi, limit=400, epsabs=1e-14, epsrel=1e-12)
    return value


def joint_survival_mixture(grid, mixing: MixingFamily, x):
    """``P(X > x)`` as ``E[C_B(exp(-Theta x_1), ..., exp(-Theta x_n))]``.

    Every quantity under the integral is a nonnegative Bernstein sum, so
    this has no cancellation at any order ``m``; it costs one adaptive
    quadrature per point.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != grid.n:
        raise ValueError(f"need a single point of dimension {grid.n}")
    if np.any(x < 0):
        raise ValueError("joint survival needs x >= 0")
    return _theta_expectation(mixing, lambda t: eval_copula_bernstein(grid, np.exp(-t * x)))


def mixed_copula(beta: BetaTensor, mixing: MixingFamily, u):
    """``C(u) = sum_l beta_l f*(sum_i l_i f*^{-1}(u_i))``; 0 if any ``u_i = 0``."""
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 1
    pts = np.atleast_2d(u)
    if pts.shape[-1] != beta.n:
        raise ValueError(f"points must have trailing dimension {beta.n}")
    if np.any((pts < 0) | (pts > 1)):
        raise ValueError("copula arguments must lie in [0, 1]")
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, beta.n)
    zero = np.any(pts == 0, axis=1)
    out = np.zeros(len(pts))
    if np.any(~zero):
        x = np.asarray(mixing.inv(pts[~zero]), dtype=float).reshape(-1, beta.n)
        out[~zero] = joint_survival(beta, mixing, x)
    return float(out[0]) if scalar else out.reshape(shape)


def _rho_at(beta, mixing, order):
    nodes, wts = roots_legendre(order)
    u = 0.5 * (nodes + 1.0)
    w = 0.5 * wts
    x = np.asarray(mixing.inv(u), dtype=float)
    ells = np.arange(beta.m + 1, dtype=float)
    # f*(l1 x1 + l2 x2) for every node pair and exponent pair: sum over l2 first
    coeffs = np.asarray(beta.coeffs)
    total = 0.0
    lx = np.outer(x, ells)  # (order, m+1)
    for l1 in range(beta.m + 1):
        row = coeffs[l1]
        if not np.any(row):
            continue
        args = lx[:, l1][:, None, None] + lx[None, :, :]  # (order, order, m+1)
        vals = mixing.laplace(args) @ row
        total += w @ vals @ w
    return 12.0 * total - 3.0


def spearman_rho(beta: BetaTensor, mixing: MixingFamily, tol=RHO_TOL, start=32):
    """Spearman's rho ``12 int int C - 3`` by tensor Gauss-Legendre quadrature.

    The order doubles from ``start`` until two successive values agree to
    ``tol``.
    """
    if beta.n != 2:
        raise ValueError(f"Spearman's rho is defined here for n = 2, got n = {beta.n}")
    order = start
    prev = _rho_at(beta, mixing, order)
    while order < RHO_MAX_NODES:
        order *= 2
        cur = _rho_at(beta, mixing, order)
        if abs(cur - prev) <= tol:
            return float(cur)
        prev = cur
    raise RuntimeError(
        f"Spearman's rho quadrature did not settle to {tol:g} with {RHO_MAX_NODES} nodes"
    )
