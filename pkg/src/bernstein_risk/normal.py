"""Standard bivariate normal distribution function.

Uses the single-integral reduction over the correlation parameter,

    Phi2(h, k; r) = Phi(h) Phi(k)
                    + 1/(2 pi) int_0^{asin r} exp(-(h^2 - 2hk sin t + k^2) / (2 cos^2 t)) dt,

evaluated with fixed-order Gauss-Legendre quadrature on two panels. The
arcsine substitution removes the 1/sqrt(1 - rho^2) endpoint singularity, so
the integrand stays smooth for |r| < 1.
"""

import numpy as np
from scipy.special import ndtr

__all__ = ["bivariate_normal_cdf"]

_ORDER = 64
_PANELS = 2
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(_ORDER)


def bivariate_normal_cdf(x, y, r):
    """P(A <= x, B <= y) for a standard bivariate normal with correlation r.

    Parameters
    ----------
    x, y : float or array_like
        Upper integration limits; may be +/- inf. Broadcast together.
    r : float
        Correlation, |r| < 1.

    Returns
    -------
    float or ndarray
        Probability, absolute error below 1e-14 for |r| <= 0.99.
    """
    r = float(r)
    if not abs(r) < 1.0:
        raise ValueError(f"correlation must satisfy |r| < 1, got {r}")
    h, k = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    out = ndtr(h) * ndtr(k)

    finite = np.isfinite(h) & np.isfinite(k)
    if r != 0.0 and np.any(finite):
        hf = h[finite][..., None]
        kf = k[finite][..., None]
        upper = np.arcsin(r)
        edges = np.linspace(0.0, upper, _PANELS + 1)
        total = np.zeros(hf.shape[:-1])
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            t = half * _NODES + 0.5 * (hi + lo)
            s = np.sin(t)
            c2 = np.cos(t) ** 2
            f = np.exp(-(hf * hf - 2.0 * hf * kf * s + kf * kf) / (2.0 * c2))
            total += half * (f @ _WEIGHTS)
        out = np.array(out, dtype=float)
        out[finite] += total / (2.0 * np.pi)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out
