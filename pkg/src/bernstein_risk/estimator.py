"""scikit-learn style front end for a mixed Bernstein risk model.

The model is fully parametric, so ``fit`` ignores its data argument and
only builds the lattice, the count pmf and the aggregate model from the
constructor parameters. Parameters follow sklearn conventions (plain
constructor arguments, ``get_params``/``set_params``, trailing-underscore
fitted attributes), which makes the model usable in parameter sweeps::

    model = BernsteinRiskModel(alpha="comonotonic", m=10).fit()
    model.var(0.95), model.tvar(0.95)
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .aggregate import AggregateModel, agg_pdf, agg_survival, var
from .alpha import make_alpha, validate_alpha
from .bernstein import InvalidAlphaError, beta_coeffs, gamma_coeffs
from .counts import EPS_TAIL, total_count_pmf
from .measures import risk_report, spearman_rho, tvar
from .mixing import make_mixing
from .montecarlo import sample_batch

__all__ = ["BernsteinRiskModel"]


class BernsteinRiskModel(BaseEstimator, TransformerMixin):
    """Risks ``X_i = Z_i / Theta`` with a Bernstein copula on the ``Z_i``.

    Parameters
    ----------
    alpha : str or AlphaGrid
        Built-in family name or a ready lattice grid.
    alpha_params : dict, optional
        Family parameters (defaults of the family when omitted).
    m : int
        Bernstein order; ignored when ``alpha`` is a grid.
    n : int
        Number of risks; ignored when ``alpha`` is a grid.
    mixing : str
        ``"gamma_mixing"`` or ``"gamma_claims"``.
    mixing_params : dict, optional
        ``{"a", "b"}`` or ``{"a", "lambda"}``; defaults to ``a=5, b=100``.
    eps_tail : float
        Truncation target for the total-count pmf.
    """

    def __init__(self, alpha="independence", alpha_params=None, m=5, n=2,
                 mixing="gamma_mixing", mixing_params=None, eps_tail=EPS_TAIL):
        self.alpha = alpha
        self.alpha_params = alpha_params
        self.m = m
        self.n = n
        self.mixing = mixing
        self.mixing_params = mixing_params
        self.eps_tail = eps_tail

    def fit(self, X=None, y=None):
        """Build the model; ``X`` and ``y`` are accepted and ignored."""
        if isinstance(self.alpha, str):
            grid = make_alpha(self.alpha, self.alpha_params, m=self.m, n=self.n)
        else:
            grid = self.alpha
        report = validate_alpha(grid)
        if not report.is_valid:
            raise InvalidAlphaError("; ".join(report.lines()))
        params = self.mixing_params if self.mixing_params is not None else {"a": 5.0, "b": 100.0}
        self.grid_ = grid
        self.mixing_ = make_mixing(self.mixing, **params)
        self.gamma_ = gamma_coeffs(grid)
        self.counts_ = total_count_pmf(self.gamma_, eps_tail=self.eps_tail)
        self.model_ = AggregateModel(self.mixing_, self.counts_)
        self.n_features_in_ = grid.n
        return self

    def transform(self, X):
        """Map losses to copula scale, ``u_i = f*(x_i)`` (marginal survival)."""
        check_is_fitted(self, "model_")
        X = np.asarray(X, dtype=float)
        if np.any(X < 0):
            raise ValueError("losses must be nonnegative")
        return self.mixing_.laplace(X)

    def inverse_transform(self, U):
        check_is_fitted(self, "model_")
        return self.mixing_.inv(np.asarray(U, dtype=float))

    def var(self, kappa=0.95):
        check_is_fitted(self, "model_")
        return var(self.model_, kappa)

    def tvar(self, kappa=0.95):
        check_is_fitted(self, "model_")
        return tvar(self.model_, kappa=kappa)

    def allocate(self, kappa=0.95):
        """Full :class:`~bernstein_risk.measures.RiskReport` at ``kappa``."""
        check_is_fitted(self, "model_")
        return risk_report(self.model_, self.gamma_, kappa)

    def pdf(self, x):
        """Aggregate density at each point of ``x``."""
        check_is_fitted(self, "model_")
        return np.vectorize(lambda t: agg_pdf(self.model_, t))(x)

    def sf(self, x):
        """Aggregate survival ``P(S > x)`` at each point of ``x``."""
        check_is_fitted(self, "model_")
        return np.vectorize(lambda t: agg_survival(self.model_, t))(x)

    def spearman_rho(self):
        check_is_fitted(self, "model_")
        return spearman_rho(beta_coeffs(self.grid_), self.mixing_)

    def sample(self, paths, seed=0, workers=None, method="spacings"):
        """Simulated losses, shape ``(paths, n)``."""
        check_is_fitted(self, "model_")
        return sample_batch(self.gamma_, self.mixing_, paths, seed, workers, method).losses
