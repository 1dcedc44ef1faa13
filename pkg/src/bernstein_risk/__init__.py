"""Risk aggregation under mixed Bernstein copulas.

Risks are ``X_i = Z_i / Theta`` where the latent ``Z_i`` have standard
exponential margins coupled by a Bernstein copula of order ``m`` and
``Theta`` is a shared positive mixing variable. The distribution of the
sum, VaR, TVaR and the TVaR-based allocation all have closed-form series
driven by a discrete count distribution.
"""

from .aggregate import AggregateModel, agg_pdf, agg_survival, gamma_agg_pdf, gamma_agg_weights, pareto_agg_pdf, var
from .alpha import AlphaGrid, FAMILIES, ValidationReport, make_alpha, read_alpha_csv, validate_alpha, write_alpha_csv
from .bernstein import (
    BetaTensor,
    GammaTensor,
    IllConditionedWarning,
    InvalidAlphaError,
    beta_coeffs,
    eval_copula_bernstein,
    eval_density_bernstein,
    gamma_coeffs,
)
from .counts import (
    CountPmf,
    JointCountPmf,
    TruncationError,
    allocation_weights,
    joint_count_pmf,
    tail_sums,
    total_count_pmf,
    tvar_weights,
)
from .estimator import BernsteinRiskModel
from .measures import (
    RiskReport,
    joint_survival,
    joint_survival_mixture,
    mixed_copula,
    risk_report,
    spearman_rho,
    tvar,
    tvar_contribution,
)
from .mixing import GammaClaims, GammaMixing, make_mixing
from .montecarlo import SimulationBatch, empirical_measures, sample_batch

__version__ = "0.1.0"
