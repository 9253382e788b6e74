"""Iterative magnitude pruning on linear models trained by gradient flow.

Exact closed-form training, the pruning engine with full audit traces,
alignment/thresholding baselines, covariance-regime generators, executable
recovery bounds, and a seeded Monte Carlo harness.
"""

from .baselines import (
    IhtDivergenceError,
    IhtResult,
    ThresholdConfig,
    alignment_order,
    hard_threshold,
    ht_estimator,
    iht,
)
from .designs import (
    FeatureSet,
    SparseProblem,
    assemble_problem,
    gen_incoherent_design,
    gen_orthonormal_design,
    gen_sparse_signal,
    gen_uniform_corr_design,
    make_rng,
    pairwise_incoherence,
    sample_noise,
)
from .engine import (
    ImpConfig,
    ImpTrace,
    PruneMask,
    RoundRecord,
    imp_prune_order,
    run_imp,
    trace_from_dict,
    trace_to_dict,
)
from .flow import (
    INFINITE,
    FlowProblem,
    FlowSolution,
    StabilityWarning,
    flow_closed_form,
    flow_rk4,
    quadratic_loss,
)
from .linalg import (
    CovMatrix,
    SymEig,
    min_nonzero_eig,
    operator_norm,
    pseudo_inverse,
    sym_eig,
)
from .theory import (
    BoundInputs,
    McSummary,
    OnpReport,
    RecoveryCheck,
    check_onp,
    check_recoverable,
    concentration_sample_size,
    concentration_sample_size_raw,
    exact_binomial_ci,
    noise_exceedance_mc,
    noise_functional,
    recovery_sample_size,
    recovery_sample_size_raw,
)

__version__ = "0.1.0"

__all__ = [
    "INFINITE",
    "BoundInputs",
    "CovMatrix",
    "FeatureSet",
    "FlowProblem",
    "FlowSolution",
    "IhtDivergenceError",
    "IhtResult",
    "ImpConfig",
    "ImpTrace",
    "McSummary",
    "OnpReport",
    "PruneMask",
    "RecoveryCheck",
    "RoundRecord",
    "SparseProblem",
    "StabilityWarning",
    "SymEig",
    "ThresholdConfig",
    "alignment_order",
    "assemble_problem",
    "check_onp",
    "check_recoverable",
    "concentration_sample_size",
    "concentration_sample_size_raw",
    "exact_binomial_ci",
    "flow_closed_form",
    "flow_rk4",
    "gen_incoherent_design",
    "gen_orthonormal_design",
    "gen_sparse_signal",
    "gen_uniform_corr_design",
    "hard_threshold",
    "ht_estimator",
    "iht",
    "imp_prune_order",
    "make_rng",
    "min_nonzero_eig",
    "noise_exceedance_mc",
    "noise_functional",
    "operator_norm",
    "pairwise_incoherence",
    "pseudo_inverse",
    "quadratic_loss",
    "recovery_sample_size",
    "recovery_sample_size_raw",
    "run_imp",
    "sample_noise",
    "sym_eig",
    "trace_from_dict",
    "trace_to_dict",
]
