"""Growth-catastrophe population process toolkit.

Simulation (two independent constructions), exact desk-scale distributions,
closed-form large-deviation rates with an independent variational check,
importance-sampling estimation of rare deviations, and reconstruction of the
most probable deviation trajectories.
"""

from .exact import (
    Pmf,
    TruncationBudgetExceeded,
    chain_matrix,
    exact_state_distribution,
    exact_tail_probability,
    poisson_lower_tail_exact,
    total_variation,
    uniform_sum_tail_exact,
)
from .model import (
    EventKind,
    ModelParams,
    OptimalPath,
    PathSample,
    ScaledPath,
    SimSpec,
    chain_step,
    optimal_path,
    scale_path,
    simulate_decomposed,
    simulate_subordinated,
    sup_value,
    terminal_value,
)
from .montecarlo import (
    EstimateResult,
    SweepPoint,
    TiltConfig,
    collect_weighted_paths,
    default_tilt,
    estimate_tail_is,
    estimate_tail_naive,
    likelihood_ratio,
    rate_curve_sweep,
    sample_terminal_states,
    sup_exceedance_fraction,
)
from .paths import (
    MeanPath,
    NoQualifyingSamplesError,
    conditioned_mean_path,
    path_distance,
)
from .rates import (
    OptimizerConvergenceError,
    VariationalPoint,
    birth_increment_rate,
    catastrophe_lower_tail_bound,
    terminal_rate,
    terminal_rate_variational,
    uniform_sum_tail_bound,
    variational_objective,
)
from .streams import derive_seed, float_key, replica_rng

__version__ = "0.1.0"

__all__ = [
    "EventKind",
    "EstimateResult",
    "MeanPath",
    "ModelParams",
    "NoQualifyingSamplesError",
    "OptimalPath",
    "OptimizerConvergenceError",
    "PathSample",
    "Pmf",
    "ScaledPath",
    "SimSpec",
    "SweepPoint",
    "TiltConfig",
    "TruncationBudgetExceeded",
    "VariationalPoint",
    "birth_increment_rate",
    "catastrophe_lower_tail_bound",
    "chain_matrix",
    "chain_step",
    "collect_weighted_paths",
    "conditioned_mean_path",
    "default_tilt",
    "derive_seed",
    "estimate_tail_is",
    "estimate_tail_naive",
    "exact_state_distribution",
    "exact_tail_probability",
    "float_key",
    "likelihood_ratio",
    "optimal_path",
    "path_distance",
    "poisson_lower_tail_exact",
    "rate_curve_sweep",
    "replica_rng",
    "sample_terminal_states",
    "scale_path",
    "simulate_decomposed",
    "simulate_subordinated",
    "sup_exceedance_fraction",
    "sup_value",
    "terminal_rate",
    "terminal_rate_variational",
    "terminal_value",
    "total_variation",
    "uniform_sum_tail_bound",
    "uniform_sum_tail_exact",
    "variational_objective",
]
