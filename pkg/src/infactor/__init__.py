"""Bayesian infinite factor models with increasing-shrinkage priors.

Gaussian linear factor models y_t ~ N_p(0, Lambda Lambda' + Sigma) whose
loading matrix conceptually has infinitely many columns, truncated
adaptively during Gibbs sampling.  Three priors on the columns of Lambda
are provided, each with its own adaptive sampler:

* ``mgp`` -- multiplicative gamma process: cumulative products of gamma
  variables on column precisions, threshold-based truncation, Metropolis
  updates of the shrinkage shape parameters.
* ``cusp`` -- cumulative shrinkage process: ordered spike-and-slab on
  column variances with stick-breaking spike probabilities.
* ``ibp`` -- Indian buffet process: exactly-sparse loadings via a binary
  inclusion matrix with an unbounded column pool.

Supporting machinery: a checkpointing chain runner, joint-distribution
(forward vs successive-conditional) sampler checks, a synthetic
rank-recovery benchmark, and a command-line harness (``infactor fit`` /
``infactor bench``).
"""

from .bench import (
    DEFAULT_RUN_LENGTHS,
    DesignAggregate,
    EXTENDED_DESIGNS,
    GATING_DESIGNS,
    PRIOR_NAMES,
    ReplicateSummary,
    SimDesign,
    TrueModel,
    aggregate,
    generate_dataset,
    generate_true_model,
    interquartile_range,
    make_sampler,
    parse_designs,
    posterior_mode,
    run_replicate,
)
from .config import ConfigError, RunConfig, parse_config
from .core import (
    AdaptationSchedule,
    CorePriors,
    CoreState,
    Dataset,
    core_sweep,
    factor_conditional,
    idio_conditional,
    implied_covariance,
    loadings_row_conditional,
    simulate_observations,
)
from .cusp import CuspHyper, CuspSampler, CuspState
from .dists import NumericError, ParameterError
from .geweke import GewekeComparison, run_comparison, standard_adapters
from .ibp import IbpHyper, IbpSampler, IbpState
from .mgp import (
    MgpHyper,
    MgpSampler,
    MgpState,
    check_increasing_shrinkage,
    variance_explained_rank,
)
from .rng import RngStream
from .runner import ChainRunner, RunResult, load_checkpoint

__version__ = "0.1.0"

__all__ = [
    "AdaptationSchedule",
    "ChainRunner",
    "ConfigError",
    "CorePriors",
    "CoreState",
    "CuspHyper",
    "CuspSampler",
    "CuspState",
    "Dataset",
    "DEFAULT_RUN_LENGTHS",
    "DesignAggregate",
    "EXTENDED_DESIGNS",
    "GATING_DESIGNS",
    "GewekeComparison",
    "IbpHyper",
    "IbpSampler",
    "IbpState",
    "MgpHyper",
    "MgpSampler",
    "MgpState",
    "NumericError",
    "ParameterError",
    "PRIOR_NAMES",
    "ReplicateSummary",
    "RngStream",
    "RunConfig",
    "RunResult",
    "SimDesign",
    "TrueModel",
    "aggregate",
    "check_increasing_shrinkage",
    "core_sweep",
    "factor_conditional",
    "generate_dataset",
    "generate_true_model",
    "idio_conditional",
    "implied_covariance",
    "interquartile_range",
    "load_checkpoint",
    "loadings_row_conditional",
    "make_sampler",
    "parse_config",
    "parse_designs",
    "posterior_mode",
    "run_comparison",
    "run_replicate",
    "simulate_observations",
    "standard_adapters",
    "variance_explained_rank",
    "__version__",
]
