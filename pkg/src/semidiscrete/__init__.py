"""Semi-discrete explicit schemes for scalar SDEs with superlinear drift."""

__version__ = "0.1.0"

from .core import (
    InvalidArgumentError,
    InvalidConfigurationError,
    SchemePath,
    SdeProblem,
    Splitting,
    TimeGrid,
    UnsupportedProblemError,
    check_consistency,
    euler_splitting,
    floor_index,
    geometric_splitting,
    make_grid,
    power_linear_problem,
)
from .rng import BrownianIncrements, RngStream, coarsen, cumulative, derive_stream, sample_batch, sample_increments
from .schemes import euler_path, geometric_exact_step, semidiscrete_path, tamed_euler_path
from .analysis import (
    MomentReport,
    PositivityReport,
    StrongErrorReport,
    diff_trajectory,
    moment_study,
    order_fit,
    positivity_study,
    simulate_paths,
    strong_error_study,
    sup_sq_distance,
)
