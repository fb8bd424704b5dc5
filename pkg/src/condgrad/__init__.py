"""Projection-free convex optimization with conditional gradients.

Blended pairwise conditional gradients and its lazified variant, the
classical Frank-Wolfe baselines, linear minimization oracles for the
standard benchmark regions, and kernel quadrature by herding.
"""

from .core import (
    ActiveSet,
    Atom,
    ConfigurationError,
    ContractViolation,
    RunTrace,
    StepKind,
    StepRecord,
    apply_fw,
    apply_pairwise,
    away_and_local_fw,
)
from .objectives import (
    MatrixCompletionLoss,
    Objective,
    QuadraticDistance,
    RatingsParseError,
    load_ratings_csv,
)
from .lmo import (
    BirkhoffLMO,
    LinearMinimizationOracle,
    LpBallLMO,
    PowerIterationError,
    SimplexLMO,
    SpectrahedronLMO,
    birkhoff_lmo,
    lp_ball_lmo,
    simplex_lmo,
    spectrahedron_lmo,
)
from .solvers import (
    AdaptiveState,
    SolverConfig,
    StepChoice,
    StepSizeRule,
    run_afw,
    run_bpcg,
    run_lazy_bpcg,
    run_pcg,
    run_vanilla_fw,
    select_step,
    step_size,
    verify_trace_invariants,
)
from .kernels import (
    Gaussian,
    GaussianMixture,
    Kernel,
    Matern32,
    Matern52,
    Measure,
    TruncatedGaussian,
    UniformBox,
    halton_points,
    kernel_by_name,
    kernel_eval,
)
from .herding import (
    CandidatePool,
    DiscreteMeasure,
    EmbeddingCache,
    GramSingularError,
    SbqResult,
    embedding_constant,
    get_embedding_cache,
    herding_lmo,
    mean_embedding,
    mmd_squared,
    run_bpcg_herding,
    run_lazy_bpcg_herding,
    run_monte_carlo,
    run_sbq,
    run_vanilla_herding,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
