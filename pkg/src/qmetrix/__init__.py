"""Entanglement-constrained optimal quantum Fisher information toolkit."""

__version__ = "0.1.0"

from .laws import (
    BoundaryCase,
    boundary_qfi,
    hl,
    invert_binary_entropy,
    optimal_state_entropy,
    optimal_state_ggm,
    q_opt_entropy,
    q_opt_ggm,
    q_opt_unequal_d3,
    sql,
)
from .measures import (
    BipartitionReport,
    EntanglementValue,
    GmResult,
    GmSearchConfig,
    Measure,
    binary_entropy,
    entropy_bipartite,
    ggm,
    ggm_two_qubit_closed,
    gm,
)
from .optimizer import (
    ConstrainedProblem,
    EsConfig,
    GridOracleResult,
    OptimizationResult,
    SearchSpace,
    grid_oracle,
    maximize_qfi,
    sweep,
)
from .sampler import (
    BinReport,
    ConvergenceReport,
    SamplerConfig,
    bin_and_maximize,
    convergence_check,
    run_sampler,
    sample_states,
)
from .fitting import FitFamily, FitResult, QuadraticOrdinate, fit_quadratic, fit_rational
from .states import (
    CollectiveSpectrum,
    Generator,
    GeneratorKind,
    ProbeState,
    collective_spectrum,
    cramer_rao_stddev,
    deserialize,
    make_generator,
    qfi,
    serialize,
    variance,
)

__all__ = [name for name in dir() if not name.startswith("_")]
