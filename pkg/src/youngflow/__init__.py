"""Linear Young differential equations: flows, Lyapunov spectra and triangular oracles."""

from .errors import ConfigError, DegeneracyError, DomainError, GenerationError, IterationError, YoungFlowError
from .lyapunov import (
    NEG_INF,
    ExponentSeries,
    RegularityReport,
    SpectrumEstimate,
    chi,
    discrete_spectrum,
    exponent_arithmetic_check,
    exponent_bound,
    nonregularity,
)
from .paths import (
    GreedyPartition,
    Interval,
    SampledPath,
    greedy_partition,
    holder_module,
    holder_seminorm,
    p_variation_seminorm,
    precompactness_check,
    wiener_shift,
)
from .solver import (
    FlowMatrix,
    LinearYDE,
    SolveReport,
    adjoint_fundamental,
    continuity_probe,
    fundamental_matrix,
    liouville_log_det,
    picard_solve,
    two_parameter_flow,
)
from .stochastic import (
    AssumptionReport,
    FbmSpec,
    check_assumptions,
    ensemble_spectrum,
    fbm_sample,
    gamma_p,
    integrability_stat,
    moment_bound_probe,
)
from .triangular import (
    DiagonalMeans,
    TriangularYDE,
    regularity_criterion,
    solve_1d_explicit,
    solve_1d_nonhomogeneous,
    triangular_fundamental,
    triangular_spectrum,
)
from .young import YoungParams, young_integral, young_integral_path, young_loeve_defect_bound

__version__ = "0.1.0"
