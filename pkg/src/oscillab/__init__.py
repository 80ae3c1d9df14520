"""Desk-scale numerics for oscillation, weights, and rough-kernel operators.

Everything lives on small uniform grids in one or two dimensions: function
space norms with their associates, Muckenhoupt-type constants over cube
families, maximal / fractional / singular operators with commutators, mean
oscillation seminorms, and a step-by-step verifier for the lower bound chain
that squeezes a symbol's oscillation between commutator norms.
"""

__version__ = "0.1.0"

from .errors import (
    AlphaOutOfRange,
    BadDelta,
    BracketFailure,
    ConfigError,
    ConjugateUndefined,
    DivisionByZeroNorm,
    EmptyCube,
    GridMismatch,
    KernelVanishes,
    MeanZeroViolation,
    NonPositiveWeight,
    NormUnavailable,
    OscillabError,
    OutOfDomain,
    ResolutionTooCoarse,
    TailTooLarge,
    UncoveredPoint,
)
from .grid import (
    Cube,
    CubeFamily,
    Grid,
    GridFunction,
    centered_family,
    cube_average,
    cube_cell_count,
    cube_measure,
    cube_slices,
    enumerate_dyadic,
    indicator,
    integrate,
    integrate_over,
)
from .spaces import (
    ExponentFunction,
    Lebesgue,
    SpaceSpec,
    Variable,
    Weighted,
    associate,
    chiQ_norm_ratio,
    chi_norm,
    condition_bilinear,
    condition_linear,
    conjugate_exponent,
    duality_gap,
    holder_defect,
    luxemburg_norm,
    norm,
)
from .weights import (
    PVec,
    WeightTuple,
    ap_constant,
    ap_cube,
    ap_duality_gap,
    apq_constant,
    bilinear_dual_quantity,
    bilinear_frac_dual_quantity,
    reverse_holder_defect,
    vector_ap_constant,
    vector_apq_constant,
)
from .operators import (
    KernelSpec,
    OperatorHandle,
    averaging,
    bilinear_averaging,
    bilinear_commutator,
    bilinear_fractional_integral,
    bilinear_maximal,
    bilinear_singular_integral,
    commutator,
    coverage_mask,
    distance_kernel,
    fractional_integral,
    maximal,
    operator_norm_estimate,
    singular_integral,
)
from .bmo import bmo_seminorm, mean_oscillation, mean_oscillation_shifted, symbol_library
from .extraction import (
    ExtractionGeometry,
    FourierExpansion,
    build_test_functions,
    fourier_reciprocal,
    necessity_experiment,
    select_geometry,
    verify_master_chain,
)

__all__ = [name for name in dir() if not name.startswith("_")]
