"""Numerical fuzzy Hyers-Ulam-Rassias stability for ring homomorphisms and derivations."""

from .algebra import (
    Element,
    FiniteAlgebra,
    check_associativity,
    crisp_norm,
    make_matrix_algebra,
    make_poly_trunc_algebra,
    make_real_algebra,
)
from .control import (
    ApproximateMap,
    ControlFunction,
    build_approximate_map,
    certify_defect_domination,
    check_scaling,
    constant_control,
    phi_magnitude,
    powersum_control,
)
from .fuzzy_norm import (
    FuzzyNorm,
    NormKind,
    SampleGrid,
    cauchy_check,
    check_algebra_condition,
    check_axioms,
    default_grid,
    fuzzy_limit_check,
)
from .stabilizer import (
    RecoveredMap,
    StabilizationResult,
    StabilizerConfig,
    fuzzy_bound_threshold,
    hyers_bound,
    rassias_bound,
    stabilize,
)
from .verifier import check_stability_bound, check_uniqueness, defect

__version__ = "0.1.0"
