"""Interval exchanges, zippered rectangles and Heisenberg skew products."""

from .analysis import (
    atom_probe,
    best_invariant_defect,
    cohomological_residual,
    cohomological_residual_sweep,
    eigenfunction_defect,
    fit_decay_exponent,
    furstenberg_invariant_function_check,
    rokhlin_eigenfunction,
    spectral_density,
    square_summability_report,
)
from .bundle import (
    admissible_b_space,
    build_skew_product,
    is_admissible,
    orbit_constraint_holonomy_oracle,
    rect_holonomy,
    sample_admissible,
    weil_check,
)
from .config import parse_config
from .dynamics import (
    ModeObservable,
    birkhoff_average,
    birkhoff_skewing_sum,
    correlation_series,
    discrepancy_2d,
    mode_correlation,
    mode_project,
    skew_apply,
)
from .flow import FlowState, commutator_shift, first_return, flow_fiber, flow_horizontal, flow_vertical
from .iet import (
    IetMap,
    IetSpec,
    genus,
    iet_apply,
    iet_orbit,
    kernel_basis,
    monodromy,
    omega_matrix,
    sigma_permutation,
    translation_vector,
    validate_iet,
)
from .suspension import build_zippered_rectangles, cone_contains, heights_cone_contains, heights_from_tau

__version__ = "0.1.0"

__all__ = [
    "FlowState",
    "IetMap",
    "IetSpec",
    "ModeObservable",
    "admissible_b_space",
    "atom_probe",
    "best_invariant_defect",
    "birkhoff_average",
    "birkhoff_skewing_sum",
    "build_skew_product",
    "build_zippered_rectangles",
    "cohomological_residual",
    "cohomological_residual_sweep",
    "commutator_shift",
    "cone_contains",
    "correlation_series",
    "discrepancy_2d",
    "eigenfunction_defect",
    "first_return",
    "fit_decay_exponent",
    "flow_fiber",
    "flow_horizontal",
    "flow_vertical",
    "furstenberg_invariant_function_check",
    "genus",
    "heights_cone_contains",
    "heights_from_tau",
    "iet_apply",
    "iet_orbit",
    "is_admissible",
    "kernel_basis",
    "mode_correlation",
    "mode_project",
    "monodromy",
    "omega_matrix",
    "orbit_constraint_holonomy_oracle",
    "parse_config",
    "rect_holonomy",
    "rokhlin_eigenfunction",
    "sample_admissible",
    "sigma_permutation",
    "skew_apply",
    "spectral_density",
    "square_summability_report",
    "translation_vector",
    "validate_iet",
    "weil_check",
]
