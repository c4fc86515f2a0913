"""Finitely presented Lie-Rinehart structures on coordinate charts.

Symbolic checks of the structure axioms, fibers and fiber-determinedness,
morphisms and comorphisms with their factorizations, adjoint flows and leaf
sampling, and a holonomy-based test bed for A-path groupoid laws.
"""

from .ce import (
    CEDifferential,
    ce_differential,
    ce_roundtrip_report,
    d_squared_report,
    differential_from_tensors,
    presentation_from_differential,
)
from .expr import (
    Chart,
    Expr,
    ExprError,
    ParseError,
    ZeroKind,
    ZeroTestConfig,
    ZeroVerdict,
    differentiate,
    evaluate,
    is_identically_zero,
    normalize,
    parse_expr,
    point_chart,
    substitute,
    to_string,
)
from .fibers import (
    FDClass,
    FiberError,
    family,
    family_derivative,
    family_integral,
    fd_witness_check,
    fiber_basis,
    fiber_class,
    fiber_determinize,
    fiberwise_zero,
    ftc_report,
)
from .fileformat import FormatError, load_map_file, load_structure, parse_structure_file, print_structure
from .flows import (
    IntegratorConfig,
    adjoint_flow_at_point,
    adjoint_property_report,
    flow_point,
    leaf_dimension,
    leaf_sample,
    same_leaf,
    time_section,
)
from .homotopy import (
    LRPath,
    LRSquare,
    MatrixAlgebraModel,
    apath_report,
    boundary_report,
    concatenate_paths,
    constant_path,
    groupoid_law_report,
    holonomy,
    lazify_path,
    lr_path,
    lr_square,
    random_lazy_path,
    reparameterize_path,
    reverse_path,
    square_residual,
)
from .morphisms import (
    MorphismError,
    base_change_bracket,
    base_change_element,
    base_change_jacobi_report,
    base_change_membership,
    base_map,
    check_lr_comorphism,
    check_lr_morphism,
    compose_morphisms,
    factor_comorphism,
    factor_morphism,
    lr_comorphism,
    lr_morphism,
)
from .presentation import (
    LRPresentation,
    PresentedModule,
    Section,
    VectorField,
    anchor_of,
    bracket_sections,
    jacobiator,
    verify_presentation,
)
from .report import Report, Residual

__all__ = [name for name in dir() if not name.startswith("_")]
