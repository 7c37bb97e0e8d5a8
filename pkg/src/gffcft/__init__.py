"""Half-plane GFF conformal field theory workbench with an SLE cross-validator."""

from .errors import (
    BoundaryPointError,
    CapExceededError,
    CoincidentPointsError,
    DegenerateMapError,
    GffcftError,
    HorizonExhaustedError,
    InputError,
    IntegrabilityError,
    WindowError,
)
from .halfplane import (
    ChartMap,
    Differential,
    HalfPlanePoint,
    KernelSum,
    PreSchwarzianForm,
    PrePreSchwarzianForm,
    SchwarzianForm,
    conformal_radius_data,
    green,
    green_mixed_partial,
    schwarzian,
    transform_value,
)
from .numerology import Numerology, numerology, numerology_from_b
from .wick import (
    Background,
    BasicField,
    Charge,
    CorrelationQuery,
    InsertionBackground,
    J,
    JBAR,
    PHI,
    PointInsertionBackground,
    QueryEntry,
    Term,
    ZERO_BACKGROUND,
    charge_expr,
    charge_prefactor,
    correlate,
    enumerate_diagrams,
    field_derivative,
    monomial,
    pair_basic,
    pair_charge,
    query_from_json,
    query_to_json,
    stress_tensor,
)
from .vertex import (
    StarProduct,
    VertexNode,
    WardEntry,
    cardy_residual,
    kz_residual,
    lambda_q,
    star_correlator,
    vertex_dims,
    ward_residual,
)
from .ope import (
    LaurentWindow,
    central_charge_measure,
    commutator_residual,
    degeneracy_residual,
    laurent_extract,
    ope_coeff,
    singular_vector_residual,
    virasoro_mode,
)

__version__ = "0.1.0"
