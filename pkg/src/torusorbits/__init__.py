"""Finite-orbit certification for nilpotent groups acting on the 2-torus.

Core layers: exact mapping-class algebra (mcg), trigonometric lifts and
their expression trees (torusmaps), rotation vectors against empirical
measures (rotation), fixed-point search and the finite-orbit pipeline
(fixedpoints), and the circle / annulus / Klein bottle / Mobius strip
variants (surfaces). A FastAPI service wraps the analyses; the CLI is a
thin client of the same handlers.
"""

__version__ = "0.1.0"

from .mcg import (
    IDENTITY,
    MINUS_IDENTITY,
    H_GROUP,
    IntMatrix2,
    RatMatrix2,
    McgClassification,
    classify_element,
    classify_nilpotent_subgroup,
    closure,
    conjugate_to_H,
    evaluate_word,
    has_one_in_spectrum,
    lefschetz_number,
    select_special_element,
)
from .torusmaps import (
    Compose,
    FourierTerm,
    GroupSpec,
    Inverse,
    Leaf,
    Power,
    TorusMap,
    affine,
    check_equivariance,
    identity_map,
    parse_group,
    parse_map,
    translation,
    validate_diffeo,
    word_to_map,
)
from .rotation import (
    EmpiricalMeasure,
    birkhoff_average,
    build_battery,
    invariant_measure_estimate,
    morphism_check,
    normalize_irrotational,
    pushforward,
    rho_mu,
    rotation_set_estimate,
)
from .fixedpoints import (
    FixRegion,
    FixedPointRecord,
    OrbitReport,
    PipelineFailure,
    PipelineParams,
    find_finite_orbit,
    find_torus_fixed_points,
    fix_region,
    index_sum_check,
)
from .surfaces import (
    AnnulusMap,
    CircleLift,
    circle_rotation_number,
    double_annulus,
    klein_lifts,
    mobius_reduce,
    product_map,
    reversing_fixed_points,
)
from .config import FORMAT_VERSION, RunConfig
