"""henonmix: mixing statistics, Green functions and CLT experiments for
generalized Henon maps of C^2, sampled through saddle periodic orbits."""

from ._backend import BACKEND, USE_NUMBA
from .clt import (
    CltReport,
    birkhoff_sum,
    clt_test,
    ks_distance_to_normal,
    sigma2_batch,
    sigma2_green_kubo,
)
from .green import (
    FiltrationClass,
    GreenValue,
    classify,
    escape_radius,
    green_minus,
    green_plus,
    render_green_slice,
)
from .henon import ElementaryFactor, HenonMap, OrbitSegment, Point, ProductPoint
from .mixing import (
    CorrelationQuery,
    CorrelationReport,
    DecayFit,
    decay_curve,
    multi_correlation,
    shift_consistency,
    theoretical_rate,
)
from .observables import (
    DecompositionResult,
    Observable,
    PhiConstruction,
    build_h,
    build_phi,
    c2_decompose,
    complex_hessian,
    gradient_form,
    holder_cusp,
    loewner_leq,
    make_bump,
    mollify,
    phi_hessian_check,
    positivity_bracket,
)
from .sampler import (
    MeasureSample,
    PeriodicOrbit,
    empirical_integral,
    find_periodic,
    invariance_identity_check,
    sample_mu,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "USE_NUMBA",
    "CltReport",
    "CorrelationQuery",
    "CorrelationReport",
    "DecayFit",
    "DecompositionResult",
    "ElementaryFactor",
    "FiltrationClass",
    "GreenValue",
    "HenonMap",
    "MeasureSample",
    "Observable",
    "OrbitSegment",
    "PeriodicOrbit",
    "PhiConstruction",
    "Point",
    "ProductPoint",
    "birkhoff_sum",
    "build_h",
    "build_phi",
    "c2_decompose",
    "classify",
    "clt_test",
    "complex_hessian",
    "decay_curve",
    "empirical_integral",
    "escape_radius",
    "find_periodic",
    "gradient_form",
    "green_minus",
    "green_plus",
    "holder_cusp",
    "invariance_identity_check",
    "ks_distance_to_normal",
    "loewner_leq",
    "make_bump",
    "mollify",
    "multi_correlation",
    "phi_hessian_check",
    "positivity_bracket",
    "render_green_slice",
    "sample_mu",
    "shift_consistency",
    "sigma2_batch",
    "sigma2_green_kubo",
    "theoretical_rate",
]
