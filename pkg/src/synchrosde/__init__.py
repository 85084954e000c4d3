"""Noise-induced synchronization of scalar SDEs with singular drift.

Pipeline: describe the coefficients as expressions (:mod:`funcspec`),
validate the structural hypotheses (:mod:`model`), remove the singular
drift component with a scale transform (:mod:`zvonkin`), derive the
explicit rate constants (:mod:`constants`), simulate coupled pairs on
shared noise (:mod:`simulate`), and compare measured decay rates against
the derived ones (:mod:`analyze`).
"""

from .funcspec import (
    DeclaredMeta,
    DomainError,
    ExpressionError,
    FunctionDescriptor,
    FunctionProfile,
    evaluate,
    evaluate_array,
    format_expression,
    parse,
    profile,
)
from .model import (
    MODE_A3,
    MODE_A3PRIME,
    DissipativeModel,
    ModelError,
    SDEModel,
    ValidationReport,
    build_dissipative,
    build_model,
    dissipativity_scan,
    load_model,
    model_from_dict,
    model_to_dict,
    validate,
)
from .zvonkin import (
    ConstructionError,
    GammaConstruction,
    RefinementError,
    ScaleTransform,
    TransformedModel,
    build_gamma,
    build_scale,
    check_slope,
    inverse_scale,
    scale,
    scale_prime,
    transformed_coefficients,
)
from .constants import (
    ConstantsReport,
    Prop1Rates,
    compute_constants,
    lipschitz_constants,
    paper_closed_form_bound,
    prop1_constants,
    synchronization_constants,
)
from .simulate import (
    SampledEnsemble,
    SimulationError,
    SimulationSpec,
    TrajectoryPair,
    diffusion_from_model,
    drift_from_model,
    em_pair,
    ensemble,
    ensemble_sampled,
    ode_baseline,
    transformed_spec,
    wiener_increments,
)
from .analyze import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    RateEstimate,
    VerificationReport,
    estimate_as_rate,
    estimate_lp_rate,
    ks_distance,
    verify,
    verify_dissipative,
)

__version__ = "0.1.0"
