"""Full Bayesian Significance Test: e-values for sharp hypotheses."""
from ._version import __version__
from .calibration import CalibrationRow, ConsistencyRow, Study, calibrate_critical_level, consistency_study
from .config import TestSpec, load_spec, parse_spec
from .decision import (
    Decision,
    DecisionThresholds,
    Verdict,
    decide,
    disjunction_evalue,
    qq_confidence,
    qq_inverse,
    standardized_evalue,
)
from .errors import (
    DimensionError,
    FBSTError,
    InapplicableMapError,
    InfeasibleHypothesisError,
    OptimizationError,
    SamplerError,
    ValidationError,
)
from .hypothesis import (
    Hypothesis,
    constraint_residual,
    equal_means,
    evaluate_constraints,
    hardy_weinberg,
    point_hypothesis,
    pushforward_hypothesis,
    whole_space,
)
from .integrate import (
    EvalEstimate,
    PosteriorSample,
    TruthFunction,
    effective_sample_size,
    estimate_evalue,
    quadrature_evalue,
    sample_posterior_direct,
    sample_posterior_mcmc,
    truth_function,
)
from .models import (
    FAMILIES,
    DataSet,
    ParameterSpace,
    PosteriorModel,
    Prior,
    conjugate_posterior_update,
    custom_model,
    fisher_information,
    log_jeffreys_density,
    log_posterior_potential,
    simulate_data,
)
from .optimize import OptimumReport, sup_surprise_global, sup_surprise_hypothesis
from .pipeline import EvidenceResult, compute_evidence
from .report import EvalReport
from .runner import InvarianceResult, run_calibration, run_consistency_study, run_invariance_check, run_test
from .surprise import (
    ReferenceDensity,
    Reparameterization,
    SurpriseFunction,
    jeffreys_reference,
    log_surprise,
    named_map,
    pushforward,
    uniform_reference,
)
