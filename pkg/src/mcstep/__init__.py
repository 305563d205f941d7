"""Stepwise multiple-comparison decision procedures for exchangeable
Gaussian observations, together with the loss/risk calculus, Bayes-rule
constructions and numerical admissibility certificates that justify them.
"""

__version__ = "0.1.0"

from .admissibility import (
    CounterexampleReport,
    LocalWeightScheme,
    SectionViolation,
    counterexample_negative_rho,
    from_natural,
    integrand_argmin,
    local_derivative_at_zero,
    local_weight_scheme,
    ones_weight_factor,
    section_monotonicity_scan,
    single_step_section_rejects,
    step_up_violation_scan,
    stepdown_section_threshold,
    to_natural,
)
from .bayes import (
    DiscretePrior,
    LimitReport,
    PosteriorSummary,
    bayes_decide,
    bayes_limit_action,
    component_null_posteriors,
    posterior,
    single_step_bayes_prior,
    step_down_posterior_log_numerators,
    step_down_prior_log_atoms,
)
from .critical_values import (
    CriticalValues,
    Provenance,
    SolverError,
    per_comparison_constant,
    per_comparison_values,
    single_step_fwe_constant,
    solve_constants,
    step_down_constants,
    step_up_constants,
)
from .defaults import DEFAULT_MC_REPS, DEFAULT_SEED
from .gaussian import (
    IntraclassCovariance,
    log_density,
    sample_mvn,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
)
from .model import (
    DecisionRuleMass,
    ProblemSpec,
    Variant,
    classify_partition,
    enumerate_actions,
    induced_tests,
    label_tuple,
    labels_with_ones,
    loss,
    point_mass,
)
from .procedures import (
    SingleStepProcedure,
    StepDownProcedure,
    StepUpProcedure,
    accept_everything,
    reject_everything,
    single_step_decide,
    step_down_decide,
    step_up_decide,
)
from .risk import (
    OriginRiskTable,
    RiskEstimate,
    aggregate_origin_risk,
    mass_rule_tests,
    origin_risk_table,
    risk_scalar,
    risk_vector,
    rule_mass_risk,
)
from .verify import SUITES, SuiteResult, run_suite

__all__ = [name for name in dir() if not name.startswith("_")]
