"""Instrument-based estimation of full-treatment effects with two-part treatments.

A two-part treatment (enroll, then stay enrolled) admits five one-number
summaries, and an instrument that moves people into only one part breaks the
usual exclusion restriction. This package estimates every summary's first
stage and IV estimand, identifies the complier-group shares under a double
exclusion restriction, tests the testable necessary conditions, computes
sharp and bounded-response partial-identification bounds on the local
average full treatment effect (LAFTE) with cluster-robust stacked standard
errors, and ships a principal-strata population simulator whose closed-form
moments machine-verify every identification identity.
"""

__version__ = "0.1.0"

from .bounds import BoundsResult, lafte_bounds, lafte_bounds_bounded_response, tau_bounds
from .data import (
    DerivedColumns,
    ObservationTable,
    ValidationReport,
    derive,
    from_arrays,
    load_table,
    save_table,
    validation_report,
)
from .diagnostics import (
    MoverTestReport,
    SignCheckReport,
    double_exclusion_check,
    mover_conclusion,
    mover_test,
)
from .estimands import (
    BINARY_DEFS,
    ComplierShares,
    EstimateWithSE,
    TreatmentDef,
    complier_shares,
    first_stage,
    iv_estimand,
    reduced_form,
)
from .exceptions import (
    BoundsError,
    ColumnMissingError,
    ConfigError,
    DataError,
    DegenerateTestError,
    EstimationError,
    LafteError,
    RankDeficientError,
    RelevanceError,
    SpecError,
)
from .regression import (
    FitResult,
    StackedSystem,
    TestResult,
    fit_stacked,
    linear_combination,
    ols,
    stack,
    tsls,
    wald_joint,
)
from .strata import (
    AssumptionAudit,
    PopulationMoments,
    PopulationSpec,
    Stratum,
    TrueParams,
    analytic_moments,
    group_probs,
    load_spec,
    random_spec,
    sample,
    save_spec,
    spec_from_dict,
    spec_to_dict,
    stratum,
    true_parameters,
    validate_spec,
)
from .verify import CheckResult, VerificationReport, verify_identities

__all__ = [name for name in dir() if not name.startswith("_")]
