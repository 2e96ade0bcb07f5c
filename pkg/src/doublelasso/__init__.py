"""Post-selection inference for treatment effects with many controls.

The package turns raw survey-style tables into numeric design matrices,
fits penalized logistic or linear models by coordinate descent, and reports
treatment coefficients whose confidence intervals stay valid after model
selection, via orthogonalized scoring (binary outcomes) or double selection
(continuous outcomes). A Monte Carlo laboratory with known-truth generators
measures bias, coverage, and size, and a CLI exposes the encode / fit /
simulate workflows.
"""

from .dml import (
    DmlConfig,
    DmlEstimate,
    FitFailure,
    NuisanceArtifacts,
    dml_linear,
    dml_logit,
    dml_multi,
    iv_logit_objective,
    naive_linear,
    naive_logit,
)
from .encoding import (
    CategoricalRule,
    ColumnInfo,
    Dataset,
    DerivedRule,
    EncodingSpec,
    InteractionRule,
    NumericRule,
    RawTable,
    encode,
    encoding_spec_from_yaml,
    encoding_spec_to_yaml,
    interact,
    load_dataset,
    load_table,
    save_dataset,
    sidecar_path,
    synthetic_survey_schema,
    synthetic_survey_table,
)
from .errors import (
    DegenerateMomentError,
    DegenerateOutcomeError,
    DegenerateTreatmentError,
    DoubleLassoError,
    EmptyDatasetError,
    EncodingError,
    ParseError,
    RankDeficiencyError,
    SchemaError,
    WeakInstrumentError,
)
from .glm import (
    CoefficientVector,
    link,
    link_deriv,
    neg_loglik,
    solve_spd,
    wls_fit,
    wls_fit_rescued,
)
from .lasso import (
    LassoFit,
    PenaltyConfig,
    RefitResult,
    cv_lambda,
    lambda_max_wls,
    lasso_logistic,
    lasso_wls,
    logistic_lasso_loadings,
    plugin_lambda,
    post_refit,
    soft_threshold,
    wls_lasso_loadings,
)
from .report import (
    MULTIPLICITY_NOTE,
    REPORT_VERSION,
    percent_labels,
    render_coverage_reports,
    render_fit_results,
)
from .simulate import (
    CoverageReport,
    DgpSpec,
    StudySpec,
    TruthRecord,
    confounded_benchmark,
    coverage_reports_from_yaml,
    coverage_reports_to_yaml,
    dataset_checksum,
    dml_fit,
    gen_dgp,
    naive_fit,
    null_logistic_benchmark,
    run_replications,
    run_study,
    sparse_linear_benchmark,
    sparse_logistic_benchmark,
    study_spec_from_yaml,
    study_spec_to_yaml,
    summarize,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "CategoricalRule",
    "CoefficientVector",
    "ColumnInfo",
    "CoverageReport",
    "Dataset",
    "DegenerateMomentError",
    "DegenerateOutcomeError",
    "DegenerateTreatmentError",
    "DerivedRule",
    "DgpSpec",
    "DmlConfig",
    "DmlEstimate",
    "DoubleLassoError",
    "EmptyDatasetError",
    "EncodingError",
    "EncodingSpec",
    "FitFailure",
    "InteractionRule",
    "LassoFit",
    "MULTIPLICITY_NOTE",
    "NuisanceArtifacts",
    "NumericRule",
    "ParseError",
    "PenaltyConfig",
    "REPORT_VERSION",
    "RankDeficiencyError",
    "RawTable",
    "RefitResult",
    "SchemaError",
    "StudySpec",
    "TruthRecord",
    "WeakInstrumentError",
    "confounded_benchmark",
    "coverage_reports_from_yaml",
    "coverage_reports_to_yaml",
    "cv_lambda",
    "dataset_checksum",
    "dml_fit",
    "dml_linear",
    "dml_logit",
    "dml_multi",
    "encode",
    "encoding_spec_from_yaml",
    "encoding_spec_to_yaml",
    "gen_dgp",
    "interact",
    "iv_logit_objective",
    "lambda_max_wls",
    "lasso_logistic",
    "lasso_wls",
    "link",
    "link_deriv",
    "load_dataset",
    "load_table",
    "logistic_lasso_loadings",
    "naive_fit",
    "naive_linear",
    "naive_logit",
    "neg_loglik",
    "null_logistic_benchmark",
    "percent_labels",
    "plugin_lambda",
    "post_refit",
    "render_coverage_reports",
    "render_fit_results",
    "run_replications",
    "run_study",
    "save_dataset",
    "sidecar_path",
    "soft_threshold",
    "solve_spd",
    "sparse_linear_benchmark",
    "sparse_logistic_benchmark",
    "study_spec_from_yaml",
    "study_spec_to_yaml",
    "summarize",
    "synthetic_survey_schema",
    "synthetic_survey_table",
    "wls_fit",
    "wls_fit_rescued",
    "wls_lasso_loadings",
]
