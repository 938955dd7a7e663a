"""Sentencing-disparity analysis toolkit.

Pipeline: ingest de-identified record tables, build similarly situated
cohorts, estimate 2x2 effect sizes with confidence intervals and an
independence test, synthesize guarded evidence reports, and evaluate those
reports with a rubric-driven judge.
"""

__version__ = "0.1.0"

from .errors import (
    AssemblyError,
    BudgetError,
    ConfigurationError,
    DegenerateGroupError,
    DegenerateTableError,
    DisparityError,
    FeaturizationError,
    HarnessError,
    IntegrityError,
    NotFoundError,
    PredicateError,
    QueryError,
    RowError,
    SchemaError,
    ScoringError,
    StructureError,
    TransportError,
    UndefinedEstimateError,
    UndefinedSimilarityError,
)
from .records import (
    CommitmentRecord,
    DemographicsRecord,
    JoinedPerson,
    RecordStore,
    data_dictionary,
    deidentify,
    export_store,
    ingest_tables,
    load_store,
)
from .fixtures import FixtureSpec, generate_fixture
from .query import (
    And,
    Code,
    Cohort,
    ExclusionRule,
    Expr,
    FilterQuery,
    GroupPair,
    Not,
    Or,
    Outcome,
    apply_filter,
    expr_from_json_dict,
    outcome_counts,
    parse_expr,
    parse_outcome,
    split_by_ethnicity,
)
from .vectors import (
    CaseVector,
    FeatureConfig,
    FeatureRule,
    default_feature_config,
    featurize,
    featurize_store,
    find_similar,
    similarity,
)
from .stats import (
    BiasAnalysis,
    ChiSquareResult,
    ContingencyTable,
    EffectEstimate,
    MethodAgreement,
    TemplateSpace,
    chi_square,
    chi_square_p_value,
    contingency_table,
    normal_quantile,
    odds_ratio,
    relative_risk,
    analyze_pair,
    run_analysis,
    template_space_size,
)
from .llm import (
    CompletionRequest,
    CompletionResponse,
    HttpTransport,
    LlmClient,
    MockTransport,
    client_from_env,
)
from .report import (
    GuardrailResult,
    GuardrailViolation,
    PromptBundle,
    Report,
    SECTION_HEADINGS,
    assemble_prompt,
    check_guardrails,
    render_fallback,
    synthesize_report,
)
from .evaluation import (
    DeterministicJudgeClient,
    EvaluationSummary,
    Rubric,
    RubricScores,
    ScoreDistribution,
    ScriptedJudgeClient,
    HumanScores,
    TrialSet,
    aggregate,
    compare_to_human,
    default_rubric,
    ingest_human_scores,
    parse_score,
    run_trials,
    score_report,
)
from .util import canonical_json, now_iso
