/** JSON payload shapes of the /v1 API, mirrored field for field. */

export interface TableJson {
  a: number;
  b: number;
  c: number;
  d: number;
}

export interface EffectEstimateJson {
  kind: "odds_ratio" | "relative_risk";
  estimate: number;
  ci_low: number;
  ci_high: number;
  se_log: number;
  alpha: number;
  correction_applied: boolean;
  biased: boolean;
}

export interface ChiSquareJson {
  statistic: number;
  p_value: number;
  df: number;
  min_expected_cell: number;
}

export interface AgreementJson {
  /** three letters, one per method (OR, RR, chi-square): B / N / U */
  pattern: string;
  aligned: boolean;
  description: string;
}

export interface AdequacyJson {
  adequate: boolean;
  n_comparison: number;
  n_reference: number;
  balance_ratio: number;
  warnings: string[];
}

export interface AnalysisJson {
  table: TableJson;
  chi_square: ChiSquareJson;
  agreement: AgreementJson;
  alpha: number;
  zero_cell_correction: boolean;
  comparison_label: string;
  reference_label: string;
  outcome_label: string;
  odds_ratio: EffectEstimateJson | null;
  or_unavailable: string | null;
  relative_risk: EffectEstimateJson | null;
  rr_unavailable: string | null;
  adequacy: AdequacyJson | null;
  excluded_counts: Record<string, number>;
  created_at: string;
  schema_version: number;
}

export interface GuardrailViolationJson {
  rule: string;
  detail: string;
}

export interface GuardrailsJson {
  sections_complete: boolean;
  numbers_traceable: boolean;
  attribution_clean: boolean;
  limitation_disclosed: boolean;
  passed: boolean;
  violations: GuardrailViolationJson[];
}

export interface ReportJson {
  text: string;
  source: "fallback" | "model";
  model: string;
  prompt_hash: string;
  created_at: string;
  guardrails: GuardrailsJson;
  clean: boolean;
}

export interface CohortJson {
  hashed_ids: string[];
  query: Record<string, unknown>;
  excluded_counts: Record<string, number>;
  size: number;
}

export interface SimilarResultJson {
  hashed_id: string;
  score: number;
}

export interface SimilarResponseJson {
  target_id: string;
  metric: string;
  results: SimilarResultJson[];
}

export interface HealthJson {
  status: string;
  version: string;
  snapshot_date: string;
  n_people: number;
  counties: string[];
  ethnicities: string[];
}

export type JobStatus = "pending" | "running" | "done" | "failed";

export interface JobRecord {
  job_id: string;
  kind: string;
  status: JobStatus;
  params: Record<string, unknown>;
  result: Record<string, unknown> | null;
  error: string | null;
  created_at: string;
  updated_at: string;
}

export interface JobTicket {
  job_id: string;
  status: JobStatus;
}

export interface ReportJobResult {
  analysis: AnalysisJson;
  report: ReportJson;
}

/** Exclusion rule as the filter JSON carries it. */
export interface ExclusionRuleJson {
  name: string;
  kind: "prior_code" | "missing_field";
  value: string;
}

export interface FilterJson {
  county?: string;
  code_expr?: string | Record<string, unknown>;
  sentence_types?: string[];
  offense_after?: string;
  offense_before?: string;
  require_prior_record?: boolean;
  exclusions?: ExclusionRuleJson[];
}

export interface AnalysisRequest {
  filter: FilterJson;
  comparison: string;
  reference: string;
  outcome: string;
  alpha?: number;
  zero_cell_correction?: boolean;
}

export interface ApiErrorBody {
  error: string;
  message: string;
  [extra: string]: unknown;
}
