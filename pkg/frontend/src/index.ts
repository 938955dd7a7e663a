export { DEFAULT_API_BASE } from "./config.js";
export * from "./types.js";
export {
  ApiClient,
  ApiError,
  JobFailedError,
  errorDisposition,
  type ErrorDisposition,
  type PollOptions,
} from "./api.js";
export {
  type ChipGroup,
  type ExprNode,
  ExprSyntaxError,
  exprToChips,
  exprToText,
  isValidCode,
  parseExpr,
  serializeChips,
} from "./queryExpr.js";
export {
  type FieldChange,
  type FieldErrors,
  type ScenarioContext,
  type ScenarioForm,
  deserializeScenario,
  emptyScenario,
  isSubmittable,
  normalizeScenario,
  scenarioDiff,
  serializeScenario,
  validateScenario,
} from "./scenario.js";
export {
  type HistoryEntry,
  ScenarioHistory,
  type StorageLike,
  memoryStorage,
} from "./history.js";
export {
  type AdequacyBanner,
  type BannerLevel,
  type MethodCard,
  type Significance,
  type TableView,
  adequacyBanner,
  alignmentStatement,
  contingencyView,
  methodCards,
  renderResultView,
} from "./resultView.js";
export {
  type GuardrailCallout,
  type JobErrorCard,
  type ReportPane,
  type ReportSection,
  SECTION_HEADINGS,
  guardrailCallouts,
  jobErrorCard,
  renderJobErrorCard,
  renderReportPane,
  reportPane,
  reportSections,
} from "./reportPane.js";
export { escapeHtml, slugify } from "./html.js";
