/**
 * Scenario form model: everything the query builder screen captures, plus
 * the round trip to and from an analysis request. Serialization is the
 * source of truth; submit stays disabled until the form serializes cleanly.
 */

import {
  type ChipGroup,
  isValidCode,
  parseExpr,
  exprToChips,
  serializeChips,
} from "./queryExpr.js";
import type { AnalysisRequest, ExclusionRuleJson, FilterJson } from "./types.js";

export interface ScenarioForm {
  county: string;
  /** Offense-code chips: groups are ANDed, chips within a group are ORed. */
  codeGroups: ChipGroup[];
  sentenceTypes: string[];
  /** Prior-record exclusion toggles, one per code; each maps to a prior_code rule. */
  excludePriorCodes: string[];
  requirePriorRecord: boolean;
  comparison: string;
  reference: string;
  outcome: string;
  alpha: number;
  zeroCellCorrection: boolean;
  /** Rules beyond the toggles (e.g. missing_field), passed through untouched. */
  extraExclusions: ExclusionRuleJson[];
}

export function emptyScenario(): ScenarioForm {
  return {
    county: "",
    codeGroups: [],
    sentenceTypes: [],
    excludePriorCodes: [],
    requirePriorRecord: false,
    comparison: "",
    reference: "",
    outcome: "",
    alpha: 0.05,
    zeroCellCorrection: true,
    extraExclusions: [],
  };
}

export interface ScenarioContext {
  counties: string[];
  ethnicities: string[];
}

export type FieldErrors = Partial<Record<keyof ScenarioForm, string>>;

/**
 * Client-side validation mirrors what the service would reject, so the
 * inline errors match the 400s the API would have returned.
 */
export function validateScenario(form: ScenarioForm, ctx: ScenarioContext): FieldErrors {
  const errors: FieldErrors = {};
  if (form.county && !ctx.counties.includes(form.county)) {
    errors.county = `unknown county '${form.county}'`;
  }
  for (const group of form.codeGroups) {
    for (const chip of group.chips) {
      if (chip.trim() && !isValidCode(chip)) {
        errors.codeGroups = `invalid offense code '${chip.trim()}'`;
      }
    }
  }
  for (const code of form.excludePriorCodes) {
    if (!isValidCode(code)) {
      errors.excludePriorCodes = `invalid prior code '${code}'`;
    }
  }
  if (!form.comparison) {
    errors.comparison = "comparison group is required";
  } else if (ctx.ethnicities.length > 0 && !ctx.ethnicities.includes(form.comparison)) {
    errors.comparison = `unknown ethnicity label '${form.comparison}'`;
  }
  if (!form.reference) {
    errors.reference = "reference group is required";
  } else if (ctx.ethnicities.length > 0 && !ctx.ethnicities.includes(form.reference)) {
    errors.reference = `unknown ethnicity label '${form.reference}'`;
  }
  if (form.comparison && form.reference && form.comparison === form.reference) {
    errors.reference = "reference group must differ from the comparison group";
  }
  if (!form.outcome.trim()) {
    errors.outcome = "outcome is required";
  }
  if (!(form.alpha > 0 && form.alpha < 1)) {
    errors.alpha = "alpha must be strictly between 0 and 1";
  }
  return errors;
}

export function isSubmittable(form: ScenarioForm, ctx: ScenarioContext): boolean {
  return Object.keys(validateScenario(form, ctx)).length === 0;
}

function exclusionRules(form: ScenarioForm): ExclusionRuleJson[] {
  const fromToggles: ExclusionRuleJson[] = form.excludePriorCodes.map((code) => {
    const normalized = code.trim().toUpperCase();
    return { name: `prior ${normalized}`, kind: "prior_code", value: normalized };
  });
  return [...fromToggles, ...form.extraExclusions];
}

export function serializeScenario(form: ScenarioForm): AnalysisRequest {
  const filter: FilterJson = {};
  if (form.county.trim()) filter.county = form.county.trim();
  const expr = serializeChips(form.codeGroups);
  if (expr) filter.code_expr = expr;
  if (form.sentenceTypes.length > 0) filter.sentence_types = [...form.sentenceTypes];
  if (form.requirePriorRecord) filter.require_prior_record = true;
  const exclusions = exclusionRules(form);
  if (exclusions.length > 0) filter.exclusions = exclusions;
  return {
    filter,
    comparison: form.comparison,
    reference: form.reference,
    outcome: form.outcome,
    alpha: form.alpha,
    zero_cell_correction: form.zeroCellCorrection,
  };
}

/**
 * Rebuild form state from a request. Prior-code toggles are recovered from
 * exclusion rules whose name matches the toggle convention; anything else
 * lands in extraExclusions. deserialize(serialize(form)) reproduces the
 * normalized form (codes uppercased, empty groups dropped).
 */
export function deserializeScenario(request: AnalysisRequest): ScenarioForm {
  const form = emptyScenario();
  const filter = request.filter ?? {};
  form.county = filter.county ?? "";
  if (filter.code_expr) {
    if (typeof filter.code_expr !== "string") {
      throw new Error("expression does not fit the chip builder: structured code_expr");
    }
    const chips = exprToChips(parseExpr(filter.code_expr));
    if (chips === null) {
      throw new Error(`expression does not fit the chip builder: ${filter.code_expr}`);
    }
    form.codeGroups = chips;
  }
  form.sentenceTypes = filter.sentence_types ? [...filter.sentence_types] : [];
  form.requirePriorRecord = filter.require_prior_record === true;
  for (const rule of filter.exclusions ?? []) {
    if (rule.kind === "prior_code" && rule.name === `prior ${rule.value}`) {
      form.excludePriorCodes.push(rule.value);
    } else {
      form.extraExclusions.push({ ...rule });
    }
  }
  form.comparison = request.comparison;
  form.reference = request.reference;
  form.outcome = request.outcome;
  if (request.alpha !== undefined) form.alpha = request.alpha;
  if (request.zero_cell_correction !== undefined) {
    form.zeroCellCorrection = request.zero_cell_correction;
  }
  return form;
}

/** Normal form of a scenario: the result of a serialize/deserialize round trip. */
export function normalizeScenario(form: ScenarioForm): ScenarioForm {
  return deserializeScenario(serializeScenario(form));
}

export interface FieldChange {
  field: string;
  from: string;
  to: string;
}

function describe(value: unknown): string {
  if (Array.isArray(value)) {
    if (value.length === 0) return "(none)";
    return value
      .map((v) => (typeof v === "object" && v !== null ? JSON.stringify(v) : String(v)))
      .join(", ");
  }
  if (typeof value === "object" && value !== null) return JSON.stringify(value);
  if (value === "" || value === undefined) return "(none)";
  return String(value);
}

function describeGroups(groups: ChipGroup[]): string {
  if (groups.length === 0) return "(none)";
  return groups.map((g) => (g.chips.length > 1 ? `(${g.chips.join(" OR ")})` : g.chips.join(""))).join(" AND ");
}

/**
 * Field-by-field diff between two scenarios, for the run-history view.
 * Exclusion-toggle changes show up as their own entry so the UI can
 * highlight them.
 */
export function scenarioDiff(before: ScenarioForm, after: ScenarioForm): FieldChange[] {
  const a = normalizeScenario(before);
  const b = normalizeScenario(after);
  const changes: FieldChange[] = [];
  const push = (field: string, from: string, to: string) => {
    if (from !== to) changes.push({ field, from, to });
  };
  push("county", describe(a.county), describe(b.county));
  push("codeGroups", describeGroups(a.codeGroups), describeGroups(b.codeGroups));
  push("sentenceTypes", describe(a.sentenceTypes), describe(b.sentenceTypes));
  push("excludePriorCodes", describe(a.excludePriorCodes), describe(b.excludePriorCodes));
  push("requirePriorRecord", describe(a.requirePriorRecord), describe(b.requirePriorRecord));
  push("comparison", describe(a.comparison), describe(b.comparison));
  push("reference", describe(a.reference), describe(b.reference));
  push("outcome", describe(a.outcome), describe(b.outcome));
  push("alpha", describe(a.alpha), describe(b.alpha));
  push("zeroCellCorrection", describe(a.zeroCellCorrection), describe(b.zeroCellCorrection));
  push("extraExclusions", describe(a.extraExclusions), describe(b.extraExclusions));
  return changes;
}
