/**
 * View models for an analysis result. Every badge and number here is read
 * straight out of the API payload; the client never recomputes statistics,
 * so a disagreement between badge and interval can only come from the
 * service itself.
 */

import { escapeHtml } from "./html.js";
import type { AdequacyJson, AnalysisJson, EffectEstimateJson } from "./types.js";

export type Significance = "biased" | "null" | "unavailable";

export interface MethodCard {
  method: string;
  /** B, N or U: the method's letter in the agreement pattern. */
  letter: string;
  significance: Significance;
  badge: string;
  point: string | null;
  interval: string | null;
  detail: string;
  correctionApplied: boolean;
  unavailableReason: string | null;
}

function significanceFromLetter(letter: string): Significance {
  switch (letter) {
    case "B":
      return "biased";
    case "N":
      return "null";
    default:
      return "unavailable";
  }
}

const BADGE_TEXT: Record<Significance, string> = {
  biased: "disparity indicated",
  null: "no disparity indicated",
  unavailable: "unavailable",
};

function fmt(x: number, digits = 2): string {
  return x.toFixed(digits);
}

function ratioCard(
  method: string,
  letter: string,
  est: EffectEstimateJson | null,
  reason: string | null,
): MethodCard {
  const significance = significanceFromLetter(letter);
  if (est === null) {
    return {
      method,
      letter,
      significance,
      badge: BADGE_TEXT[significance],
      point: null,
      interval: null,
      detail: reason ?? "not computed",
      correctionApplied: false,
      unavailableReason: reason,
    };
  }
  const interval = `${fmt(est.ci_low)} to ${fmt(est.ci_high)}`;
  const pct = ((1 - est.alpha) * 100).toFixed(0);
  return {
    method,
    letter,
    significance,
    badge: BADGE_TEXT[significance],
    point: fmt(est.estimate),
    interval,
    detail: `${fmt(est.estimate)} (${pct}% CI ${interval})`,
    correctionApplied: est.correction_applied,
    unavailableReason: null,
  };
}

/** Exactly three cards, in pattern-letter order: OR, RR, chi-square. */
export function methodCards(analysis: AnalysisJson): MethodCard[] {
  const pattern = analysis.agreement.pattern;
  const orCard = ratioCard(
    "odds ratio",
    pattern.charAt(0),
    analysis.odds_ratio,
    analysis.or_unavailable,
  );
  const rrCard = ratioCard(
    "relative risk",
    pattern.charAt(1),
    analysis.relative_risk,
    analysis.rr_unavailable,
  );
  const chi = analysis.chi_square;
  const chiLetter = pattern.charAt(2);
  const chiSignificance = significanceFromLetter(chiLetter);
  const chiCard: MethodCard = {
    method: "chi-square",
    letter: chiLetter,
    significance: chiSignificance,
    badge: BADGE_TEXT[chiSignificance],
    point: fmt(chi.statistic),
    interval: null,
    detail: `${fmt(chi.statistic)} (p = ${chi.p_value.toFixed(4)}, df = ${chi.df})`,
    correctionApplied: false,
    unavailableReason: null,
  };
  return [orCard, rrCard, chiCard];
}

export type BannerLevel = "pass" | "warn" | "none";

export interface AdequacyBanner {
  level: BannerLevel;
  headline: string;
  /** Every warning the service raised, verbatim. Nothing is filtered. */
  warnings: string[];
}

export function adequacyBanner(adequacy: AdequacyJson | null): AdequacyBanner {
  if (adequacy === null) {
    return { level: "none", headline: "no group balance check for this run", warnings: [] };
  }
  if (adequacy.adequate) {
    return {
      level: "pass",
      headline:
        `group sizes ${adequacy.n_comparison} vs ${adequacy.n_reference} ` +
        `pass the balance checks`,
      warnings: [...adequacy.warnings],
    };
  }
  return {
    level: "warn",
    headline:
      `group sizes ${adequacy.n_comparison} vs ${adequacy.n_reference} ` +
      `fail one or more balance checks`,
    warnings: [...adequacy.warnings],
  };
}

export function alignmentStatement(analysis: AnalysisJson): string {
  const { pattern, description } = analysis.agreement;
  return `Pattern ${pattern}: ${description}`;
}

export interface TableView {
  outcomeLabel: string;
  comparisonLabel: string;
  referenceLabel: string;
  rows: Array<{ group: string; event: number; nonEvent: number; total: number }>;
}

export function contingencyView(analysis: AnalysisJson): TableView {
  const { a, b, c, d } = analysis.table;
  return {
    outcomeLabel: analysis.outcome_label,
    comparisonLabel: analysis.comparison_label,
    referenceLabel: analysis.reference_label,
    rows: [
      { group: analysis.comparison_label, event: a, nonEvent: b, total: a + b },
      { group: analysis.reference_label, event: c, nonEvent: d, total: c + d },
    ],
  };
}

export function renderResultView(analysis: AnalysisJson): string {
  const table = contingencyView(analysis);
  const banner = adequacyBanner(analysis.adequacy);
  const cards = methodCards(analysis);
  const parts: string[] = [];

  parts.push(`<section class="result-view">`);

  parts.push(`<div class="banner banner-${banner.level}">`);
  parts.push(`<p>${escapeHtml(banner.headline)}</p>`);
  if (banner.warnings.length > 0) {
    parts.push(`<ul class="adequacy-warnings">`);
    for (const warning of banner.warnings) {
      parts.push(`<li>${escapeHtml(warning)}</li>`);
    }
    parts.push(`</ul>`);
  }
  parts.push(`</div>`);

  parts.push(`<table class="contingency">`);
  parts.push(
    `<thead><tr><th></th><th>${escapeHtml(table.outcomeLabel)}</th>` +
      `<th>not ${escapeHtml(table.outcomeLabel)}</th><th>total</th></tr></thead>`,
  );
  parts.push(`<tbody>`);
  for (const row of table.rows) {
    parts.push(
      `<tr><th>${escapeHtml(row.group)}</th><td>${row.event}</td>` +
        `<td>${row.nonEvent}</td><td>${row.total}</td></tr>`,
    );
  }
  parts.push(`</tbody></table>`);

  parts.push(`<div class="method-cards">`);
  for (const card of cards) {
    parts.push(`<div class="method-card method-${card.significance}">`);
    parts.push(`<h3>${escapeHtml(card.method)}</h3>`);
    parts.push(`<span class="badge badge-${card.significance}">${escapeHtml(card.badge)}</span>`);
    parts.push(`<p>${escapeHtml(card.detail)}</p>`);
    if (card.correctionApplied) {
      parts.push(`<p class="correction-flag">continuity correction of 0.5 applied</p>`);
    }
    if (card.unavailableReason !== null) {
      parts.push(`<p class="unavailable-reason">${escapeHtml(card.unavailableReason)}</p>`);
    }
    parts.push(`</div>`);
  }
  parts.push(`</div>`);

  parts.push(`<p class="alignment">${escapeHtml(alignmentStatement(analysis))}</p>`);
  parts.push(`</section>`);
  return parts.join("\n");
}
