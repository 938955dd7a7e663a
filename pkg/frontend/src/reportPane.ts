/**
 * View models for the synthesized report: the four fixed sections with
 * anchors, provenance (who generated it, with which model), and guardrail
 * callouts. Every violation the service flags is rendered; there is no
 * path that hides one.
 */

import { escapeHtml, slugify } from "./html.js";
import type { GuardrailViolationJson, JobRecord, ReportJson } from "./types.js";

export const SECTION_HEADINGS = [
  "Executive Summary",
  "Findings",
  "Analytical Constraints and Considerations",
  "Key Terms and Methodology",
] as const;

export interface ReportSection {
  heading: string;
  anchor: string;
  body: string;
}

/** Split on the fixed headings, case-insensitively, in document order. */
export function reportSections(text: string): ReportSection[] {
  const lowered = text.toLowerCase();
  const marks: Array<{ pos: number; heading: string }> = [];
  for (const heading of SECTION_HEADINGS) {
    const pos = lowered.indexOf(heading.toLowerCase());
    if (pos >= 0) marks.push({ pos, heading });
  }
  marks.sort((a, b) => a.pos - b.pos);
  return marks.map((mark, i) => {
    const next = marks[i + 1];
    const end = next === undefined ? text.length : next.pos;
    const body = text
      .slice(mark.pos + mark.heading.length, end)
      .replace(/^[ :\n#]+|[ :\n#]+$/g, "");
    return { heading: mark.heading, anchor: slugify(mark.heading), body };
  });
}

export interface GuardrailCallout {
  rule: string;
  severity: "error";
  text: string;
}

/**
 * One callout per violation, never filtered. The detail is included
 * verbatim, so a numbers_traceable violation quotes the numeral that
 * could not be traced.
 */
export function guardrailCallouts(report: ReportJson): GuardrailCallout[] {
  return report.guardrails.violations.map((violation: GuardrailViolationJson) => ({
    rule: violation.rule,
    severity: "error" as const,
    text: `${violation.rule}: ${violation.detail}`,
  }));
}

export interface ReportPane {
  sections: ReportSection[];
  callouts: GuardrailCallout[];
  clean: boolean;
  provenance: { source: string; model: string; promptHash: string; createdAt: string };
}

export function reportPane(report: ReportJson): ReportPane {
  return {
    sections: reportSections(report.text),
    callouts: guardrailCallouts(report),
    clean: report.clean,
    provenance: {
      source: report.source,
      model: report.model,
      promptHash: report.prompt_hash,
      createdAt: report.created_at,
    },
  };
}

export interface JobErrorCard {
  auditId: string;
  message: string;
}

/** Error card for a failed report job; the job id doubles as the audit id. */
export function jobErrorCard(job: JobRecord): JobErrorCard {
  return { auditId: job.job_id, message: job.error ?? "job failed" };
}

export function renderReportPane(report: ReportJson): string {
  const pane = reportPane(report);
  const parts: string[] = [];
  parts.push(`<article class="report-pane">`);

  parts.push(`<p class="provenance">`);
  parts.push(
    escapeHtml(
      `generated by ${pane.provenance.source} (model ${pane.provenance.model}, ` +
        `prompt ${pane.provenance.promptHash.slice(0, 12)})`,
    ),
  );
  parts.push(`</p>`);

  for (const callout of pane.callouts) {
    parts.push(
      `<div class="callout callout-${callout.severity}" data-rule="${escapeHtml(callout.rule)}">` +
        `${escapeHtml(callout.text)}</div>`,
    );
  }
  if (pane.callouts.length === 0 && pane.clean) {
    parts.push(`<div class="callout callout-pass">all guardrail checks passed</div>`);
  }

  for (const section of pane.sections) {
    parts.push(`<section id="${section.anchor}">`);
    parts.push(`<h2>${escapeHtml(section.heading)}</h2>`);
    for (const para of section.body.split(/\n{2,}/)) {
      if (para.trim()) parts.push(`<p>${escapeHtml(para.trim())}</p>`);
    }
    parts.push(`</section>`);
  }

  parts.push(`</article>`);
  return parts.join("\n");
}

export function renderJobErrorCard(job: JobRecord): string {
  const card = jobErrorCard(job);
  return (
    `<div class="error-card">` +
    `<p>${escapeHtml(card.message)}</p>` +
    `<p class="audit-id">audit id: ${escapeHtml(card.auditId)}</p>` +
    `</div>`
  );
}
