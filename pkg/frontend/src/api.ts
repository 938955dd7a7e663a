/**
 * Typed client for the /v1 API. The UI never computes statistics; every
 * number it shows comes back through these calls.
 */

import { DEFAULT_API_BASE } from "./config.js";
import type {
  AnalysisJson,
  AnalysisRequest,
  ApiErrorBody,
  CohortJson,
  FilterJson,
  HealthJson,
  JobRecord,
  JobTicket,
  SimilarResponseJson,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly kind: string,
    message: string,
    readonly body: ApiErrorBody,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class JobFailedError extends Error {
  constructor(readonly job: JobRecord) {
    super(job.error ?? `job ${job.job_id} failed`);
    this.name = "JobFailedError";
  }
  /** Audit id for the error card: the job id locates the stored record. */
  get auditId(): string {
    return this.job.job_id;
  }
}

/**
 * How the UI should surface an error: 4xx validation problems attach to a
 * form field inline; 5xx (and network failures) get a retryable banner.
 */
export interface ErrorDisposition {
  kind: "field" | "banner";
  field?: string;
  retryable: boolean;
  message: string;
}

export function errorDisposition(err: unknown): ErrorDisposition {
  if (err instanceof ApiError) {
    if (err.status >= 500) {
      return { kind: "banner", retryable: true, message: err.message };
    }
    return {
      kind: "field",
      field: fieldForMessage(err.message),
      retryable: false,
      message: err.message,
    };
  }
  if (err instanceof JobFailedError) {
    return { kind: "banner", retryable: true, message: err.message };
  }
  return { kind: "banner", retryable: true, message: String(err) };
}

function fieldForMessage(message: string): string | undefined {
  if (message.includes("ethnicity label")) return "comparison";
  if (message.includes("outcome")) return "outcome";
  if (message.includes("alpha")) return "alpha";
  if (message.includes("expression") || message.includes("code")) return "codeGroups";
  const missing = /missing required field '([a-z_]+)'/.exec(message);
  if (missing) return missing[1];
  return undefined;
}

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchImpl: typeof fetch;

  constructor(baseUrl: string = DEFAULT_API_BASE, fetchImpl: typeof fetch = fetch) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.base}${path}`, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    let parsed: unknown;
    try {
      parsed = JSON.parse(text);
    } catch {
      throw new ApiError(response.status, "BadResponse", text.slice(0, 200), {
        error: "BadResponse",
        message: text.slice(0, 200),
      });
    }
    if (!response.ok) {
      const errBody = parsed as ApiErrorBody;
      throw new ApiError(
        response.status,
        errBody.error ?? "Error",
        errBody.message ?? response.statusText,
        errBody,
      );
    }
    return parsed as T;
  }

  health(): Promise<HealthJson> {
    return this.request("GET", "/v1/health");
  }

  spec(): Promise<{ service: string; version: string; endpoints: unknown[] }> {
    return this.request("GET", "/v1/spec");
  }

  dataDictionary(): Promise<{ tables: Record<string, unknown> }> {
    return this.request("GET", "/v1/data_dictionary");
  }

  cohorts(filter: FilterJson): Promise<CohortJson> {
    return this.request("POST", "/v1/cohorts", { filter });
  }

  similar(body: { target_id: string; filter?: FilterJson; metric?: string; k?: number }): Promise<SimilarResponseJson> {
    return this.request("POST", "/v1/similar", body);
  }

  analyses(body: AnalysisRequest): Promise<AnalysisJson> {
    return this.request("POST", "/v1/analyses", body);
  }

  startReport(body: AnalysisRequest & { source?: "fallback" | "model"; context?: string[] }): Promise<JobTicket> {
    return this.request("POST", "/v1/reports", body);
  }

  startEvaluation(body: {
    report_text: string;
    n_trials?: number;
    judge?: string;
    seed?: string;
    label?: string;
    analysis?: AnalysisJson;
  }): Promise<JobTicket> {
    return this.request("POST", "/v1/evaluations", body);
  }

  job(jobId: string): Promise<JobRecord> {
    return this.request("GET", `/v1/jobs/${jobId}`);
  }

  /** Poll until the job settles; resolves on done, throws JobFailedError on failed. */
  async pollJob(jobId: string, options: PollOptions = {}): Promise<JobRecord> {
    const interval = options.intervalMs ?? 250;
    const deadline = Date.now() + (options.timeoutMs ?? 60_000);
    for (;;) {
      const record = await this.job(jobId);
      if (record.status === "done") return record;
      if (record.status === "failed") throw new JobFailedError(record);
      if (Date.now() >= deadline) {
        throw new Error(`job ${jobId} still ${record.status} after timeout`);
      }
      await sleep(interval);
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
