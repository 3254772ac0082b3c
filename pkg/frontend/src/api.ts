// Thin typed client for the loosekey service. `fetchFn` is injectable so the
// logic is testable against recorded fixtures without a live server.

import type {
  EditPayload,
  GeneratePayload,
  GenerateResponse,
  JobRecord,
  MotionDoc,
  SkeletonResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  status: number;
  details: string[];

  constructor(status: number, details: string[]) {
    super(`HTTP ${status}: ${details.join("; ")}`);
    this.status = status;
    this.details = details;
  }
}

export class StudioApi {
  baseUrl: string;
  fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn: FetchLike = fetch.bind(globalThis)) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const detail = body?.detail;
      const details = Array.isArray(detail) ? detail : [String(detail ?? resp.statusText)];
      throw new ApiError(resp.status, details);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  health(): Promise<{ status: string; checkpoint: string }> {
    return this.request("/health");
  }

  skeleton(): Promise<SkeletonResponse> {
    return this.request("/skeleton");
  }

  generate(payload: GeneratePayload): Promise<GenerateResponse> {
    return this.post("/generate", payload);
  }

  edit(payload: EditPayload): Promise<GenerateResponse> {
    return this.post("/edit", payload);
  }

  job(jobId: string): Promise<JobRecord> {
    return this.request(`/jobs/${jobId}`);
  }

  motion(motionId: string): Promise<MotionDoc> {
    return this.request(`/motions/${motionId}`);
  }
}

export interface PollOptions {
  intervalMs?: number;
  maxBackoffMs?: number;
  timeoutMs?: number;
  onStatus?: (status: string) => void; // surfaces "reconnecting" on network loss
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

/**
 * Poll a job until done/failed. Network errors retry with exponential backoff
 * (the status callback reports "reconnecting" so the UI can show a chip).
 */
export async function pollJob(api: StudioApi, jobId: string, opts: PollOptions = {}): Promise<JobRecord> {
  const interval = opts.intervalMs ?? 250;
  const maxBackoff = opts.maxBackoffMs ?? 4000;
  const timeout = opts.timeoutMs ?? 120_000;
  const sleep = opts.sleep ?? defaultSleep;
  const started = Date.now();
  let backoff = interval;
  for (;;) {
    if (Date.now() - started > timeout) throw new Error(`job ${jobId} timed out`);
    let record: JobRecord | null = null;
    try {
      record = await api.job(jobId);
      backoff = interval;
    } catch (err) {
      if (err instanceof ApiError) throw err; // server answered: real failure
      opts.onStatus?.("reconnecting"); // network loss: retry with backoff
      backoff = Math.min(backoff * 2, maxBackoff);
    }
    if (record) {
      opts.onStatus?.(record.status);
      if (record.status === "done") return record;
      if (record.status === "failed") throw new Error(record.error ?? "job failed");
    }
    await sleep(backoff);
  }
}
