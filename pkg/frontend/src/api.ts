/**
 * HTTP client for the pipeline service.
 *
 * Every method maps to exactly one documented route; there are no hidden
 * calls and no client-side recomputation of service results. Long-running
 * endpoints return a job envelope which `pollJob` follows to a terminal
 * state with exponential backoff.
 */

import type {
  AlignmentReport,
  ApiError,
  DatasetManifest,
  DiversityReport,
  Job,
  PromptRevision,
  SessionView,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly kind: string,
    public readonly detail: string,
  ) {
    super(`${kind}: ${detail}`);
    this.name = "ServiceError";
  }
}

export interface PollOptions {
  baseDelayMs?: number;
  maxDelayMs?: number;
  timeoutMs?: number;
}

const POLL_DEFAULTS: Required<PollOptions> = {
  baseDelayMs: 50,
  maxDelayMs: 1000,
  timeoutMs: 60_000,
};

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/** Encode raw bytes as standard base64 (browser-safe, chunked). */
export function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  const chunk = 0x8000;
  for (let i = 0; i < bytes.length; i += chunk) {
    binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return btoa(binary);
}

export class StudioClient {
  constructor(public readonly baseUrl: string) {}

  // --- generic plumbing ---

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await fetch(this.baseUrl + path, init);
    if (!response.ok) {
      let error: ApiError = { kind: "Unknown", detail: response.statusText };
      try {
        error = ((await response.json()) as { error: ApiError }).error ?? error;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ServiceError(response.status, error.kind, error.detail);
    }
    return (await response.json()) as T;
  }

  // --- sessions ---

  async createSession(sketch: Uint8Array, note: string): Promise<SessionView> {
    return this.request<SessionView>("POST", "/sessions", {
      sketch_b64: bytesToBase64(sketch),
      user_note: note,
    });
  }

  async getSession(id: string): Promise<SessionView> {
    return this.request<SessionView>("GET", `/sessions/${id}`);
  }

  async describe(id: string): Promise<Job> {
    return this.request<Job>("POST", `/sessions/${id}/describe`, {});
  }

  async editDescription(id: string, text: string): Promise<PromptRevision> {
    const body = await this.request<{ revision: PromptRevision }>(
      "PATCH",
      `/sessions/${id}/description`,
      { text },
    );
    return body.revision;
  }

  async generateImages(id: string, count?: number): Promise<Job> {
    return this.request<Job>("POST", `/sessions/${id}/images`, count ? { count } : {});
  }

  async appendFeedback(id: string, text: string): Promise<Job> {
    return this.request<Job>("POST", `/sessions/${id}/feedback`, { text });
  }

  async selectImage(id: string, index: number, containsTextFlags: boolean[]): Promise<SessionView> {
    return this.request<SessionView>("POST", `/sessions/${id}/select-image`, {
      index,
      contains_text_flags: containsTextFlags,
    });
  }

  async generateMeshes(id: string): Promise<Job> {
    return this.request<Job>("POST", `/sessions/${id}/mesh`, {});
  }

  async selectMesh(id: string, index: number): Promise<SessionView> {
    return this.request<SessionView>("POST", `/sessions/${id}/select-mesh`, { index });
  }

  async postprocess(id: string): Promise<Job> {
    return this.request<Job>("POST", `/sessions/${id}/postprocess`, {});
  }

  exportUrl(id: string): string {
    return `${this.baseUrl}/sessions/${id}/export.stl`;
  }

  // --- blobs and jobs ---

  blobUrl(hash: string): string {
    return `${this.baseUrl}/blobs/${hash}`;
  }

  async fetchBlob(hash: string): Promise<ArrayBuffer> {
    const response = await fetch(this.blobUrl(hash));
    if (!response.ok) {
      throw new ServiceError(response.status, "NotFound", `no blob ${hash}`);
    }
    return response.arrayBuffer();
  }

  async getJob(id: string): Promise<Job> {
    return this.request<Job>("GET", `/jobs/${id}`);
  }

  /** Poll a job until it succeeds or fails; throws ServiceError on failure. */
  async pollJob(id: string, options: PollOptions = {}): Promise<Job> {
    const { baseDelayMs, maxDelayMs, timeoutMs } = { ...POLL_DEFAULTS, ...options };
    const deadline = Date.now() + timeoutMs;
    let delay = baseDelayMs;
    for (;;) {
      const job = await this.getJob(id);
      if (job.state === "failed") {
        const error = job.error ?? { kind: "Unknown", detail: "job failed" };
        throw new ServiceError(0, error.kind, error.detail);
      }
      if (job.state === "succeeded") {
        return job;
      }
      if (Date.now() >= deadline) {
        throw new ServiceError(0, "Timeout", `job ${id} still ${job.state}`);
      }
      await sleep(delay);
      delay = Math.min(delay * 1.5, maxDelayMs);
    }
  }

  // --- datasets and metrics ---

  async createDataset(
    entries: Array<{ sketch: string; description?: string }>,
    imagesPerSketch: number,
    baseDir?: string,
  ): Promise<{ dataset_id: string; job: Job }> {
    const body: Record<string, unknown> = { entries, images_per_sketch: imagesPerSketch };
    if (baseDir) {
      body.base_dir = baseDir;
    }
    return this.request("POST", "/datasets", body);
  }

  async datasetManifest(id: string): Promise<DatasetManifest> {
    return this.request<DatasetManifest>("GET", `/datasets/${id}/manifest`);
  }

  /** Datasets keep artifacts in their own store, served under the dataset. */
  datasetBlobUrl(datasetId: string, hash: string): string {
    return `${this.baseUrl}/datasets/${datasetId}/blobs/${hash}`;
  }

  async datasetDiversity(id: string, percentiles?: number[]): Promise<DiversityReport> {
    const body: Record<string, unknown> = {};
    if (percentiles) {
      body.percentiles = percentiles;
    }
    return this.request<DiversityReport>("POST", `/datasets/${id}/diversity`, body);
  }

  async alignment(records: object[]): Promise<AlignmentReport> {
    return this.request<AlignmentReport>("POST", "/metrics/alignment", { records });
  }

  async diversity(sets: object[], percentiles?: number[]): Promise<DiversityReport> {
    const body: Record<string, unknown> = { sets };
    if (percentiles) {
      body.percentiles = percentiles;
    }
    return this.request<DiversityReport>("POST", "/metrics/diversity", body);
  }

  async health(): Promise<{ status: string; mode: string }> {
    return this.request("GET", "/healthz");
  }
}
