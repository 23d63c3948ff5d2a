/**
 * REST client for the inpainting service.
 *
 * fetch is injectable so tests can stub the transport or point at a live
 * server without a browser.
 */

export interface UploadResponse {
  session_id: string;
  width: number;
  height: number;
}

export interface HealthResponse {
  status: "ok" | "degraded";
  checkpoint_id: string | null;
  uptime_s: number;
}

export interface InpaintOptions {
  coarseBackend?: string;
  shiftFraction?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = typeof fetch;

async function errorDetail(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: string };
    return body.detail ?? resp.statusText;
  } catch {
    return resp.statusText;
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = fetch,
  ) {}

  async health(): Promise<HealthResponse> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/v1/health`);
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    return (await resp.json()) as HealthResponse;
  }

  async uploadImage(png: Blob): Promise<UploadResponse> {
    const form = new FormData();
    form.append("image", png, "image.png");
    const resp = await this.fetchImpl(`${this.baseUrl}/api/v1/images`, {
      method: "POST",
      body: form,
    });
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    return (await resp.json()) as UploadResponse;
  }

  /** POST the mask PNG; resolves to the result PNG bytes. */
  async inpaint(
    sessionId: string,
    maskPng: Blob,
    options: InpaintOptions = {},
  ): Promise<Blob> {
    const form = new FormData();
    form.append("mask", maskPng, "mask.png");
    if (options.coarseBackend) form.append("coarse_backend", options.coarseBackend);
    if (options.shiftFraction !== undefined) {
      form.append("shift_fraction", String(options.shiftFraction));
    }
    const resp = await this.fetchImpl(
      `${this.baseUrl}/api/v1/sessions/${encodeURIComponent(sessionId)}/inpaint`,
      { method: "POST", body: form },
    );
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    return await resp.blob();
  }

  /** Make the last result the session's new source for iterative editing. */
  async promote(sessionId: string): Promise<UploadResponse> {
    const resp = await this.fetchImpl(
      `${this.baseUrl}/api/v1/sessions/${encodeURIComponent(sessionId)}/promote`,
      { method: "POST" },
    );
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp));
    return (await resp.json()) as UploadResponse;
  }
}
