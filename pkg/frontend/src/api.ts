/** Thin API client: one analysis request in flight at a time.
 *
 * A newer request aborts the previous one, and callers tag each request
 * with a state revision so stale responses are never applied.
 */

import { AnalysisResponse, ApiError, MetaAnalysisRow, ReviewRow } from "./types.js";

export class ApiHttpError extends Error {
  constructor(public status: number, public body: ApiError | null) {
    super(body?.error?.message ?? `HTTP ${status}`);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let body: ApiError | null = null;
    try {
      body = (await response.json()) as ApiError;
    } catch {
      body = null;
    }
    throw new ApiHttpError(response.status, body);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  private controller: AbortController | null = null;

  constructor(private base: string = "") {}

  async reviews(mode: string, q: string): Promise<ReviewRow[]> {
    const params = new URLSearchParams({ mode, q });
    return asJson(await fetch(`${this.base}/api/reviews?${params}`));
  }

  async metaAnalyses(reviewId: string): Promise<MetaAnalysisRow[]> {
    const params = new URLSearchParams({ review_id: reviewId });
    return asJson(await fetch(`${this.base}/api/meta-analyses?${params}`));
  }

  /** POST /api/analyze; aborts any in-flight analysis first. */
  async analyze(body: unknown, revision: number): Promise<{ revision: number; response: AnalysisResponse }> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const raw = await fetch(`${this.base}/api/analyze`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal: controller.signal,
    });
    return { revision, response: await asJson<AnalysisResponse>(raw) };
  }

  async plot(kind: "forest" | "funnel" | "density", body: unknown): Promise<string> {
    const raw = await fetch(`${this.base}/api/plots/${kind}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!raw.ok) {
      let parsed: ApiError | null = null;
      try {
        parsed = (await raw.json()) as ApiError;
      } catch {
        parsed = null;
      }
      throw new ApiHttpError(raw.status, parsed);
    }
    return await raw.text();
  }
}
