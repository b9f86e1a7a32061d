/** Thin client for the explanation service; fetch is injectable for tests. */

import type { ExplanationDocument, ScoredResponse } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface ApiClient {
  explain(request: {
    dataset: string;
    subject: string;
    method: string;
    k: number;
    seed?: number;
  }): Promise<ExplanationDocument>;
  createSession(mode: "practice" | "main"): Promise<string>;
  submitResponse(request: {
    session: string;
    dataset: string;
    caseId: string;
    yMin: number;
    yMax: number;
  }): Promise<ScoredResponse>;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`service error ${status}: ${detail}`);
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export function createApiClient(baseUrl: string, fetchImpl?: FetchLike): ApiClient {
  const doFetch: FetchLike = fetchImpl ?? ((url, init) => fetch(url, init));
  const post = (path: string, body: unknown) =>
    doFetch(`${baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });

  return {
    async explain(request) {
      const response = await post("/explain", {
        dataset: request.dataset,
        subject: request.subject,
        method: request.method,
        k: request.k,
        seed: request.seed ?? 0,
      });
      return parseOrThrow<ExplanationDocument>(response);
    },
    async createSession(mode) {
      const response = await post("/sessions", { mode });
      const body = await parseOrThrow<{ session: string }>(response);
      return body.session;
    },
    async submitResponse(request) {
      const response = await post(`/sessions/${request.session}/responses`, {
        dataset: request.dataset,
        case: request.caseId,
        y_min: request.yMin,
        y_max: request.yMax,
      });
      return parseOrThrow<ScoredResponse>(response);
    },
  };
}
