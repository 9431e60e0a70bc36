import type {
  Activity,
  ClickResponse,
  ExperimentReport,
  HealthInfo,
  SearchResponse,
} from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(`API error ${status}: ${detail}`);
  }
}

async function getJson<T>(url: string, signal?: AbortSignal): Promise<T> {
  const response = await fetch(url, { signal });
  if (!response.ok) {
    throw new ApiError(response.status, await response.text());
  }
  return response.json() as Promise<T>;
}

/** Thin client for the ranking service. One method per endpoint. */
export class ApiClient {
  constructor(private readonly base: string = "") {}

  health(): Promise<HealthInfo> {
    return getJson(`${this.base}/api/health`);
  }

  async activities(): Promise<Activity[]> {
    const payload = await getJson<{ activities: Activity[] }>(`${this.base}/api/activities`);
    return payload.activities;
  }

  /**
   * Issue a ranked search for the given activity names. `ranker` is the
   * demo override and is omitted entirely when unset so that regular
   * traffic stays inside the experiment's variant assignment.
   */
  search(
    names: string[],
    opts: { ranker?: string | null; limit?: number; signal?: AbortSignal } = {},
  ): Promise<SearchResponse> {
    const params = new URLSearchParams({ activities: names.join(",") });
    if (opts.ranker) params.set("ranker", opts.ranker);
    if (opts.limit !== undefined) params.set("limit", String(opts.limit));
    return getJson(`${this.base}/api/search?${params}`, opts.signal);
  }

  async click(session: string, destination: number): Promise<ClickResponse> {
    const response = await fetch(`${this.base}/api/click`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ session, destination }),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return response.json() as Promise<ClickResponse>;
  }

  report(
    experiment: string,
    opts: { unit?: string; level?: number } = {},
  ): Promise<ExperimentReport> {
    const params = new URLSearchParams();
    if (opts.unit) params.set("unit", opts.unit);
    if (opts.level !== undefined) params.set("level", String(opts.level));
    const suffix = params.size > 0 ? `?${params}` : "";
    return getJson(`${this.base}/api/experiments/${encodeURIComponent(experiment)}/report${suffix}`);
  }
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/**
 * Fire a click beacon with retries. Navigation to the detail view must not
 * wait on this: callers invoke it without awaiting. Client errors (4xx)
 * are not retried since resending the same request cannot succeed; network
 * failures and 5xx are retried with linear backoff. Resolves to null when
 * every attempt failed.
 */
export async function clickWithRetry(
  client: ApiClient,
  session: string,
  destination: number,
  attempts = 3,
  backoffMs = 400,
  sleep: (ms: number) => Promise<void> = defaultSleep,
): Promise<ClickResponse | null> {
  for (let attempt = 0; attempt < attempts; attempt++) {
    try {
      return await client.click(session, destination);
    } catch (err) {
      if (err instanceof ApiError && err.status < 500) return null;
      if (attempt + 1 < attempts) await sleep(backoffMs * (attempt + 1));
    }
  }
  return null;
}
