/**
 * Typed HTTP client for the query service. The UI never computes trip
 * membership itself: every count, stat, slice, and aggregate displayed comes
 * from these responses.
 */

export type Kind = "origin" | "destination" | "either";

export interface PrismJson {
  polygon: [number, number][];
  interval: [number, number];
}

export interface RecurrenceJson {
  weekdays?: (string | number)[];
  hour_range?: [number, number] | null;
  timezone?: string;
}

export interface AttributeSummaryJson {
  mean: number;
  min: number;
  max: number;
}

export interface StatsJson {
  count: number;
  attributes: Record<string, AttributeSummaryJson>;
}

export interface SlicesJson {
  query_id: number;
  interval: [number, number];
  slices: [number, number][];
}

export interface QuerySpecJson {
  id: number;
  variant: "atomic" | "directional" | "merged";
  prism?: PrismJson;
  origin_prism?: PrismJson;
  destination_prism?: PrismJson;
  members?: QuerySpecJson[];
  kind?: Kind;
  recurrence: RecurrenceJson | null;
  color: number;
  visible: boolean;
}

export interface QueryPayload {
  revision: number;
  query: QuerySpecJson;
  stats: StatsJson;
  slices: SlicesJson;
}

export interface DatasetMeta {
  id: string;
  n: number;
  interval: [number, number];
  bbox: [number, number, number, number];
  timezone: string;
}

export interface SeriesBucket {
  bucket_start: number;
  value: number | null;
}

export interface SeriesJson {
  revision: number;
  granularity: string;
  measure: string;
  buckets: SeriesBucket[];
}

export interface HistogramJson {
  revision: number;
  attribute: string;
  bins: { lo: number; hi: number; count: number }[];
}

export interface ChoroplethJson {
  revision: number;
  kind: Kind;
  counts: Record<string, number>;
  unassigned: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private base: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      const text = await response.text();
      throw new ApiError(response.status, `${method} ${path} -> ${response.status}: ${text}`);
    }
    return (await response.json()) as T;
  }

  datasetMeta(id: string): Promise<DatasetMeta> {
    return this.request("GET", `/datasets/${id}`);
  }

  sessionState(): Promise<{ revision: number; queries: QueryPayload[] }> {
    return this.request("GET", "/session/state");
  }

  createQuery(body: {
    footprint?: [number, number][];
    interval?: [number, number];
    prism?: PrismJson;
    kind?: Kind;
  }): Promise<QueryPayload> {
    return this.request("POST", "/queries", body);
  }

  getQuery(id: number): Promise<QueryPayload> {
    return this.request("GET", `/queries/${id}`);
  }

  patchQuery(
    id: number,
    body: {
      kind?: Kind;
      prism?: PrismJson;
      footprint?: [number, number][];
      interval?: [number, number];
      which?: "origin" | "destination";
      recurrence?: RecurrenceJson;
      clear_recurrence?: boolean;
      visible?: boolean;
    },
  ): Promise<QueryPayload> {
    return this.request("PATCH", `/queries/${id}`, body);
  }

  deleteQuery(id: number): Promise<{ revision: number; deleted: number }> {
    return this.request("DELETE", `/queries/${id}`);
  }

  linkDirectional(originId: number, destinationId: number): Promise<QueryPayload> {
    return this.request("POST", `/queries/${originId}/link/${destinationId}`);
  }

  revertDirectional(id: number): Promise<{ revision: number; queries: QueryPayload[] }> {
    return this.request("POST", `/queries/${id}/revert`);
  }

  mergeQueries(a: number, b: number): Promise<QueryPayload> {
    return this.request("POST", `/queries/${a}/merge/${b}`);
  }

  demergeQuery(id: number): Promise<{ revision: number; queries: QueryPayload[] }> {
    return this.request("POST", `/queries/${id}/demerge`);
  }

  applyRecurrence(target: number | "all", pattern: RecurrenceJson | null): Promise<{
    revision: number;
    slices: Record<string, SlicesJson>;
  }> {
    return this.request("POST", "/recurrence", { target, pattern });
  }

  setConstraints(
    constraints: { attribute: string; min?: number | null; max?: number | null }[],
  ): Promise<{ revision: number; global_count: number }> {
    return this.request("PUT", "/constraints", { constraints });
  }

  timeseries(params: {
    query?: number | "all";
    span?: [number, number];
    measure?: string;
    kind?: Kind;
    granularity?: string;
  }): Promise<SeriesJson> {
    return this.request("GET", `/aggregates/timeseries${buildQuery(params)}`);
  }

  histogram(params: { query?: number | "all"; attribute?: string; bins?: number }): Promise<HistogramJson> {
    return this.request("GET", `/aggregates/histogram${buildQuery(params)}`);
  }

  choropleth(params: { query?: number | "all"; kind?: Kind }): Promise<ChoroplethJson> {
    return this.request("GET", `/aggregates/choropleth${buildQuery(params)}`);
  }

  stack(params: {
    neighborhood: string;
    query?: number | "all";
    span?: [number, number];
    kind?: Kind;
  }): Promise<SeriesJson & { neighborhood: string }> {
    return this.request("GET", `/aggregates/stack${buildQuery(params)}`);
  }
}

function buildQuery(params: Record<string, unknown>): string {
  const parts: string[] = [];
  for (const [key, value] of Object.entries(params)) {
    if (value === undefined || value === null) continue;
    const text = Array.isArray(value) ? value.join(",") : String(value);
    parts.push(`${encodeURIComponent(key)}=${encodeURIComponent(text)}`);
  }
  return parts.length ? `?${parts.join("&")}` : "";
}
