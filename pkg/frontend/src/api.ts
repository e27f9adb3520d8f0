/** Typed client for the regimescope session API.
 *
 * The UI never computes divergences locally; everything rendered comes
 * straight from these responses.
 */

export interface BoundaryInfo {
  index: number;
  timestamp: string | null;
  delta: number | null;
  provenance: string;
}

export interface SegmentInfo {
  index: number;
  start: number;
  end: number;
  n: number;
  mean: number;
  variance: number;
  sigma: number;
  delta: number | null;
  provenance: string | null;
}

export interface ClusterSummary {
  id: number;
  mean_sigma: number;
  count: number;
  label: string;
  color: string;
}

export interface PhaseDoc {
  k: number;
  cluster_of: number[];
  clusters: ClusterSummary[];
}

export interface SessionDoc {
  id: string;
  status: string;
  version: number;
  model: string;
  config: { threshold: number; min_len: number };
  n_movements: number;
  segment_count: number;
  boundaries: BoundaryInfo[];
  segments: SegmentInfo[];
  cluster?: { k: number; phases: PhaseDoc };
}

export interface SpectrumDoc {
  segment: number;
  start: number;
  end: number;
  threshold: number;
  positions: number[];
  values: number[];
  argmax: number;
  max: number;
}

export interface MergeDoc {
  left: number;
  right: number;
  height: number;
  count: number;
}

export interface DendrogramDoc {
  leaf_count: number;
  leaf_sigmas: number[];
  merges: MergeDoc[];
}

export interface ClusterResult {
  id: string;
  version: number;
  status: string;
  k: number;
  dendrogram: DendrogramDoc;
  phases: PhaseDoc;
}

export type EditKind = "force-cut" | "remove-boundary" | "accept";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<never> {
  let code = "Error";
  let message = `${resp.status}`;
  try {
    const body = (await resp.json()) as { code?: string; message?: string };
    code = body.code ?? code;
    message = body.message ?? message;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, code, message);
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await fetch(this.baseUrl + path);
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  createSession(barsCsv: string, model = "normal"): Promise<SessionDoc> {
    return this.post<SessionDoc>("/sessions", { bars_csv: barsCsv, model });
  }

  loadSession(id: string): Promise<SessionDoc> {
    return this.get<SessionDoc>(`/sessions/${encodeURIComponent(id)}`);
  }

  fetchSpectrum(id: string, segment: number): Promise<SpectrumDoc> {
    return this.get<SpectrumDoc>(
      `/sessions/${encodeURIComponent(id)}/segments/${segment}/spectrum`,
    );
  }

  submitEdit(
    id: string,
    kind: EditKind,
    at: number | null,
    expectedVersion: number,
    actor = "ui",
  ): Promise<SessionDoc> {
    return this.post<SessionDoc>(`/sessions/${encodeURIComponent(id)}/edits`, {
      kind,
      at,
      actor,
      expected_version: expectedVersion,
    });
  }

  cluster(id: string, k: number, expectedVersion: number): Promise<ClusterResult> {
    return this.post<ClusterResult>(`/sessions/${encodeURIComponent(id)}/cluster`, {
      k,
      expected_version: expectedVersion,
    });
  }

  exportUrl(id: string, format = "bundle"): string {
    return `${this.baseUrl}/sessions/${encodeURIComponent(id)}/export?format=${format}`;
  }
}
