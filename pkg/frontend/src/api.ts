/** Thin typed client over the annotation service.
 *
 * Errors: a 400 raises ApiError with the server's violation list, a
 * 404/409 raises ApiError with the detail string.  Network-level
 * failures propagate as whatever fetch rejects with.
 */

import type {
  DocDetail,
  DocSummary,
  PredicateInfo,
  ProjectInfo,
  RecommendationsResponse,
  StatusResponse,
  SubmitBody,
  SubmitResponse,
  TickReport,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly violations: string[];

  constructor(status: number, violations: string[], message?: string) {
    super(message ?? violations.join("; "));
    this.name = "ApiError";
    this.status = status;
    this.violations = violations;
  }
}

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let violations: string[] = [];
  let message = `HTTP ${resp.status}`;
  try {
    const body = await resp.json();
    const detail = body?.detail;
    if (detail && Array.isArray(detail.violations)) {
      violations = detail.violations;
      message = violations.join("; ");
    } else if (typeof detail === "string") {
      message = detail;
      violations = [detail];
    }
  } catch {
    // non-JSON error body; keep the status message
  }
  throw new ApiError(resp.status, violations, message);
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.base + path);
    await raiseForStatus(resp);
    return resp.json() as Promise<T>;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    await raiseForStatus(resp);
    return resp.json() as Promise<T>;
  }

  createProject(
    name: string,
    task: string,
    labels: (string | { name: string; shortcut_key?: string })[],
  ): Promise<ProjectInfo> {
    return this.post("/projects", { name, task, labels });
  }

  project(pid: string): Promise<ProjectInfo> {
    return this.get(`/projects/${pid}`);
  }

  uploadCorpus(
    pid: string,
    content: string,
    format: "plain" | "csv" | "json" = "plain",
  ): Promise<{ added: number; documents: number }> {
    return this.post(`/projects/${pid}/documents`, { format, content });
  }

  documents(pid: string): Promise<{ documents: DocSummary[] }> {
    return this.get(`/projects/${pid}/documents`);
  }

  document(pid: string, docId: string): Promise<DocDetail> {
    return this.get(`/projects/${pid}/documents/${docId}`);
  }

  batch(pid: string, k = 10): Promise<{ doc_ids: string[]; documents: { id: string; text: string }[] }> {
    return this.get(`/projects/${pid}/batch?k=${k}`);
  }

  submit(pid: string, body: SubmitBody): Promise<SubmitResponse> {
    return this.post(`/projects/${pid}/annotations`, body);
  }

  recommendations(pid: string, docId: string): Promise<RecommendationsResponse> {
    return this.get(`/projects/${pid}/documents/${docId}/recommendations`);
  }

  suggest(pid: string, prefix: string, cursor?: number): Promise<{ suggestions: string[] }> {
    const params = new URLSearchParams({ prefix });
    if (cursor !== undefined) params.set("cursor", String(cursor));
    return this.get(`/projects/${pid}/suggest?${params.toString()}`);
  }

  grammar(pid: string): Promise<{ predicates: PredicateInfo[] }> {
    return this.get(`/projects/${pid}/grammar`);
  }

  status(pid: string): Promise<StatusResponse> {
    return this.get(`/projects/${pid}/status`);
  }

  forceTick(pid: string): Promise<TickReport | null> {
    return this.post(`/projects/${pid}/tick`, {});
  }
}
