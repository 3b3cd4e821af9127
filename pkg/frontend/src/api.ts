/** Thin typed client for /api/v1; everything the UI knows about the server
 * goes through here. The fetch implementation is injectable so tests can
 * record requests and script responses. */

import type {
  ClusterModelDoc,
  NodeKindInfo,
  NodeOutputDoc,
  PushEvent,
  SituationDoc,
  UploadResult,
  WorkflowDoc,
} from "./types.js";

export class ApiError extends Error {
  status: number;
  reason: string | null;

  constructor(status: number, detail: string, reason: string | null = null) {
    super(detail);
    this.status = status;
    this.reason = reason;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function unwrap<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let detail = response.statusText;
  let reason: string | null = null;
  try {
    const body = await response.json();
    detail = body.detail ?? JSON.stringify(body);
    reason = body.reason ?? null;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(response.status, detail, reason);
}

export class ApiClient {
  base: string;
  fetchImpl: FetchLike;

  constructor(base = "", fetchImpl: FetchLike = (u, i) => fetch(u, i)) {
    this.base = base.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  private url(path: string): string {
    return `${this.base}/api/v1${path}`;
  }

  private async getJson<T>(path: string): Promise<T> {
    return unwrap<T>(await this.fetchImpl(this.url(path)));
  }

  private async send<T>(method: string, path: string, body?: unknown): Promise<T> {
    return unwrap<T>(await this.fetchImpl(this.url(path), {
      method,
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    }));
  }

  // logs
  async uploadLog(file: Blob, name = "log.csv"): Promise<UploadResult> {
    const form = new FormData();
    form.append("file", file, name);
    return unwrap(await this.fetchImpl(this.url("/logs"),
      { method: "POST", body: form }));
  }

  listLogs(): Promise<{ logs: { log_id: string; row_count: number }[] }> {
    return this.getJson("/logs");
  }

  // workflows
  nodeKinds(): Promise<{ kinds: NodeKindInfo[] }> {
    return this.getJson("/node-kinds");
  }

  createWorkflow(doc?: WorkflowDoc): Promise<{ workflow_id: string }> {
    return this.send("POST", "/workflows", doc ?? null);
  }

  listWorkflows(): Promise<{ workflows: string[] }> {
    return this.getJson("/workflows");
  }

  getWorkflow(id: string): Promise<WorkflowDoc> {
    return this.getJson(`/workflows/${id}`);
  }

  addNode(workflow: string, kind: string, config: Record<string, unknown>,
          x: number, y: number): Promise<{ node_id: string }> {
    return this.send("POST", `/workflows/${workflow}/nodes`,
      { kind, config, x, y });
  }

  addEdge(workflow: string, from: string, fromPort: number,
          to: string, toPort: number): Promise<unknown> {
    return this.send("POST", `/workflows/${workflow}/edges`,
      { from, fromPort, to, toPort });
  }

  setConfig(workflow: string, node: string,
            config: Record<string, unknown>): Promise<unknown> {
    return this.send("POST", `/workflows/${workflow}/config`, { node, config });
  }

  setPosition(workflow: string, node: string, x: number, y: number): Promise<unknown> {
    return this.send("POST", `/workflows/${workflow}/config`, { node, x, y });
  }

  getOutput(workflow: string, node: string, page = 0,
            pageSize = 200): Promise<NodeOutputDoc> {
    return this.getJson(
      `/workflows/${workflow}/outputs/${node}?page=${page}&page_size=${pageSize}`);
  }

  workflowEventsUrl(workflow: string, since = 0): string {
    return this.url(`/workflows/${workflow}/events?since=${since}`);
  }

  // cluster models
  createModel(logId: string, insideCidrs: string[],
              anomalyColumn?: string): Promise<{ model_id: string }> {
    return this.send("POST", "/clustervis", {
      log_id: logId,
      inside_cidrs: insideCidrs,
      ...(anomalyColumn ? { anomaly_column: anomalyColumn } : {}),
    });
  }

  async getModel(id: string): Promise<ClusterModelDoc> {
    const body = await this.getJson<{ model: ClusterModelDoc }>(
      `/clustervis/${id}`);
    return body.model;
  }

  split(id: string, clusterId: string, attribute: string): Promise<unknown> {
    return this.send("POST", `/clustervis/${id}/split`,
      { cluster_id: clusterId, attribute });
  }

  move(id: string, ip: string, clusterId: string): Promise<unknown> {
    return this.send("POST", `/clustervis/${id}/move`,
      { ip, cluster_id: clusterId });
  }

  highlight(id: string, ips: string[], color: string | null): Promise<unknown> {
    return this.send("POST", `/clustervis/${id}/highlight`, { ips, color });
  }

  timeFilter(id: string, start: number | null, end: number | null): Promise<unknown> {
    return this.send("POST", `/clustervis/${id}/filter`, { start, end });
  }

  createCluster(id: string, label: string): Promise<{ cluster_id: string }> {
    return this.send("POST", `/clustervis/${id}/create-cluster`, { label });
  }

  situation(id: string): Promise<{ situation: SituationDoc }> {
    return this.getJson(`/clustervis/${id}/situation`);
  }

  exportUrl(id: string): string {
    return this.url(`/clustervis/${id}/export`);
  }

  modelEventsUrl(id: string, since = 0): string {
    return this.url(`/clustervis/${id}/events?since=${since}`);
  }
}

/** Parse a text/event-stream chunk into events (exported for tests and the
 * polyfill path; live code uses EventSource). */
export function parseSse(text: string): PushEvent[] {
  const events: PushEvent[] = [];
  for (const block of text.split("\n\n")) {
    for (const line of block.split("\n")) {
      if (line.startsWith("data: ")) {
        try {
          events.push(JSON.parse(line.slice(6)));
        } catch {
          /* ignore malformed frames */
        }
      }
    }
  }
  return events;
}

/** Subscribe to a push channel; returns an unsubscribe function. */
export function subscribe(url: string,
                          onEvent: (event: PushEvent) => void): () => void {
  const source = new EventSource(url);
  const handler = (message: MessageEvent) => {
    try {
      onEvent(JSON.parse(message.data));
    } catch {
      /* ignore malformed frames */
    }
  };
  source.addEventListener("update", handler);
  return () => source.close();
}
