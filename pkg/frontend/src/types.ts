/** Server payload shapes for /api/v1. */

export interface ColumnInfo {
  name: string;
  kind: string;
  required: boolean;
  role: string | null;
}

export interface UploadResult {
  log_id: string;
  row_count: number;
  schema: ColumnInfo[];
  rejections: string[];
}

export interface WorkflowNodeDoc {
  id: string;
  kind: string;
  config: Record<string, unknown>;
  x: number;
  y: number;
}

export interface WorkflowEdgeDoc {
  from: string;
  fromPort: number;
  to: string;
  toPort: number;
}

export interface WorkflowDoc {
  "workflow-version": number;
  nodes: WorkflowNodeDoc[];
  edges: WorkflowEdgeDoc[];
}

export interface PortInfo {
  type: string;
  name: string;
  required?: boolean;
}

export interface NodeKindInfo {
  name: string;
  inputs: PortInfo[];
  outputs: PortInfo[];
  sink: boolean;
}

export interface TablePayload {
  type: "table";
  schema: ColumnInfo[];
  rows: unknown[][];
  row_count: number;
  page: number;
  page_size: number;
  total_pages: number;
}

export interface ScorePayload {
  type: "score-vector";
  scores: number[];
}

export interface MaskPayload {
  type: "selection-mask";
  mask: boolean[];
}

export interface ProjectionPayload {
  type: "projection-2d";
  coords: [number, number][];
  components: number[][];
  explained_variance: [number, number];
}

export interface ModelPayload {
  type: "cluster-model";
  model: ClusterModelDoc;
}

export type NodePayload =
  | TablePayload
  | ScorePayload
  | MaskPayload
  | ProjectionPayload
  | ModelPayload;

export interface NodeOutputDoc {
  node: string;
  version: number;
  status: "clean" | "stale" | "error";
  error?: string;
  payload?: NodePayload;
}

export interface IpSummaryDoc {
  ip: string;
  connection_count: number;
  role: "source-only" | "destination-only" | "both";
  most_common: Record<string, unknown>;
  anomalous: boolean;
  highlight: string | null;
  cross_perimeter_count: number;
  side: "inside" | "outside";
}

export interface ClusterTreeDoc {
  id: string;
  label: string;
  value: string | null;
  attribute: string | null;
  user_created: boolean;
  synthesized: boolean;
  children: ClusterTreeDoc[];
}

export interface TimeBinDoc {
  start: number;
  counts: Record<string, number>;
}

export interface ClusterModelDoc {
  summaries: Record<string, IpSummaryDoc>;
  tree: ClusterTreeDoc;
  partition: Record<string, string[]>;
  manual_moves: Record<string, string>;
  highlights: Record<string, string>;
  time_filter: [number, number] | null;
  time_bins: TimeBinDoc[];
}

export interface SituationEntryDoc {
  side: "inside" | "outside";
  affinity: number;
}

export type SituationDoc = Record<string, SituationEntryDoc>;

export interface PushEvent {
  seq: number;
  node?: string;
  version?: number;
  status?: string;
  model?: string;
  op?: string;
  [extra: string]: unknown;
}
