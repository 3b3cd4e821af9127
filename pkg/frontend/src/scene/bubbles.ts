/** Bubble-field scene graph: one circle per IP, dotted hulls per cluster.
 *
 * Contract-bearing mappings (asserted by tests on the scene graph):
 * radius grows strictly with connection count inside a scene, clamped to
 * [4, 40] px; color encodes role (blue source-only, yellow destination-only,
 * white both), red overrides for anomalies, a user brush tag overrides red.
 * In situation mode circles sit left (inside) or right (outside) of a
 * perimeter line, horizontal distance proportional to 1 - affinity.
 */

import type { ClusterModelDoc, IpSummaryDoc, SituationDoc } from "../types.js";

export const ROLE_COLORS: Record<IpSummaryDoc["role"], string> = {
  "source-only": "#4da3ff",
  "destination-only": "#ffd24d",
  "both": "#f2f2f2",
};
export const ANOMALY_COLOR = "#ff4d4d";

export const MIN_RADIUS = 4;
export const MAX_RADIUS = 40;

export interface Circle {
  ip: string;
  cluster: string;
  x: number;
  y: number;
  vx: number;
  vy: number;
  radius: number;
  color: string;
  anomalous: boolean;
  highlight: string | null;
}

export interface Hull {
  cluster: string;
  label: string;
  cx: number;
  cy: number;
  members: string[];
}

export interface BubbleScene {
  mode: "cluster" | "situation";
  circles: Circle[];
  hulls: Hull[];
}

export function radiusFor(count: number, maxCount: number): number {
  if (count <= 0) return MIN_RADIUS;
  const scale = Math.sqrt(count / Math.max(maxCount, 1));
  return Math.min(MAX_RADIUS,
    MIN_RADIUS + (MAX_RADIUS - MIN_RADIUS) * scale);
}

export function colorFor(summary: IpSummaryDoc): string {
  if (summary.highlight) return summary.highlight;
  if (summary.anomalous) return ANOMALY_COLOR;
  return ROLE_COLORS[summary.role];
}

/** Deterministic pseudo-random in [0, 1) from a string; keeps initial
 * placement stable across renders without a real RNG. */
export function hash01(text: string, salt = 0): number {
  let h = 2166136261 ^ salt;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 16777619);
  }
  return ((h >>> 0) % 10000) / 10000;
}

/** Hull anchor positions: leaves arranged on a ring, stable in leaf order. */
function hullCenters(leafIds: string[], width: number,
                     height: number): Map<string, [number, number]> {
  const centers = new Map<string, [number, number]>();
  const cx = width / 2;
  const cy = height / 2;
  const ring = Math.min(width, height) * 0.32;
  if (leafIds.length === 1) {
    centers.set(leafIds[0], [cx, cy]);
    return centers;
  }
  leafIds.forEach((leaf, i) => {
    const angle = (2 * Math.PI * i) / leafIds.length - Math.PI / 2;
    centers.set(leaf, [cx + ring * Math.cos(angle), cy + ring * Math.sin(angle)]);
  });
  return centers;
}

/** Build the cluster-mode scene from a server model. Existing circle
 * positions are kept so splits animate from the previous state. */
export function buildBubbleScene(model: ClusterModelDoc, width: number,
                                 height: number,
                                 previous?: BubbleScene): BubbleScene {
  const counts = Object.values(model.summaries)
    .map((s) => s.connection_count);
  const maxCount = counts.length ? Math.max(...counts) : 1;
  const leaves = Object.keys(model.partition);
  const centers = hullCenters(leaves, width, height);
  const prior = new Map<string, Circle>();
  previous?.circles.forEach((c) => prior.set(c.ip, c));

  const circles: Circle[] = [];
  const hulls: Hull[] = [];
  for (const leaf of leaves) {
    const members = model.partition[leaf];
    const [cx, cy] = centers.get(leaf) ?? [width / 2, height / 2];
    hulls.push({ cluster: leaf, label: leafLabel(model, leaf), cx, cy, members });
    for (const ip of members) {
      const summary = model.summaries[ip];
      const old = prior.get(ip);
      circles.push({
        ip,
        cluster: leaf,
        x: old ? old.x : cx + (hash01(ip) - 0.5) * 60,
        y: old ? old.y : cy + (hash01(ip, 7) - 0.5) * 60,
        vx: 0,
        vy: 0,
        radius: radiusFor(summary.connection_count, maxCount),
        color: colorFor(summary),
        anomalous: summary.anomalous,
        highlight: summary.highlight,
      });
    }
  }
  return { mode: "cluster", circles, hulls };
}

function leafLabel(model: ClusterModelDoc, leafId: string): string {
  const found = findNode(model.tree, leafId);
  return found ? found.label : leafId.split("/").pop() ?? leafId;
}

function findNode(node: ClusterModelDoc["tree"], id: string):
    ClusterModelDoc["tree"] | null {
  if (node.id === id) return node;
  for (const child of node.children) {
    const hit = findNode(child, id);
    if (hit) return hit;
  }
  return null;
}

/** Situation-mode positions: a vertical perimeter line splits the field;
 * inside IPs on the left, outside on the right, horizontal distance from
 * the line proportional to (1 - affinity). */
export function situationPositions(model: ClusterModelDoc,
                                   situation: SituationDoc, width: number,
                                   height: number): BubbleScene {
  const counts = Object.values(model.summaries)
    .map((s) => s.connection_count);
  const maxCount = counts.length ? Math.max(...counts) : 1;
  const mid = width / 2;
  const lane = width * 0.42;
  const ips = Object.keys(situation).sort();
  const circles: Circle[] = ips.map((ip, i) => {
    const entry = situation[ip];
    const summary = model.summaries[ip];
    const offset = 14 + (1 - entry.affinity) * lane;
    const x = entry.side === "inside" ? mid - offset : mid + offset;
    const y = 30 + ((i + 0.5) / ips.length) * (height - 60)
      + (hash01(ip, 3) - 0.5) * 18;
    return {
      ip,
      cluster: entry.side,
      x,
      y,
      vx: 0,
      vy: 0,
      radius: radiusFor(summary.connection_count, maxCount),
      color: colorFor(summary),
      anomalous: summary.anomalous,
      highlight: summary.highlight,
    };
  });
  return { mode: "situation", circles, hulls: [] };
}

/** Scene-side check mirroring the server partition; used by tests and as a
 * dev-mode assertion after every model refresh. */
export function hullMembership(scene: BubbleScene): Record<string, string[]> {
  const out: Record<string, string[]> = {};
  for (const hull of scene.hulls) out[hull.cluster] = [];
  for (const circle of scene.circles) {
    (out[circle.cluster] ??= []).push(circle.ip);
  }
  for (const members of Object.values(out)) members.sort();
  return out;
}
