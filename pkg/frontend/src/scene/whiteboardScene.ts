/** Whiteboard scene model and gesture state machine.
 *
 * Pure logic, no DOM: widgets with port pins, edge paths, viewport
 * transforms, and a pointer-gesture controller that turns canvas
 * interactions into API intents. Two creation paths exist: click empty
 * canvas -> picker -> add node, and drag from an output pin to empty
 * canvas -> picker (filtered to compatible kinds) -> add node + connect,
 * all in one gesture. Server rejections (cycle, type mismatch) surface as
 * a visible rejected-edge marker instead of an edge.
 */

import type { NodeKindInfo, WorkflowDoc } from "../types.js";

export const NODE_WIDTH = 170;
export const NODE_HEADER = 26;
export const PORT_GAP = 18;

export interface PortPin {
  node: string;
  index: number;
  direction: "in" | "out";
  type: string;
  x: number;
  y: number;
}

export interface NodeWidget {
  id: string;
  kind: string;
  x: number;
  y: number;
  width: number;
  height: number;
  inputs: PortPin[];
  outputs: PortPin[];
}

export interface EdgeView {
  from: string;
  fromPort: number;
  to: string;
  toPort: number;
  path: string;
}

export interface Viewport {
  panX: number;
  panY: number;
  zoom: number;
}

export function widgetFor(doc: { id: string; kind: string; x: number; y: number },
                          kind: NodeKindInfo): NodeWidget {
  const rows = Math.max(kind.inputs.length, kind.outputs.length, 1);
  const height = NODE_HEADER + rows * PORT_GAP + 8;
  const inputs = kind.inputs.map((port, i) => ({
    node: doc.id, index: i, direction: "in" as const, type: port.type,
    x: doc.x,
    y: doc.y + NODE_HEADER + (i + 0.5) * PORT_GAP,
  }));
  const outputs = kind.outputs.map((port, i) => ({
    node: doc.id, index: i, direction: "out" as const, type: port.type,
    x: doc.x + NODE_WIDTH,
    y: doc.y + NODE_HEADER + (i + 0.5) * PORT_GAP,
  }));
  return { id: doc.id, kind: doc.kind, x: doc.x, y: doc.y,
           width: NODE_WIDTH, height, inputs, outputs };
}

export function buildWidgets(doc: WorkflowDoc,
                             kinds: Map<string, NodeKindInfo>): NodeWidget[] {
  return doc.nodes
    .filter((n) => kinds.has(n.kind))
    .map((n) => widgetFor(n, kinds.get(n.kind)!));
}

export function edgePath(x0: number, y0: number, x1: number, y1: number): string {
  const dx = Math.max(40, Math.abs(x1 - x0) / 2);
  return `M ${x0} ${y0} C ${x0 + dx} ${y0}, ${x1 - dx} ${y1}, ${x1} ${y1}`;
}

export function buildEdges(doc: WorkflowDoc, widgets: NodeWidget[]): EdgeView[] {
  const byId = new Map(widgets.map((w) => [w.id, w]));
  const edges: EdgeView[] = [];
  for (const e of doc.edges) {
    const from = byId.get(e.from);
    const to = byId.get(e.to);
    if (!from || !to) continue;
    const a = from.outputs[e.fromPort];
    const b = to.inputs[e.toPort];
    if (!a || !b) continue;
    edges.push({ ...e, path: edgePath(a.x, a.y, b.x, b.y) });
  }
  return edges;
}

export function toWorld(viewport: Viewport, screenX: number,
                        screenY: number): [number, number] {
  return [(screenX - viewport.panX) / viewport.zoom,
          (screenY - viewport.panY) / viewport.zoom];
}

/** Kinds whose first input port accepts the dragged output type. */
export function compatibleKinds(kinds: NodeKindInfo[],
                                outputType: string): NodeKindInfo[] {
  return kinds.filter((k) => k.inputs.some((p) => p.type === outputType));
}

// --- gesture state machine -------------------------------------------------

export type GestureIntent =
  | { kind: "open-picker"; x: number; y: number;
      connectFrom: { node: string; port: number; type: string } | null }
  | { kind: "add-node"; nodeKind: string; x: number; y: number }
  | { kind: "connect"; from: string; fromPort: number;
      to: string; toPort: number }
  | { kind: "move-node"; node: string; x: number; y: number }
  | { kind: "pan"; dx: number; dy: number };

type GestureState =
  | { name: "idle" }
  | { name: "pan"; lastX: number; lastY: number }
  | { name: "drag-node"; node: string; offsetX: number; offsetY: number;
      x: number; y: number }
  | { name: "drag-edge"; from: string; fromPort: number; type: string;
      x: number; y: number }
  | { name: "picker"; x: number; y: number;
      connectFrom: { node: string; port: number; type: string } | null };

export interface RejectedEdge {
  from: string;
  to: string | null;
  reason: string;
}

export class GestureController {
  state: GestureState = { name: "idle" };
  /** Last server-rejected connection, rendered at the offending edge. */
  rejected: RejectedEdge | null = null;

  downOnOutput(node: string, port: number, type: string,
               x: number, y: number): void {
    this.state = { name: "drag-edge", from: node, fromPort: port, type, x, y };
  }

  downOnNode(node: string, nodeX: number, nodeY: number,
             x: number, y: number): void {
    this.state = { name: "drag-node", node,
                   offsetX: x - nodeX, offsetY: y - nodeY, x, y };
  }

  downOnCanvas(x: number, y: number): void {
    this.state = { name: "pan", lastX: x, lastY: y };
  }

  move(x: number, y: number): GestureIntent | null {
    switch (this.state.name) {
      case "pan": {
        const intent: GestureIntent = {
          kind: "pan", dx: x - this.state.lastX, dy: y - this.state.lastY };
        this.state = { name: "pan", lastX: x, lastY: y };
        return intent;
      }
      case "drag-node":
        this.state = { ...this.state, x, y };
        return { kind: "move-node", node: this.state.node,
                 x: x - this.state.offsetX, y: y - this.state.offsetY };
      case "drag-edge":
        this.state = { ...this.state, x, y };
        return null;
      default:
        return null;
    }
  }

  /** Pointer released over an input pin: completes a drag-edge. */
  upOnInput(node: string, port: number): GestureIntent | null {
    if (this.state.name !== "drag-edge") {
      this.state = { name: "idle" };
      return null;
    }
    const { from, fromPort } = this.state;
    this.state = { name: "idle" };
    return { kind: "connect", from, fromPort, to: node, toPort: port };
  }

  /** Pointer released over empty canvas: a drag-edge opens the picker with
   * the pending connection attached (node creation + wiring in one
   * gesture); a plain click opens the plain picker; a node drag commits the
   * final position. */
  upOnCanvas(x: number, y: number, wasClick: boolean): GestureIntent | null {
    const state = this.state;
    if (state.name === "drag-edge") {
      this.state = { name: "picker", x, y,
                     connectFrom: { node: state.from, port: state.fromPort,
                                    type: state.type } };
      return { kind: "open-picker", x, y,
               connectFrom: this.state.connectFrom };
    }
    if (state.name === "drag-node") {
      this.state = { name: "idle" };
      return { kind: "move-node", node: state.node,
               x: state.x - state.offsetX, y: state.y - state.offsetY };
    }
    this.state = { name: "idle" };
    if (wasClick) {
      this.state = { name: "picker", x, y, connectFrom: null };
      return { kind: "open-picker", x, y, connectFrom: null };
    }
    return null;
  }

  /** A kind was picked from the open picker. Returns the intents to send,
   * in order; the caller substitutes the real node id into the connect. */
  pick(nodeKind: string): GestureIntent[] {
    if (this.state.name !== "picker") return [];
    const { x, y, connectFrom } = this.state;
    this.state = { name: "idle" };
    const intents: GestureIntent[] = [
      { kind: "add-node", nodeKind, x, y }];
    if (connectFrom) {
      intents.push({ kind: "connect", from: connectFrom.node,
                     fromPort: connectFrom.port, to: "", toPort: 0 });
    }
    return intents;
  }

  cancelPicker(): void {
    if (this.state.name === "picker") this.state = { name: "idle" };
  }

  rejectEdge(from: string, to: string | null, reason: string): void {
    this.rejected = { from, to, reason };
  }

  clearRejection(): void {
    this.rejected = null;
  }
}
