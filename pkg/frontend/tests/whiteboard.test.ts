import { describe, expect, it } from "vitest";

import {
  GestureController,
  NODE_WIDTH,
  buildEdges,
  buildWidgets,
  compatibleKinds,
  toWorld,
} from "../src/scene/whiteboardScene.js";
import type { NodeKindInfo, WorkflowDoc } from "../src/types.js";

const KINDS: NodeKindInfo[] = [
  { name: "csv-loader", inputs: [], outputs: [{ type: "table", name: "table" }],
    sink: false },
  { name: "row-filter", inputs: [{ type: "table", name: "table", required: true }],
    outputs: [{ type: "table", name: "table" }], sink: false },
  { name: "lof-detector",
    inputs: [{ type: "table", name: "table", required: true }],
    outputs: [{ type: "score-vector", name: "scores" }], sink: false },
  { name: "threshold-extract",
    inputs: [{ type: "table", name: "table", required: true },
             { type: "score-vector", name: "scores", required: false },
             { type: "selection-mask", name: "selection", required: false }],
    outputs: [{ type: "table", name: "table" }], sink: false },
];

const kindMap = new Map(KINDS.map((k) => [k.name, k]));

const DOC: WorkflowDoc = {
  "workflow-version": 1,
  nodes: [
    { id: "n1", kind: "csv-loader", config: {}, x: 0, y: 0 },
    { id: "n2", kind: "row-filter", config: {}, x: 300, y: 40 },
  ],
  edges: [{ from: "n1", fromPort: 0, to: "n2", toPort: 0 }],
};

describe("widgets and edges", () => {
  it("places input pins on the left edge and outputs on the right", () => {
    const widgets = buildWidgets(DOC, kindMap);
    const filter = widgets.find((w) => w.id === "n2")!;
    expect(filter.inputs[0].x).toBe(300);
    expect(filter.outputs[0].x).toBe(300 + NODE_WIDTH);
    expect(filter.inputs[0].type).toBe("table");
  });

  it("builds edge paths between the right pins", () => {
    const widgets = buildWidgets(DOC, kindMap);
    const edges = buildEdges(DOC, widgets);
    expect(edges).toHaveLength(1);
    const loader = widgets.find((w) => w.id === "n1")!;
    expect(edges[0].path.startsWith(
      `M ${loader.outputs[0].x} ${loader.outputs[0].y}`)).toBe(true);
  });

  it("viewport transform round-trips", () => {
    const viewport = { panX: 50, panY: -20, zoom: 2 };
    const [wx, wy] = toWorld(viewport, 150, 80);
    expect(wx).toBe(50);
    expect(wy).toBe(50);
  });
});

describe("one-gesture node creation from an output drag", () => {
  it("drag from output to empty canvas -> picker -> add-node + connect", () => {
    const gesture = new GestureController();
    gesture.downOnOutput("n1", 0, "table", 170, 30);
    gesture.move(400, 200);
    const opened = gesture.upOnCanvas(400, 200, false);
    expect(opened).toEqual({
      kind: "open-picker", x: 400, y: 200,
      connectFrom: { node: "n1", port: 0, type: "table" },
    });
    const intents = gesture.pick("row-filter");
    expect(intents).toHaveLength(2);
    expect(intents[0]).toEqual(
      { kind: "add-node", nodeKind: "row-filter", x: 400, y: 200 });
    expect(intents[1]).toMatchObject(
      { kind: "connect", from: "n1", fromPort: 0 });
  });

  it("plain canvas click opens the picker without a pending connection", () => {
    const gesture = new GestureController();
    gesture.downOnCanvas(10, 10);
    const opened = gesture.upOnCanvas(120, 90, true);
    expect(opened).toEqual(
      { kind: "open-picker", x: 120, y: 90, connectFrom: null });
    const intents = gesture.pick("csv-loader");
    expect(intents).toEqual(
      [{ kind: "add-node", nodeKind: "csv-loader", x: 120, y: 90 }]);
  });

  it("drag from output released on an input wires the two nodes", () => {
    const gesture = new GestureController();
    gesture.downOnOutput("n1", 0, "table", 170, 30);
    const intent = gesture.upOnInput("n2", 0);
    expect(intent).toEqual(
      { kind: "connect", from: "n1", fromPort: 0, to: "n2", toPort: 0 });
  });

  it("the picker filters to kinds whose inputs accept the dragged type", () => {
    const forTable = compatibleKinds(KINDS, "table").map((k) => k.name);
    expect(forTable).toEqual(["row-filter", "lof-detector",
                              "threshold-extract"]);
    const forScores = compatibleKinds(KINDS, "score-vector").map((k) => k.name);
    expect(forScores).toEqual(["threshold-extract"]);
  });
});

describe("server rejections stay visible", () => {
  it("a cycle rejection is recorded with its machine-readable reason", () => {
    const gesture = new GestureController();
    gesture.rejectEdge("n2", "n1", "cycle-detected");
    expect(gesture.rejected).toEqual(
      { from: "n2", to: "n1", reason: "cycle-detected" });
    gesture.clearRejection();
    expect(gesture.rejected).toBeNull();
  });

  it("node dragging emits final position after release", () => {
    const gesture = new GestureController();
    gesture.downOnNode("n2", 300, 40, 310, 50);
    gesture.move(360, 90);
    const intent = gesture.upOnCanvas(360, 90, false);
    expect(intent).toEqual({ kind: "move-node", node: "n2", x: 350, y: 80 });
  });

  it("panning accumulates deltas", () => {
    const gesture = new GestureController();
    gesture.downOnCanvas(100, 100);
    expect(gesture.move(112, 94)).toEqual({ kind: "pan", dx: 12, dy: -6 });
    expect(gesture.move(120, 100)).toEqual({ kind: "pan", dx: 8, dy: 6 });
  });
});
