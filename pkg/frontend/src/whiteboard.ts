/** Whiteboard view: SVG canvas of analysis nodes with pan/zoom, one-gesture
 * node creation (click or drag-from-output), in-node result previews and a
 * config editor. All state comes from the server; after every acknowledged
 * mutation the document is refetched and re-rendered. */

import { ApiClient, ApiError, subscribe } from "./api.js";
import {
  GestureController,
  NodeWidget,
  Viewport,
  buildEdges,
  buildWidgets,
  compatibleKinds,
  edgePath,
  toWorld,
} from "./scene/whiteboardScene.js";
import { buildBubbleScene } from "./scene/bubbles.js";
import { settle } from "./scene/forces.js";
import type {
  NodeKindInfo,
  NodeOutputDoc,
  NodePayload,
  WorkflowDoc,
} from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl<K extends keyof SVGElementTagNameMap>(
    tag: K, attrs: Record<string, string | number> = {}):
    SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, String(v));
  return el;
}

export class WhiteboardView {
  private client: ApiClient;
  private root: HTMLElement;
  private svg!: SVGSVGElement;
  private sceneGroup!: SVGGElement;
  private statusBar!: HTMLElement;
  private configPanel!: HTMLElement;
  private picker!: HTMLElement;
  private workflowId: string | null = null;
  private doc: WorkflowDoc = { "workflow-version": 1, nodes: [], edges: [] };
  private kinds = new Map<string, NodeKindInfo>();
  private outputs = new Map<string, NodeOutputDoc>();
  private gesture = new GestureController();
  private viewport: Viewport = { panX: 40, panY: 40, zoom: 1 };
  private selected: string | null = null;
  private pointerDownAt: [number, number] | null = null;
  private unsubscribe: (() => void) | null = null;
  private dragPreview: SVGPathElement | null = null;

  constructor(client: ApiClient, root: HTMLElement) {
    this.client = client;
    this.root = root;
  }

  async init(): Promise<void> {
    const kinds = await this.client.nodeKinds();
    for (const kind of kinds.kinds) this.kinds.set(kind.name, kind);
    const existing = await this.client.listWorkflows();
    this.workflowId = existing.workflows[0]
      ?? (await this.client.createWorkflow()).workflow_id;
    this.buildDom();
    this.listen();
    await this.refresh();
  }

  private buildDom(): void {
    this.root.innerHTML = "";
    const toolbar = document.createElement("div");
    toolbar.className = "toolbar";
    toolbar.innerHTML =
      `<span class="hint">click canvas: new node · drag from an output ` +
      `pin: new connected node · drag pins together: wire</span>`;
    this.statusBar = document.createElement("span");
    this.statusBar.className = "status";
    toolbar.appendChild(this.statusBar);
    this.root.appendChild(toolbar);

    const stage = document.createElement("div");
    stage.className = "stage";
    this.svg = svgEl("svg", { class: "board" });
    this.sceneGroup = svgEl("g");
    this.svg.appendChild(this.sceneGroup);
    stage.appendChild(this.svg);

    this.picker = document.createElement("div");
    this.picker.className = "picker hidden";
    stage.appendChild(this.picker);

    this.configPanel = document.createElement("div");
    this.configPanel.className = "config-panel";
    stage.appendChild(this.configPanel);
    this.root.appendChild(stage);

    this.svg.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    this.svg.addEventListener("pointermove", (e) => this.onPointerMove(e));
    this.svg.addEventListener("pointerup", (e) => this.onPointerUp(e));
    this.svg.addEventListener("wheel", (e) => this.onWheel(e), { passive: false });
  }

  private listen(): void {
    if (!this.workflowId) return;
    this.unsubscribe?.();
    this.unsubscribe = subscribe(
      this.client.workflowEventsUrl(this.workflowId),
      () => void this.refreshOutputs());
  }

  private sceneCoords(e: PointerEvent): [number, number] {
    const rect = this.svg.getBoundingClientRect();
    return toWorld(this.viewport, e.clientX - rect.left, e.clientY - rect.top);
  }

  private hit(e: PointerEvent): { kind: "port" | "node" | "canvas";
      node?: string; port?: number; direction?: "in" | "out" } {
    const target = e.target as Element;
    const pin = target.closest("[data-port]");
    if (pin) {
      return { kind: "port", node: pin.getAttribute("data-node")!,
               port: Number(pin.getAttribute("data-port")),
               direction: pin.getAttribute("data-direction") as "in" | "out" };
    }
    const node = target.closest("[data-node-id]");
    if (node) return { kind: "node", node: node.getAttribute("data-node-id")! };
    return { kind: "canvas" };
  }

  private onPointerDown(e: PointerEvent): void {
    this.hidePicker();
    const [x, y] = this.sceneCoords(e);
    this.pointerDownAt = [e.clientX, e.clientY];
    const hit = this.hit(e);
    if (hit.kind === "port" && hit.direction === "out") {
      const widget = this.widgetById(hit.node!);
      const pin = widget?.outputs[hit.port!];
      if (pin) this.gesture.downOnOutput(hit.node!, hit.port!, pin.type, x, y);
    } else if (hit.kind === "node") {
      const doc = this.doc.nodes.find((n) => n.id === hit.node);
      if (doc) {
        this.selected = hit.node!;
        this.renderConfigPanel();
        this.gesture.downOnNode(hit.node!, doc.x, doc.y, x, y);
      }
    } else {
      this.gesture.downOnCanvas(e.clientX, e.clientY);
    }
  }

  private onPointerMove(e: PointerEvent): void {
    const state = this.gesture.state;
    if (state.name === "drag-edge") {
      const [x, y] = this.sceneCoords(e);
      this.gesture.move(x, y);
      this.renderDragPreview(state.from, state.fromPort, x, y);
      return;
    }
    const [x, y] = state.name === "pan"
      ? [e.clientX, e.clientY] : this.sceneCoords(e);
    const intent = this.gesture.move(x, y);
    if (!intent) return;
    if (intent.kind === "pan") {
      this.viewport.panX += intent.dx;
      this.viewport.panY += intent.dy;
      this.applyViewport();
    } else if (intent.kind === "move-node") {
      const doc = this.doc.nodes.find((n) => n.id === intent.node);
      if (doc) {
        doc.x = intent.x;
        doc.y = intent.y;
        this.render();
      }
    }
  }

  private onPointerUp(e: PointerEvent): void {
    this.clearDragPreview();
    const [x, y] = this.sceneCoords(e);
    const wasClick = this.pointerDownAt !== null
      && Math.hypot(e.clientX - this.pointerDownAt[0],
                    e.clientY - this.pointerDownAt[1]) < 4;
    this.pointerDownAt = null;
    const hit = this.hit(e);
    if (hit.kind === "port" && hit.direction === "in") {
      const intent = this.gesture.upOnInput(hit.node!, hit.port!);
      if (intent && intent.kind === "connect") {
        void this.connect(intent.from, intent.fromPort,
                          intent.to, intent.toPort);
      }
      return;
    }
    if (hit.kind === "node") {
      const state = this.gesture.state;
      if (state.name === "drag-node") {
        const intent = this.gesture.upOnCanvas(x, y, false);
        if (intent?.kind === "move-node" && this.workflowId) {
          void this.client.setPosition(this.workflowId, intent.node,
                                       intent.x, intent.y);
        }
      } else {
        this.gesture.upOnCanvas(x, y, false);
      }
      return;
    }
    const intent = this.gesture.upOnCanvas(x, y, wasClick);
    if (intent?.kind === "open-picker") {
      this.showPicker(e, intent.connectFrom);
    } else if (intent?.kind === "move-node" && this.workflowId) {
      void this.client.setPosition(this.workflowId, intent.node,
                                   intent.x, intent.y);
    }
  }

  private onWheel(e: WheelEvent): void {
    e.preventDefault();
    const factor = e.deltaY < 0 ? 1.1 : 0.9;
    this.viewport.zoom = Math.min(2.5, Math.max(0.3,
      this.viewport.zoom * factor));
    this.applyViewport();
  }

  private widgetById(id: string): NodeWidget | undefined {
    return buildWidgets(this.doc, this.kinds).find((w) => w.id === id);
  }

  // --- picker -----------------------------------------------------------------

  private showPicker(e: PointerEvent,
                     connectFrom: { node: string; port: number;
                                    type: string } | null): void {
    const all = [...this.kinds.values()];
    const options = connectFrom
      ? compatibleKinds(all, connectFrom.type) : all;
    this.picker.innerHTML = "";
    const title = document.createElement("div");
    title.className = "picker-title";
    title.textContent = connectFrom
      ? `new node fed by ${connectFrom.node}` : "new node";
    this.picker.appendChild(title);
    for (const kind of options) {
      const button = document.createElement("button");
      button.textContent = kind.name;
      button.addEventListener("click",
        () => void this.pickKind(kind, connectFrom));
      this.picker.appendChild(button);
    }
    const stageRect = this.root.querySelector(".stage")!.getBoundingClientRect();
    this.picker.style.left = `${e.clientX - stageRect.left}px`;
    this.picker.style.top = `${e.clientY - stageRect.top}px`;
    this.picker.classList.remove("hidden");
  }

  private hidePicker(): void {
    this.picker.classList.add("hidden");
    this.gesture.cancelPicker();
  }

  private async pickKind(kind: NodeKindInfo,
                         connectFrom: { node: string; port: number;
                                        type: string } | null): Promise<void> {
    const intents = this.gesture.pick(kind.name);
    this.picker.classList.add("hidden");
    if (!intents.length || !this.workflowId) return;
    const add = intents[0];
    if (add.kind !== "add-node") return;
    try {
      const created = await this.client.addNode(
        this.workflowId, add.nodeKind, {}, add.x, add.y);
      if (connectFrom) {
        const targetPort = kind.inputs.findIndex(
          (p) => p.type === connectFrom.type);
        await this.connect(connectFrom.node, connectFrom.port,
                           created.node_id, Math.max(0, targetPort));
      }
    } catch (err) {
      this.reportError(err);
    }
    await this.refresh();
  }

  private async connect(from: string, fromPort: number, to: string,
                        toPort: number): Promise<void> {
    if (!this.workflowId) return;
    try {
      await this.client.addEdge(this.workflowId, from, fromPort, to, toPort);
      this.gesture.clearRejection();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.gesture.rejectEdge(from, to, err.reason ?? err.message);
      }
      this.reportError(err);
    }
    await this.refresh();
  }

  private reportError(err: unknown): void {
    const text = err instanceof ApiError
      ? `${err.reason ?? "error"}: ${err.message}` : String(err);
    this.statusBar.textContent = text;
    this.statusBar.classList.add("error");
    setTimeout(() => {
      this.statusBar.textContent = "";
      this.statusBar.classList.remove("error");
    }, 5000);
  }

  // --- rendering -----------------------------------------------------------------

  async refresh(): Promise<void> {
    if (!this.workflowId) return;
    this.doc = await this.client.getWorkflow(this.workflowId);
    await this.refreshOutputs();
  }

  private async refreshOutputs(): Promise<void> {
    if (!this.workflowId) return;
    const results = await Promise.all(this.doc.nodes.map(async (n) => {
      try {
        return await this.client.getOutput(this.workflowId!, n.id, 0, 40);
      } catch (err) {
        if (err instanceof ApiError && err.status === 422) {
          return { node: n.id, version: 0, status: "error",
                   error: err.message } as NodeOutputDoc;
        }
        return null;
      }
    }));
    this.outputs.clear();
    for (const out of results) if (out) this.outputs.set(out.node, out);
    this.render();
  }

  private applyViewport(): void {
    this.sceneGroup.setAttribute("transform",
      `translate(${this.viewport.panX} ${this.viewport.panY}) ` +
      `scale(${this.viewport.zoom})`);
  }

  private render(): void {
    this.applyViewport();
    this.sceneGroup.innerHTML = "";
    const widgets = buildWidgets(this.doc, this.kinds);
    for (const edge of buildEdges(this.doc, widgets)) {
      this.sceneGroup.appendChild(
        svgEl("path", { d: edge.path, class: "edge" }));
    }
    const rejected = this.gesture.rejected;
    if (rejected) {
      const from = widgets.find((w) => w.id === rejected.from);
      const to = rejected.to ? widgets.find((w) => w.id === rejected.to) : null;
      if (from && to) {
        const a = from.outputs[0];
        const b = to.inputs[0];
        this.sceneGroup.appendChild(svgEl("path", {
          d: edgePath(a.x, a.y, b.x, b.y), class: "edge rejected" }));
        const label = svgEl("text", {
          x: (a.x + b.x) / 2, y: (a.y + b.y) / 2 - 6,
          class: "rejection-label" });
        label.textContent = rejected.reason;
        this.sceneGroup.appendChild(label);
      }
    }
    for (const widget of widgets) this.renderNode(widget);
  }

  private renderNode(widget: NodeWidget): void {
    const output = this.outputs.get(widget.id);
    const status = output?.status ?? "stale";
    const group = svgEl("g", { "data-node-id": widget.id,
                               class: `node ${status}` });
    const preview = this.previewHeight(widget, output);
    group.appendChild(svgEl("rect", {
      x: widget.x, y: widget.y, rx: 8,
      width: widget.width, height: widget.height + preview,
      class: `node-body${this.selected === widget.id ? " selected" : ""}` }));
    const title = svgEl("text", { x: widget.x + 8, y: widget.y + 17,
                                  class: "node-title" });
    title.textContent = `${widget.id} · ${widget.kind}`;
    group.appendChild(title);
    const badge = svgEl("circle", { cx: widget.x + widget.width - 12,
                                    cy: widget.y + 12, r: 4,
                                    class: `badge ${status}` });
    if (output?.error) {
      const tooltip = svgEl("title", {});
      tooltip.textContent = output.error;
      badge.appendChild(tooltip);
    }
    group.appendChild(badge);
    for (const pin of [...widget.inputs, ...widget.outputs]) {
      group.appendChild(svgEl("circle", {
        cx: pin.x, cy: pin.y, r: 5,
        class: `pin ${pin.direction}`,
        "data-node": pin.node, "data-port": pin.index,
        "data-direction": pin.direction,
        "data-type": pin.type }));
    }
    if (output?.payload) {
      this.renderPreview(group, widget, output.payload);
    }
    this.sceneGroup.appendChild(group);
  }

  private previewHeight(widget: NodeWidget, output?: NodeOutputDoc): number {
    if (!output?.payload) return 0;
    return 110;
  }

  private renderPreview(group: SVGGElement, widget: NodeWidget,
                        payload: NodePayload): void {
    const x = widget.x + 6;
    const y = widget.y + widget.height + 4;
    const width = widget.width - 12;
    const height = 100;
    if (payload.type === "table") {
      const text = svgEl("text", { x, y: y + 12, class: "preview-text" });
      text.textContent = `${payload.row_count} rows`;
      group.appendChild(text);
      const names = payload.schema.slice(0, 3).map((c) => c.name).join(" · ");
      const head = svgEl("text", { x, y: y + 28, class: "preview-text dim" });
      head.textContent = names;
      group.appendChild(head);
      payload.rows.slice(0, 5).forEach((row, i) => {
        const line = svgEl("text", { x, y: y + 44 + i * 12,
                                     class: "preview-text dim" });
        line.textContent = row.slice(0, 3).map(cell =>
          cell === null ? "∅" : String(cell)).join(" · ").slice(0, 30);
        group.appendChild(line);
      });
    } else if (payload.type === "score-vector") {
      const scores = payload.scores;
      const max = Math.max(...scores, 1e-9);
      const step = width / Math.min(scores.length, 60);
      scores.slice(0, 60).forEach((s, i) => {
        group.appendChild(svgEl("rect", {
          x: x + i * step, y: y + height - (s / max) * height,
          width: Math.max(1, step - 1), height: (s / max) * height,
          class: "preview-bar" }));
      });
    } else if (payload.type === "projection-2d") {
      this.renderScatter(group, widget, payload, x, y, width, height);
    } else if (payload.type === "selection-mask") {
      const text = svgEl("text", { x, y: y + 12, class: "preview-text" });
      const on = payload.mask.filter(Boolean).length;
      text.textContent = `${on} / ${payload.mask.length} selected`;
      group.appendChild(text);
    } else if (payload.type === "cluster-model") {
      const scene = buildBubbleScene(payload.model, width, height);
      settle(scene, 40);
      const xs = scene.circles.map((c) => c.x);
      const ys = scene.circles.map((c) => c.y);
      const sx = (v: number) => x + ((v - Math.min(...xs, 0)) /
        Math.max(Math.max(...xs, 1) - Math.min(...xs, 0), 1)) * width;
      const sy = (v: number) => y + ((v - Math.min(...ys, 0)) /
        Math.max(Math.max(...ys, 1) - Math.min(...ys, 0), 1)) * height;
      for (const circle of scene.circles) {
        group.appendChild(svgEl("circle", {
          cx: sx(circle.x), cy: sy(circle.y),
          r: Math.max(2, circle.radius / 4),
          fill: circle.color, class: "preview-bubble" }));
      }
    }
  }

  /** Scatterplot preview with brush: dragging inside updates the
   * downstream scatterplot-select config (selection as node config). */
  private renderScatter(group: SVGGElement, widget: NodeWidget,
                        payload: { coords: [number, number][] },
                        x: number, y: number, width: number,
                        height: number): void {
    const xs = payload.coords.map((c) => c[0]);
    const ys = payload.coords.map((c) => c[1]);
    const x0 = Math.min(...xs), x1 = Math.max(...xs);
    const y0 = Math.min(...ys), y1 = Math.max(...ys);
    const sx = (v: number) => x + ((v - x0) / Math.max(x1 - x0, 1e-9)) * width;
    const sy = (v: number) => y + height - ((v - y0) /
      Math.max(y1 - y0, 1e-9)) * height;
    const frame = svgEl("rect", { x, y, width, height, class: "scatter-frame",
                                  "data-scatter": widget.id });
    group.appendChild(frame);
    for (const [px, py] of payload.coords.slice(0, 400)) {
      group.appendChild(svgEl("circle", {
        cx: sx(px), cy: sy(py), r: 1.5, class: "scatter-dot" }));
    }
    let start: [number, number] | null = null;
    frame.addEventListener("pointerdown", (e) => {
      e.stopPropagation();
      start = [e.offsetX, e.offsetY];
    });
    frame.addEventListener("pointerup", (e) => {
      e.stopPropagation();
      if (!start || !this.workflowId) return;
      const inv = (sxv: number) => x0 + ((sxv - x) / width) * (x1 - x0);
      const invY = (syv: number) => y0 + ((y + height - syv) / height) * (y1 - y0);
      const select = this.doc.edges.find((edge) => edge.from === widget.id);
      const target = select ? select.to : null;
      const targetKind = target
        ? this.doc.nodes.find((n) => n.id === target) : null;
      if (target && targetKind?.kind === "scatterplot-select") {
        void this.client.setConfig(this.workflowId, target, {
          x0: inv(Math.min(start[0], e.offsetX)),
          x1: inv(Math.max(start[0], e.offsetX)),
          y0: invY(Math.max(start[1], e.offsetY)),
          y1: invY(Math.min(start[1], e.offsetY)),
        }).then(() => this.refresh());
      }
      start = null;
    });
  }

  private renderDragPreview(from: string, port: number,
                            x: number, y: number): void {
    const widget = this.widgetById(from);
    const pin = widget?.outputs[port];
    if (!pin) return;
    if (!this.dragPreview) {
      this.dragPreview = svgEl("path", { class: "edge dragging" });
      this.sceneGroup.appendChild(this.dragPreview);
    }
    this.dragPreview.setAttribute("d", edgePath(pin.x, pin.y, x, y));
  }

  private clearDragPreview(): void {
    this.dragPreview?.remove();
    this.dragPreview = null;
  }

  private renderConfigPanel(): void {
    this.configPanel.innerHTML = "";
    if (!this.selected) return;
    const doc = this.doc.nodes.find((n) => n.id === this.selected);
    if (!doc) return;
    const title = document.createElement("div");
    title.className = "picker-title";
    title.textContent = `${doc.id} · ${doc.kind} config`;
    this.configPanel.appendChild(title);
    const area = document.createElement("textarea");
    area.value = JSON.stringify(doc.config, null, 2);
    this.configPanel.appendChild(area);
    const apply = document.createElement("button");
    apply.textContent = "apply";
    apply.addEventListener("click", () => {
      try {
        const config = JSON.parse(area.value || "{}");
        void this.client.setConfig(this.workflowId!, doc.id, config)
          .then(() => this.refresh())
          .catch((err) => this.reportError(err));
      } catch (err) {
        this.reportError(err);
      }
    });
    this.configPanel.appendChild(apply);
  }
}
