/** Bubble cluster view: force-animated circles in dotted hulls, attribute
 * split menu, drag-to-move between clusters, brushing, the time-bar filter
 * and the situation layout. The server model is the single source of truth;
 * after every acknowledged mutation the model is refetched and the rendered
 * hull membership is checked against the server partition. */

import { ApiClient, subscribe } from "./api.js";
import {
  BubbleScene,
  Circle,
  buildBubbleScene,
  hullMembership,
  situationPositions,
} from "./scene/bubbles.js";
import { settle, tick } from "./scene/forces.js";
import type { ClusterModelDoc } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl<K extends keyof SVGElementTagNameMap>(
    tag: K, attrs: Record<string, string | number> = {}):
    SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, String(v));
  return el;
}

const WIDTH = 960;
const HEIGHT = 560;
const BAR_HEIGHT = 70;

export class ClusterView {
  private client: ApiClient;
  private root: HTMLElement;
  private svg!: SVGSVGElement;
  private barSvg!: SVGSVGElement;
  private menu!: HTMLElement;
  private status!: HTMLElement;
  private modelId: string | null = null;
  private model: ClusterModelDoc | null = null;
  private scene: BubbleScene | null = null;
  private mode: "cluster" | "situation" = "cluster";
  private dragging: Circle | null = null;
  private brushStart: [number, number] | null = null;
  private brushRect: SVGRectElement | null = null;
  private animating = false;
  private unsubscribe: (() => void) | null = null;

  constructor(client: ApiClient, root: HTMLElement) {
    this.client = client;
    this.root = root;
  }

  async init(): Promise<void> {
    this.buildDom();
  }

  private buildDom(): void {
    this.root.innerHTML = "";
    const toolbar = document.createElement("div");
    toolbar.className = "toolbar";

    const drop = document.createElement("div");
    drop.className = "dropzone";
    drop.textContent = "drop a firewall CSV here (or click to browse)";
    const fileInput = document.createElement("input");
    fileInput.type = "file";
    fileInput.accept = ".csv";
    fileInput.className = "hidden";
    drop.addEventListener("click", () => fileInput.click());
    drop.addEventListener("dragover", (e) => e.preventDefault());
    drop.addEventListener("drop", (e) => {
      e.preventDefault();
      const file = e.dataTransfer?.files[0];
      if (file) void this.loadFile(file);
    });
    fileInput.addEventListener("change", () => {
      const file = fileInput.files?.[0];
      if (file) void this.loadFile(file);
    });
    toolbar.appendChild(drop);
    toolbar.appendChild(fileInput);

    const cidrs = document.createElement("input");
    cidrs.type = "text";
    cidrs.value = "10.0.0.0/8";
    cidrs.title = "inside CIDRs (comma separated)";
    cidrs.className = "cidrs";
    toolbar.appendChild(cidrs);
    this.cidrsInput = cidrs;

    const modeButton = document.createElement("button");
    modeButton.textContent = "situation mode";
    modeButton.addEventListener("click", () => void this.toggleMode(modeButton));
    toolbar.appendChild(modeButton);

    const addCluster = document.createElement("button");
    addCluster.textContent = "new cluster";
    addCluster.addEventListener("click", () => {
      const label = prompt("cluster label", "watchlist");
      if (label && this.modelId) {
        void this.client.createCluster(this.modelId, label)
          .then(() => this.refreshModel());
      }
    });
    toolbar.appendChild(addCluster);

    const brushColor = document.createElement("input");
    brushColor.type = "color";
    brushColor.value = "#35d07f";
    brushColor.title = "brush color (shift-drag to brush)";
    toolbar.appendChild(brushColor);
    this.brushColor = brushColor;

    const exportLink = document.createElement("a");
    exportLink.textContent = "export CSV";
    exportLink.className = "export hidden";
    toolbar.appendChild(exportLink);
    this.exportLink = exportLink;

    this.status = document.createElement("span");
    this.status.className = "status";
    toolbar.appendChild(this.status);
    this.root.appendChild(toolbar);

    const stage = document.createElement("div");
    stage.className = "stage";
    this.svg = svgEl("svg", { class: "bubbles",
                              viewBox: `0 0 ${WIDTH} ${HEIGHT}` });
    stage.appendChild(this.svg);
    this.menu = document.createElement("div");
    this.menu.className = "picker hidden";
    stage.appendChild(this.menu);
    this.root.appendChild(stage);

    this.barSvg = svgEl("svg", { class: "timebar",
                                 viewBox: `0 0 ${WIDTH} ${BAR_HEIGHT}` });
    this.root.appendChild(this.barSvg);

    this.svg.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    this.svg.addEventListener("pointermove", (e) => this.onPointerMove(e));
    this.svg.addEventListener("pointerup", (e) => this.onPointerUp(e));
  }

  private cidrsInput!: HTMLInputElement;
  private brushColor!: HTMLInputElement;
  private exportLink!: HTMLAnchorElement;

  private async loadFile(file: File): Promise<void> {
    try {
      const uploaded = await this.client.uploadLog(file, file.name);
      const cidrs = this.cidrsInput.value.split(",")
        .map((c) => c.trim()).filter(Boolean);
      const made = await this.client.createModel(uploaded.log_id, cidrs);
      this.modelId = made.model_id;
      this.exportLink.href = this.client.exportUrl(this.modelId);
      this.exportLink.classList.remove("hidden");
      this.unsubscribe?.();
      this.unsubscribe = subscribe(
        this.client.modelEventsUrl(this.modelId),
        () => void this.refreshModel());
      this.report(`${uploaded.row_count} rows · ` +
        `${uploaded.rejections.length} rejected lines`);
      await this.refreshModel();
    } catch (err) {
      this.report(String(err), true);
    }
  }

  private report(text: string, isError = false): void {
    this.status.textContent = text;
    this.status.classList.toggle("error", isError);
  }

  async refreshModel(): Promise<void> {
    if (!this.modelId) return;
    this.model = await this.client.getModel(this.modelId);
    if (this.mode === "situation") {
      const body = await this.client.situation(this.modelId);
      this.scene = situationPositions(this.model, body.situation,
                                      WIDTH, HEIGHT);
    } else {
      this.scene = buildBubbleScene(this.model, WIDTH, HEIGHT,
                                    this.scene ?? undefined);
      this.assertPartitionFidelity();
    }
    this.renderTimeBar();
    this.animate();
  }

  /** Dev-mode guard: the rendered hull assignment must equal the server
   * partition after every refresh. */
  private assertPartitionFidelity(): void {
    if (!this.model || !this.scene) return;
    const rendered = hullMembership(this.scene);
    const server: Record<string, string[]> = {};
    for (const [leaf, ips] of Object.entries(this.model.partition)) {
      server[leaf] = [...ips].sort();
    }
    if (JSON.stringify(rendered) !== JSON.stringify(server)) {
      this.report("render/model partition mismatch", true);
      console.error("partition mismatch", { rendered, server });
    }
  }

  private async toggleMode(button: HTMLButtonElement): Promise<void> {
    this.mode = this.mode === "cluster" ? "situation" : "cluster";
    button.textContent = this.mode === "cluster"
      ? "situation mode" : "cluster mode";
    this.scene = null;
    await this.refreshModel();
  }

  // --- interactions -----------------------------------------------------------

  private scenePoint(e: PointerEvent): [number, number] {
    const rect = this.svg.getBoundingClientRect();
    return [((e.clientX - rect.left) / rect.width) * WIDTH,
            ((e.clientY - rect.top) / rect.height) * HEIGHT];
  }

  private circleAt(x: number, y: number): Circle | null {
    if (!this.scene) return null;
    for (let i = this.scene.circles.length - 1; i >= 0; i--) {
      const c = this.scene.circles[i];
      if (Math.hypot(c.x - x, c.y - y) <= c.radius + 2) return c;
    }
    return null;
  }

  private hullAt(x: number, y: number): string | null {
    if (!this.scene) return null;
    let best: string | null = null;
    let bestDist = Infinity;
    for (const hull of this.scene.hulls) {
      const d = Math.hypot(hull.cx - x, hull.cy - y);
      if (d < bestDist) {
        bestDist = d;
        best = hull.cluster;
      }
    }
    return best;
  }

  private onPointerDown(e: PointerEvent): void {
    this.menu.classList.add("hidden");
    const [x, y] = this.scenePoint(e);
    if (e.shiftKey) {
      this.brushStart = [x, y];
      this.brushRect = svgEl("rect", { class: "brush" });
      this.svg.appendChild(this.brushRect);
      return;
    }
    if (this.mode !== "cluster") return;
    const circle = this.circleAt(x, y);
    if (circle) this.dragging = circle;
  }

  private onPointerMove(e: PointerEvent): void {
    const [x, y] = this.scenePoint(e);
    if (this.brushStart && this.brushRect) {
      const [bx, by] = this.brushStart;
      this.brushRect.setAttribute("x", String(Math.min(bx, x)));
      this.brushRect.setAttribute("y", String(Math.min(by, y)));
      this.brushRect.setAttribute("width", String(Math.abs(x - bx)));
      this.brushRect.setAttribute("height", String(Math.abs(y - by)));
      return;
    }
    if (this.dragging) {
      this.dragging.x = x;
      this.dragging.y = y;
      this.dragging.vx = 0;
      this.dragging.vy = 0;
      this.render();
    }
  }

  private onPointerUp(e: PointerEvent): void {
    const [x, y] = this.scenePoint(e);
    if (this.brushStart && this.brushRect) {
      const [bx, by] = this.brushStart;
      const x0 = Math.min(bx, x), x1 = Math.max(bx, x);
      const y0 = Math.min(by, y), y1 = Math.max(by, y);
      const chosen = (this.scene?.circles ?? []).filter(
        (c) => c.x >= x0 && c.x <= x1 && c.y >= y0 && c.y <= y1)
        .map((c) => c.ip);
      this.brushRect.remove();
      this.brushRect = null;
      this.brushStart = null;
      if (chosen.length && this.modelId) {
        void this.client.highlight(this.modelId, chosen, this.brushColor.value)
          .then(() => this.refreshModel());
      }
      return;
    }
    if (this.dragging) {
      const circle = this.dragging;
      this.dragging = null;
      const target = this.hullAt(x, y);
      if (target && target !== circle.cluster && this.modelId) {
        void this.client.move(this.modelId, circle.ip, target)
          .then(() => this.refreshModel())
          .catch((err) => {
            this.report(String(err), true);
            void this.refreshModel();
          });
      }
      return;
    }
    const circle = this.circleAt(x, y);
    if (circle) {
      void this.showConnections(circle);
      return;
    }
    if (this.mode === "cluster") {
      const hull = this.hullAt(x, y);
      if (hull && this.model && this.model.partition[hull] !== undefined) {
        this.showSplitMenu(hull, e);
      }
    }
  }

  /** Click on a circle: draw arrowed links to its counterparts. */
  private async showConnections(circle: Circle): Promise<void> {
    if (!this.modelId || !this.scene) return;
    const body = await this.client.fetchImpl(
      `${this.client.base}/api/v1/clustervis/${this.modelId}` +
      `/connections/${circle.ip}`);
    if (!body.ok) return;
    const links = (await body.json()).connections as
      { counterpart: string; direction: string; count: number }[];
    const byIp = new Map(this.scene.circles.map((c) => [c.ip, c]));
    this.svg.querySelectorAll(".link").forEach((el) => el.remove());
    for (const link of links) {
      const other = byIp.get(link.counterpart);
      if (!other) continue;
      const [a, b] = link.direction === "out" ? [circle, other] : [other, circle];
      const line = svgEl("line", {
        x1: a.x, y1: a.y, x2: b.x, y2: b.y,
        class: "link", "marker-end": "url(#arrow)" });
      const caption = svgEl("title", {});
      caption.textContent = `${a.ip} -> ${b.ip} (${link.count})`;
      line.appendChild(caption);
      this.svg.appendChild(line);
    }
  }

  private splittableAttributes(): string[] {
    if (!this.model) return [];
    const derived = ["anomalous", "role", "side"];
    const sample = Object.values(this.model.summaries)[0];
    const columns = sample ? Object.keys(sample.most_common) : [];
    return [...derived, ...columns.sort()];
  }

  private showSplitMenu(cluster: string, e: PointerEvent): void {
    this.menu.innerHTML = "";
    const title = document.createElement("div");
    title.className = "picker-title";
    title.textContent = `split ${cluster} by`;
    this.menu.appendChild(title);
    for (const attribute of this.splittableAttributes()) {
      const button = document.createElement("button");
      button.textContent = attribute;
      button.addEventListener("click", () => {
        this.menu.classList.add("hidden");
        if (this.modelId) {
          void this.client.split(this.modelId, cluster, attribute)
            .then(() => this.refreshModel())
            .catch((err) => this.report(String(err), true));
        }
      });
      this.menu.appendChild(button);
    }
    const stageRect = this.root.querySelector(".stage")!.getBoundingClientRect();
    this.menu.style.left = `${e.clientX - stageRect.left}px`;
    this.menu.style.top = `${e.clientY - stageRect.top}px`;
    this.menu.classList.remove("hidden");
  }

  // --- time bar ---------------------------------------------------------------

  private renderTimeBar(): void {
    this.barSvg.innerHTML = "";
    const bins = this.model?.time_bins ?? [];
    if (!bins.length) return;
    const roles = ["source-only", "destination-only", "both"];
    const colors = ["#4da3ff", "#ffd24d", "#f2f2f2"];
    const max = Math.max(...bins.map(
      (b) => roles.reduce((acc, r) => acc + (b.counts[r] ?? 0), 0)), 1);
    const step = WIDTH / bins.length;
    bins.forEach((bin, i) => {
      let y = BAR_HEIGHT;
      roles.forEach((role, r) => {
        const value = bin.counts[role] ?? 0;
        const h = (value / max) * (BAR_HEIGHT - 6);
        y -= h;
        this.barSvg.appendChild(svgEl("rect", {
          x: i * step + 1, y, width: Math.max(1, step - 2), height: h,
          fill: colors[r], class: "bin" }));
      });
    });
    let dragFrom: number | null = null;
    this.barSvg.addEventListener("pointerdown", (e) => {
      dragFrom = e.offsetX;
    });
    this.barSvg.addEventListener("pointerup", (e) => {
      if (dragFrom === null || !this.modelId || !this.model) return;
      const bins = this.model.time_bins;
      const binWidth = bins.length > 1
        ? bins[1].start - bins[0].start : 1000;
      const rect = this.barSvg.getBoundingClientRect();
      const toBin = (px: number) => Math.max(0, Math.min(bins.length - 1,
        Math.floor((px / rect.width) * bins.length)));
      const a = toBin(dragFrom);
      const b = toBin(e.offsetX);
      dragFrom = null;
      const start = bins[Math.min(a, b)].start;
      const end = bins[Math.max(a, b)].start + binWidth;
      void this.client.timeFilter(this.modelId, start, end)
        .then(() => this.refreshModel());
    });
    this.barSvg.addEventListener("dblclick", () => {
      if (this.modelId) {
        void this.client.timeFilter(this.modelId, null, null)
          .then(() => this.refreshModel());
      }
    });
  }

  // --- rendering ---------------------------------------------------------------

  private animate(): void {
    if (this.animating) return;
    this.animating = true;
    let frames = 0;
    const step = () => {
      if (!this.scene) {
        this.animating = false;
        return;
      }
      if (this.scene.mode === "cluster") tick(this.scene);
      this.render();
      frames += 1;
      if (frames < 180 && typeof requestAnimationFrame === "function") {
        requestAnimationFrame(step);
      } else {
        this.animating = false;
      }
    };
    if (typeof requestAnimationFrame === "function") {
      requestAnimationFrame(step);
    } else {
      settle(this.scene!, 120);
      this.render();
      this.animating = false;
    }
  }

  private render(): void {
    if (!this.scene) return;
    this.svg.innerHTML = "";
    const defs = svgEl("defs");
    const marker = svgEl("marker", {
      id: "arrow", viewBox: "0 0 10 10", refX: 9, refY: 5,
      markerWidth: 7, markerHeight: 7, orient: "auto-start-reverse" });
    marker.appendChild(svgEl("path", { d: "M 0 0 L 10 5 L 0 10 z",
                                       class: "arrow-head" }));
    defs.appendChild(marker);
    this.svg.appendChild(defs);

    if (this.scene.mode === "situation") {
      this.svg.appendChild(svgEl("line", {
        x1: WIDTH / 2, y1: 10, x2: WIDTH / 2, y2: HEIGHT - 10,
        class: "perimeter" }));
      const inside = svgEl("text", { x: WIDTH / 2 - 70, y: 22,
                                     class: "side-label" });
      inside.textContent = "inside";
      const outside = svgEl("text", { x: WIDTH / 2 + 28, y: 22,
                                      class: "side-label" });
      outside.textContent = "outside";
      this.svg.appendChild(inside);
      this.svg.appendChild(outside);
    }

    for (const hull of this.scene.hulls) {
      const members = this.scene.circles.filter(
        (c) => c.cluster === hull.cluster);
      const radius = 34 + Math.sqrt(members.length + 1) * 16;
      this.svg.appendChild(svgEl("circle", {
        cx: hull.cx, cy: hull.cy, r: radius, class: "hull" }));
      const label = svgEl("text", { x: hull.cx, y: hull.cy - radius - 6,
                                    class: "hull-label" });
      label.textContent = `${hull.label} (${members.length})`;
      this.svg.appendChild(label);
    }
    for (const circle of this.scene.circles) {
      const dot = svgEl("circle", {
        cx: circle.x, cy: circle.y, r: circle.radius,
        fill: circle.color, class: "bubble",
        "data-ip": circle.ip, "data-cluster": circle.cluster });
      const caption = svgEl("title", {});
      caption.textContent = circle.ip;
      dot.appendChild(caption);
      this.svg.appendChild(dot);
    }
  }
}
