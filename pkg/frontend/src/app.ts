/**
 * Application shell: wires the API client, session stream, STC scene,
 * drawing tools, brush controller, and linked panels onto the page. One
 * render loop, one ordered message queue, no client-side recounting.
 */

import * as THREE from "three";

import { ApiClient, DatasetMeta, QueryPayload } from "./api.js";
import { BrushController } from "./brush.js";
import { KIND_COLORS, PALETTE } from "./colors.js";
import { DrawError, PolygonDraft, finalizePolygon } from "./draw.js";
import { choroplethRows, histogramBars, seriesPolyline, sliceLabels } from "./panels.js";
import { connectSession, SessionStream } from "./session.js";
import { StcScene } from "./stc.js";
import { Mode, ViewState } from "./viewstate.js";

interface PanelsDom {
  series: HTMLCanvasElement;
  histogram: HTMLCanvasElement;
  choropleth: HTMLElement;
  queries: HTMLElement;
  status: HTMLElement;
}

export class App {
  readonly api: ApiClient;
  readonly scene: StcScene;
  stream: SessionStream | null = null;
  view: ViewState | null = null;
  brush: BrushController | null = null;
  private renderer: THREE.WebGLRenderer | null = null;
  private camera: THREE.PerspectiveCamera | null = null;
  private three = new THREE.Scene();
  private draft = new PolygonDraft();
  private meta: DatasetMeta | null = null;
  private lastRenderedRevision = -1;
  private queryCounts: Record<string, number> = {};

  constructor(
    private base: string,
    private dom: PanelsDom,
    private canvas: HTMLCanvasElement,
  ) {
    this.api = new ApiClient(base);
    this.scene = new StcScene();
    this.three.add(this.scene.group);
  }

  async start(): Promise<void> {
    this.meta = await this.api.datasetMeta("ds-1");
    const [minX, minY, maxX, maxY] = this.meta.bbox;
    this.view = new ViewState(this.meta.interval, {
      centerX: (minX + maxX) / 2,
      centerY: (minY + maxY) / 2,
      metersPerPixel: Math.max(maxX - minX, maxY - minY) / this.canvas.clientWidth,
    });
    this.brush = new BrushController(this.streamRef(), this.view, {
      radius: Math.max(maxX - minX, maxY - minY) * 0.03,
    });
    this.initScene();
    this.bindInput();
    this.renderLoop();
    await this.refreshPanels();
  }

  private streamRef(): SessionStream {
    if (!this.stream) {
      const wsUrl = this.base.replace(/^http/, "ws") + "/session";
      this.stream = connectSession(wsUrl);
      this.stream.onFrame(({ control, frame }) => {
        // frames arrive ordered; the stream already drops time-travel
        if (control.revision < this.lastRenderedRevision) return;
        this.lastRenderedRevision = control.revision;
        this.scene.update(frame);
        this.queryCounts = control.stats.queries;
        this.dom.status.textContent =
          `rev ${control.revision} · ${control.stats.global_count} trips pass` +
          (control.stats.brush_count !== null ? ` · brushed ${control.stats.brush_count}` : "");
        void this.refreshPanels();
      });
      this.stream.onError((message) => {
        this.dom.status.textContent = `stream error: ${message}`;
      });
    }
    return this.stream;
  }

  setMode(mode: Mode): void {
    this.view?.setMode(mode);
    if (mode !== "query-edit") this.draft.clear();
    if (mode !== "brush") this.stream?.sendBrush(null);
  }

  private initScene(): void {
    this.renderer = new THREE.WebGLRenderer({ canvas: this.canvas, antialias: true });
    this.renderer.setSize(this.canvas.clientWidth, this.canvas.clientHeight, false);
    this.camera = new THREE.PerspectiveCamera(50, this.canvas.clientWidth / this.canvas.clientHeight, 0.1, 5000);
    this.camera.position.set(140, 110, 160);
    this.camera.lookAt(50, 25, 50);
    const floor = new THREE.GridHelper(100, 20, 0x333344, 0x22222c);
    floor.position.set(50, 0, 50);
    this.three.add(floor);
    this.three.background = new THREE.Color(0x10101a);
  }

  /** Minimal orbit: drag rotates around the cube center, wheel zooms. */
  private bindInput(): void {
    const center = new THREE.Vector3(50, 25, 50);
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    this.canvas.addEventListener("pointerdown", (event) => {
      const view = this.view;
      if (!view) return;
      if (view.mode === "explore") {
        dragging = true;
        lastX = event.clientX;
        lastY = event.clientY;
      } else if (view.mode === "query-edit") {
        const [mx, my] = this.pointerToMercator(event);
        this.draft.addVertex(mx, my);
        this.dom.status.textContent = `polygon: ${this.draft.vertices.length} vertices` +
          (this.draft.canFinalize ? " (double-click to finalize)" : " (need ≥ 3)");
      } else {
        const [mx, my] = this.pointerToMercator(event);
        this.brush?.pointerDown(event.pointerId, mx, my);
      }
    });
    this.canvas.addEventListener("pointermove", (event) => {
      if (this.view?.mode === "brush") {
        const [mx, my] = this.pointerToMercator(event);
        this.brush?.pointerMove(event.pointerId, mx, my);
      } else if (dragging && this.camera) {
        const dx = (event.clientX - lastX) * 0.005;
        const dy = (event.clientY - lastY) * 0.005;
        lastX = event.clientX;
        lastY = event.clientY;
        const offset = this.camera.position.clone().sub(center);
        const spherical = new THREE.Spherical().setFromVector3(offset);
        spherical.theta -= dx;
        spherical.phi = Math.min(Math.max(spherical.phi - dy, 0.1), Math.PI / 2 - 0.02);
        this.camera.position.copy(center.clone().add(new THREE.Vector3().setFromSpherical(spherical)));
        this.camera.lookAt(center);
      }
    });
    this.canvas.addEventListener("pointerup", (event) => {
      dragging = false;
      if (this.view?.mode === "brush") this.brush?.pointerUp(event.pointerId);
    });
    this.canvas.addEventListener("dblclick", () => {
      if (this.view?.mode === "query-edit") void this.finishPolygon();
    });
    this.canvas.addEventListener("wheel", (event) => {
      if (!this.camera) return;
      event.preventDefault();
      const offset = this.camera.position.clone().sub(center);
      offset.multiplyScalar(event.deltaY > 0 ? 1.1 : 0.9);
      this.camera.position.copy(center.clone().add(offset));
      this.camera.lookAt(center);
    });
  }

  private pointerToMercator(event: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return this.view!.screenToMercator(event.clientX - rect.left, event.clientY - rect.top, {
      width: rect.width,
      height: rect.height,
    });
  }

  async finishPolygon(): Promise<QueryPayload | null> {
    try {
      const payload = await finalizePolygon(this.draft, this.api);
      this.dom.status.textContent = `query ${payload.query.id}: ${payload.stats.count} trips`;
      await this.refreshPanels();
      return payload;
    } catch (error) {
      if (error instanceof DrawError) {
        this.dom.status.textContent = `cannot finalize: ${error.message}`;
        return null;
      }
      throw error;
    }
  }

  /** Redraw the query list and the linked aggregation panels. */
  async refreshPanels(): Promise<void> {
    const state = await this.api.sessionState();
    this.renderQueryPanel(state.queries);
    const series = await this.api.timeseries({ query: "all" });
    drawPolyline(this.dom.series, seriesPolyline(series, sizeOf(this.dom.series)));
    const histogram = await this.api.histogram({ attribute: "fare", bins: 24 });
    drawBars(this.dom.histogram, histogramBars(histogram, sizeOf(this.dom.histogram)));
    try {
      const choropleth = await this.api.choropleth({ query: "all" });
      this.dom.choropleth.innerHTML = choroplethRows(choropleth.counts, choropleth.unassigned)
        .map(([name, count]) => `<div class="row"><span>${name}</span><b>${count}</b></div>`)
        .join("");
    } catch {
      this.dom.choropleth.textContent = "no neighborhoods loaded";
    }
  }

  private renderQueryPanel(queries: QueryPayload[]): void {
    const timezone = this.meta?.timezone ?? "UTC";
    this.dom.queries.innerHTML = "";
    for (const payload of queries) {
      const q = payload.query;
      const card = document.createElement("div");
      card.className = "query-card";
      card.style.borderLeft = `4px solid ${PALETTE[q.color % PALETTE.length]}`;
      const live = this.queryCounts[String(q.id)];
      const badge = live !== undefined ? live : payload.stats.count;
      card.innerHTML = `<header>#${q.id} ${q.variant}${q.kind ? ` · <i style="color:${KIND_COLORS[q.kind]}">${q.kind}</i>` : ""} · <b>${badge}</b></header>`;
      if (q.variant === "atomic") {
        for (const kind of ["origin", "destination", "either"] as const) {
          const button = document.createElement("button");
          button.textContent = kind;
          button.disabled = q.kind === kind;
          button.onclick = () => void this.api.patchQuery(q.id, { kind }).then(() => this.refreshPanels());
          card.append(button);
        }
      }
      if (q.variant === "directional") {
        const revert = document.createElement("button");
        revert.textContent = "revert";
        revert.onclick = () => void this.api.revertDirectional(q.id).then(() => this.refreshPanels());
        card.append(revert);
      }
      if (q.variant === "merged") {
        const demerge = document.createElement("button");
        demerge.textContent = "demerge";
        demerge.onclick = () => void this.api.demergeQuery(q.id).then(() => this.refreshPanels());
        card.append(demerge);
      }
      const remove = document.createElement("button");
      remove.textContent = "delete";
      remove.onclick = () => void this.api.deleteQuery(q.id).then(() => this.refreshPanels());
      card.append(remove);
      if (payload.slices.slices.length > 1) {
        const labels = document.createElement("div");
        labels.className = "slices";
        labels.textContent = sliceLabels(payload.slices, timezone).join(" | ");
        card.append(labels);
      }
      this.dom.queries.append(card);
    }
  }

  private renderLoop(): void {
    const tick = () => {
      if (this.renderer && this.camera) this.renderer.render(this.three, this.camera);
      requestAnimationFrame(tick);
    };
    requestAnimationFrame(tick);
  }
}

function sizeOf(canvas: HTMLCanvasElement): { width: number; height: number } {
  return { width: canvas.width, height: canvas.height };
}

function drawPolyline(canvas: HTMLCanvasElement, points: [number, number][]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (points.length === 0) return;
  ctx.strokeStyle = "#7fb2ff";
  ctx.beginPath();
  ctx.moveTo(points[0][0], points[0][1]);
  for (const [x, y] of points.slice(1)) ctx.lineTo(x, y);
  ctx.stroke();
}

function drawBars(canvas: HTMLCanvasElement, bars: { x: number; y: number; width: number; height: number }[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#8bd17c";
  for (const bar of bars) ctx.fillRect(bar.x + 1, bar.y, Math.max(bar.width - 2, 1), bar.height);
}

export function mountApp(base: string): App {
  const canvas = document.getElementById("stc") as HTMLCanvasElement;
  const dom: PanelsDom = {
    series: document.getElementById("series") as HTMLCanvasElement,
    histogram: document.getElementById("histogram") as HTMLCanvasElement,
    choropleth: document.getElementById("choropleth") as HTMLElement,
    queries: document.getElementById("queries") as HTMLElement,
    status: document.getElementById("status") as HTMLElement,
  };
  const app = new App(base, dom, canvas);
  for (const mode of ["explore", "query-edit", "brush"] as const) {
    document.getElementById(`mode-${mode}`)?.addEventListener("click", () => app.setMode(mode));
  }
  document.getElementById("toggle-projections")?.addEventListener("click", () => {
    app.scene.setProjections(!app.scene.options.showProjections);
  });
  void app.start();
  return app;
}
