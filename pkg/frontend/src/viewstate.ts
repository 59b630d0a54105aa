/**
 * View state: map viewport, visible time window, and the active interaction
 * mode. Exactly one mode is active; Explore pans and zooms, QueryEdit draws
 * and edits prisms, Brush drives the ephemeral pointer filter.
 */

export type Mode = "explore" | "query-edit" | "brush";

export interface Viewport {
  /** Mercator meters at the canvas center. */
  centerX: number;
  centerY: number;
  /** Mercator meters per CSS pixel. */
  metersPerPixel: number;
}

export interface CanvasSize {
  width: number;
  height: number;
}

export class ViewState {
  mode: Mode = "explore";
  selectedQuery: number | null = null;
  viewport: Viewport;
  private timeWindow: [number, number];

  constructor(
    public readonly datasetInterval: [number, number],
    viewport: Viewport,
  ) {
    this.viewport = { ...viewport };
    this.timeWindow = [...datasetInterval] as [number, number];
  }

  get window(): [number, number] {
    return this.timeWindow;
  }

  /** Clamp the visible window into the dataset interval, keeping it nonempty. */
  setTimeWindow(start: number, end: number): [number, number] {
    const [lo, hi] = this.datasetInterval;
    let s = Math.max(lo, Math.min(start, hi));
    let e = Math.max(lo, Math.min(end, hi));
    if (e <= s) {
      e = Math.min(hi, s + 1);
      s = Math.max(lo, e - 1);
    }
    this.timeWindow = [s, e];
    return this.timeWindow;
  }

  setMode(mode: Mode): void {
    this.mode = mode;
  }

  screenToMercator(px: number, py: number, canvas: CanvasSize): [number, number] {
    const x = this.viewport.centerX + (px - canvas.width / 2) * this.viewport.metersPerPixel;
    const y = this.viewport.centerY - (py - canvas.height / 2) * this.viewport.metersPerPixel;
    return [x, y];
  }

  mercatorToScreen(x: number, y: number, canvas: CanvasSize): [number, number] {
    const px = (x - this.viewport.centerX) / this.viewport.metersPerPixel + canvas.width / 2;
    const py = canvas.height / 2 - (y - this.viewport.centerY) / this.viewport.metersPerPixel;
    return [px, py];
  }

  pan(dxPixels: number, dyPixels: number): void {
    this.viewport.centerX -= dxPixels * this.viewport.metersPerPixel;
    this.viewport.centerY += dyPixels * this.viewport.metersPerPixel;
  }

  zoom(factor: number): void {
    this.viewport.metersPerPixel /= factor;
  }
}
