/**
 * In-progress shapes: click-built polygons on the map and dragged intervals
 * on the time wall. A polygon finalizes only with three or more vertices;
 * finalizing posts an atomic query and the server supplies the missing
 * dimension (footprint-only gets the whole dataset interval and vice versa).
 */

import { ApiClient, QueryPayload } from "./api.js";
import { CanvasSize, ViewState } from "./viewstate.js";

export class DrawError extends Error {}

export class PolygonDraft {
  readonly vertices: [number, number][] = [];

  /** Add a clicked screen position, converted to Mercator meters. */
  addScreenVertex(px: number, py: number, view: ViewState, canvas: CanvasSize): void {
    this.vertices.push(view.screenToMercator(px, py, canvas));
  }

  addVertex(x: number, y: number): void {
    this.vertices.push([x, y]);
  }

  get canFinalize(): boolean {
    return new Set(this.vertices.map((v) => v.join(","))).size >= 3;
  }

  finalize(): [number, number][] {
    if (!this.canFinalize) {
      throw new DrawError(`need at least 3 distinct vertices, have ${this.vertices.length}`);
    }
    return [...this.vertices];
  }

  clear(): void {
    this.vertices.length = 0;
  }
}

export class IntervalDrag {
  private start: number | null = null;
  private end: number | null = null;

  begin(t: number): void {
    this.start = t;
    this.end = t;
  }

  update(t: number): void {
    if (this.start === null) throw new DrawError("drag not started");
    this.end = t;
  }

  /** Half-open [lo, hi); a zero-length drag is rejected. */
  finalize(): [number, number] {
    if (this.start === null || this.end === null) throw new DrawError("drag not started");
    const lo = Math.min(this.start, this.end);
    const hi = Math.max(this.start, this.end);
    if (lo === hi) throw new DrawError("interval drag has zero length");
    this.start = this.end = null;
    return [Math.round(lo), Math.round(hi)];
  }
}

/** Post a finished polygon as a new atomic query (full time span by default). */
export async function finalizePolygon(
  draft: PolygonDraft,
  api: ApiClient,
  interval?: [number, number],
): Promise<QueryPayload> {
  const footprint = draft.finalize();
  const payload = await api.createQuery({ footprint, interval });
  draft.clear();
  return payload;
}

/** Post a dragged wall interval as a new atomic query (full footprint). */
export async function finalizeInterval(drag: IntervalDrag, api: ApiClient): Promise<QueryPayload> {
  const interval = drag.finalize();
  return api.createQuery({ interval });
}
