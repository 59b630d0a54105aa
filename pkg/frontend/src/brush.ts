/**
 * Pointer brushing: one pointer drives an origin volume, a second pointer
 * (multi-touch or held modifier) adds a destination volume so origins and
 * destinations are constrained simultaneously. Updates flow through the
 * session stream's latest-wins throttle; releasing all pointers clears the
 * brush and its emphasis.
 */

import { PrismJson } from "./api.js";
import { BrushJson, SessionStream } from "./session.js";
import { ViewState } from "./viewstate.js";

export interface BrushOptions {
  /** Half-extent of the square brush footprint, Mercator meters. */
  radius: number;
}

export class BrushController {
  private pointers = new Map<number, [number, number]>();
  private order: number[] = [];

  constructor(
    private stream: SessionStream,
    private view: ViewState,
    public options: BrushOptions,
  ) {}

  pointerDown(pointerId: number, x: number, y: number): void {
    if (!this.pointers.has(pointerId)) this.order.push(pointerId);
    this.pointers.set(pointerId, [x, y]);
    this.push();
  }

  pointerMove(pointerId: number, x: number, y: number): void {
    if (!this.pointers.has(pointerId)) return;
    this.pointers.set(pointerId, [x, y]);
    this.push();
  }

  pointerUp(pointerId: number): void {
    this.pointers.delete(pointerId);
    this.order = this.order.filter((id) => id !== pointerId);
    this.push();
  }

  /** Current spec: null (cleared), origin-only, or origin+destination. */
  spec(): BrushJson | null {
    if (this.order.length === 0) return null;
    const volumes = this.order.slice(0, 2).map((id) => this.volumeAround(...this.pointers.get(id)!));
    if (volumes.length === 1) return { origin_volume: volumes[0] };
    return { origin_volume: volumes[0], destination_volume: volumes[1] };
  }

  private push(): void {
    this.stream.sendBrush(this.spec());
  }

  private volumeAround(x: number, y: number): PrismJson {
    const r = this.options.radius;
    const [start, end] = this.view.window;
    return {
      polygon: [
        [x - r, y - r],
        [x + r, y - r],
        [x + r, y + r],
        [x - r, y + r],
      ],
      interval: [start, end],
    };
  }
}
