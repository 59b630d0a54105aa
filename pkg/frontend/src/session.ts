/**
 * WebSocket session stream: ordered message handling, monotone revisions,
 * and brush throttling with at most one update in flight (the newest queued
 * state replaces any pending one, so stale brushes are never transmitted).
 */

import { decodeFrame, PointFrame } from "./pointbuffer.js";
import { PrismJson } from "./api.js";

export interface BrushJson {
  origin_volume?: PrismJson | null;
  destination_volume?: PrismJson | null;
}

export interface StateMessage {
  type: "state";
  revision: number;
  brush_seq: number;
  stats: {
    global_count: number;
    queries: Record<string, number>;
    brush_count: number | null;
  };
}

export interface FrameUpdate {
  control: StateMessage;
  frame: PointFrame;
}

/** Minimal socket surface so tests can drive the stream synchronously. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
}

export class SessionStream {
  private seq = 0;
  private awaitingSeq: number | null = null;
  /** undefined = nothing queued; null = queued "clear brush". */
  private queuedBrush: BrushJson | null | undefined = undefined;
  private pendingControl: StateMessage | null = null;
  private lastRevision = -1;
  private lastBrushSeq = -1;
  private listeners: ((update: FrameUpdate) => void)[] = [];
  private errorListeners: ((message: string) => void)[] = [];

  constructor(private socket: SocketLike) {}

  onFrame(listener: (update: FrameUpdate) => void): void {
    this.listeners.push(listener);
  }

  onError(listener: (message: string) => void): void {
    this.errorListeners.push(listener);
  }

  /** Latest-wins brush update; null clears the brush. */
  sendBrush(brush: BrushJson | null): void {
    if (this.awaitingSeq !== null) {
      this.queuedBrush = brush;
      return;
    }
    this.transmit(brush);
  }

  private transmit(brush: BrushJson | null): void {
    this.seq += 1;
    this.awaitingSeq = this.seq;
    this.socket.send(JSON.stringify({ type: "brush", seq: this.seq, brush }));
  }

  get inFlightSeq(): number | null {
    return this.awaitingSeq;
  }

  get currentSeq(): number {
    return this.seq;
  }

  /** Feed one incoming message (text control or binary frame), in order. */
  handleMessage(data: string | ArrayBuffer): void {
    if (typeof data === "string") {
      const message = JSON.parse(data);
      if (message.type === "state") {
        this.pendingControl = message as StateMessage;
      } else if (message.type === "error") {
        for (const listener of this.errorListeners) listener(message.message ?? "unknown error");
      }
      return;
    }
    const control = this.pendingControl;
    this.pendingControl = null;
    if (control === null) return; // orphan frame; drop
    // no time travel: never render an older revision or brush state
    if (control.revision < this.lastRevision) return;
    if (control.revision === this.lastRevision && control.brush_seq < this.lastBrushSeq) return;
    const frame = decodeFrame(data);
    this.lastRevision = control.revision;
    this.lastBrushSeq = control.brush_seq;
    if (this.awaitingSeq !== null && control.brush_seq >= this.awaitingSeq) {
      this.awaitingSeq = null;
      if (this.queuedBrush !== undefined) {
        const queued = this.queuedBrush;
        this.queuedBrush = undefined;
        this.transmit(queued);
      }
    }
    for (const listener of this.listeners) listener({ control, frame });
  }

  close(): void {
    this.socket.close();
  }
}

/** Wire a SessionStream onto a browser WebSocket. */
export function connectSession(url: string, socketFactory?: (url: string) => WebSocket): SessionStream {
  const ws = socketFactory ? socketFactory(url) : new WebSocket(url);
  ws.binaryType = "arraybuffer";
  const stream = new SessionStream({
    send: (data) => ws.send(data),
    close: () => ws.close(),
  });
  ws.onmessage = (event: MessageEvent) => stream.handleMessage(event.data);
  return stream;
}
