/** Brush throttling (one in flight, latest wins) and monotone rendering. */

import { describe, expect, it } from "vitest";

import { frameSize } from "../src/pointbuffer.js";
import { FrameUpdate, SessionStream, StateMessage } from "../src/session.js";

class FakeSocket {
  sent: any[] = [];
  closed = false;
  send(data: string): void {
    this.sent.push(JSON.parse(data));
  }
  close(): void {
    this.closed = true;
  }
}

function emptyFrameBytes(revision: number): ArrayBuffer {
  const buffer = new ArrayBuffer(frameSize(0));
  new DataView(buffer).setUint32(0, revision, true);
  return buffer;
}

function stateMessage(revision: number, brushSeq: number): string {
  const message: StateMessage = {
    type: "state",
    revision,
    brush_seq: brushSeq,
    stats: { global_count: 0, queries: {}, brush_count: null },
  };
  return JSON.stringify(message);
}

function deliver(stream: SessionStream, revision: number, brushSeq: number): void {
  stream.handleMessage(stateMessage(revision, brushSeq));
  stream.handleMessage(emptyFrameBytes(revision));
}

const BRUSH_A = { origin_volume: { polygon: [[0, 0], [1, 0], [1, 1]] as [number, number][], interval: [0, 10] as [number, number] } };
const BRUSH_B = { origin_volume: { polygon: [[2, 2], [3, 2], [3, 3]] as [number, number][], interval: [0, 10] as [number, number] } };

describe("SessionStream brush throttle", () => {
  it("sends the first update immediately", () => {
    const socket = new FakeSocket();
    const stream = new SessionStream(socket);
    stream.sendBrush(BRUSH_A);
    expect(socket.sent).toHaveLength(1);
    expect(socket.sent[0].seq).toBe(1);
  });

  it("holds newer updates while one is in flight, then sends only the latest", () => {
    const socket = new FakeSocket();
    const stream = new SessionStream(socket);
    stream.sendBrush(BRUSH_A); // seq 1 in flight
    for (let i = 0; i < 50; i++) stream.sendBrush(BRUSH_B); // queued, replacing each other
    expect(socket.sent).toHaveLength(1);
    deliver(stream, 1, 1); // server acknowledges seq 1
    expect(socket.sent).toHaveLength(2);
    expect(socket.sent[1].seq).toBe(2);
    expect(socket.sent[1].brush).toEqual(BRUSH_B);
  });

  it("clearing the brush transmits null", () => {
    const socket = new FakeSocket();
    const stream = new SessionStream(socket);
    stream.sendBrush(BRUSH_A);
    deliver(stream, 1, 1);
    stream.sendBrush(null);
    expect(socket.sent[1].brush).toBeNull();
  });

  it("a queued clear wins over earlier queued updates", () => {
    const socket = new FakeSocket();
    const stream = new SessionStream(socket);
    stream.sendBrush(BRUSH_A);
    stream.sendBrush(BRUSH_B);
    stream.sendBrush(null); // release: latest queued state
    deliver(stream, 1, 1);
    expect(socket.sent).toHaveLength(2);
    expect(socket.sent[1].brush).toBeNull();
  });
});

describe("SessionStream frame ordering", () => {
  it("pairs control messages with the following binary frame", () => {
    const socket = new FakeSocket();
    const stream = new SessionStream(socket);
    const updates: FrameUpdate[] = [];
    stream.onFrame((u) => updates.push(u));
    deliver(stream, 3, 0);
    expect(updates).toHaveLength(1);
    expect(updates[0].control.revision).toBe(3);
    expect(updates[0].frame.revision).toBe(3);
  });

  it("never emits an older revision after a newer one", () => {
    const socket = new FakeSocket();
    const stream = new SessionStream(socket);
    const revisions: number[] = [];
    stream.onFrame((u) => revisions.push(u.control.revision));
    deliver(stream, 5, 0);
    deliver(stream, 4, 0); // stale, dropped
    deliver(stream, 6, 0);
    expect(revisions).toEqual([5, 6]);
  });

  it("drops stale brush frames within one revision", () => {
    const socket = new FakeSocket();
    const stream = new SessionStream(socket);
    const seqs: number[] = [];
    stream.onFrame((u) => seqs.push(u.control.brush_seq));
    deliver(stream, 2, 7);
    deliver(stream, 2, 5); // stale brush state
    deliver(stream, 2, 9);
    expect(seqs).toEqual([7, 9]);
  });

  it("surfaces server error messages without breaking the stream", () => {
    const socket = new FakeSocket();
    const stream = new SessionStream(socket);
    const errors: string[] = [];
    stream.onError((m) => errors.push(m));
    stream.handleMessage(JSON.stringify({ type: "error", message: "bad brush" }));
    deliver(stream, 1, 0);
    expect(errors).toEqual(["bad brush"]);
  });
});
