/**
 * Binary point-frame decoder, bit-exact against the server encoder.
 *
 * Layout (little-endian): 12-byte header (revision, n, flags as uint32),
 * then 2n packed 14-byte entries: x, y, t float32 (positions normalized to
 * the dataset bounding box, time to the dataset interval), status uint8,
 * query color uint8. Pickups occupy entries [0, n), dropoffs [n, 2n).
 */

export const HEADER_BYTES = 12;
export const POINT_BYTES = 14;
export const NO_COLOR = 255;

export enum PointStatus {
  FilteredOut = 0,
  Visible = 1,
  Highlighted = 2,
  Brushed = 3,
}

export interface PointFrame {
  revision: number;
  n: number;
  flags: number;
  /** All arrays have length 2n: pickups first, then dropoffs. */
  x: Float32Array;
  y: Float32Array;
  t: Float32Array;
  status: Uint8Array;
  color: Uint8Array;
}

export function frameSize(n: number): number {
  return HEADER_BYTES + 2 * n * POINT_BYTES;
}

export function decodeFrame(buffer: ArrayBuffer): PointFrame {
  if (buffer.byteLength < HEADER_BYTES) {
    throw new Error(`frame too short: ${buffer.byteLength} bytes`);
  }
  const view = new DataView(buffer);
  const revision = view.getUint32(0, true);
  const n = view.getUint32(4, true);
  const flags = view.getUint32(8, true);
  const expected = frameSize(n);
  if (buffer.byteLength !== expected) {
    throw new Error(`frame size ${buffer.byteLength} != expected ${expected} for n=${n}`);
  }
  const count = 2 * n;
  const x = new Float32Array(count);
  const y = new Float32Array(count);
  const t = new Float32Array(count);
  const status = new Uint8Array(count);
  const color = new Uint8Array(count);
  for (let i = 0; i < count; i++) {
    const offset = HEADER_BYTES + i * POINT_BYTES;
    x[i] = view.getFloat32(offset, true);
    y[i] = view.getFloat32(offset + 4, true);
    t[i] = view.getFloat32(offset + 8, true);
    status[i] = view.getUint8(offset + 12);
    color[i] = view.getUint8(offset + 13);
  }
  return { revision, n, flags, x, y, t, status, color };
}
