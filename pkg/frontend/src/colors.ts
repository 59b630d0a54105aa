/** Color conventions shared with the server: query palette and event roles. */

import { PointStatus } from "./pointbuffer.js";

/** Categorical query palette; index == the server's color id. */
export const PALETTE = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
  "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
] as const;

/** Constraint-kind colors: origins blue, destinations red, either green. */
export const KIND_COLORS: Record<string, string> = {
  origin: "#1f6fd6",
  destination: "#d63b3b",
  either: "#2fa84f",
};

export const PICKUP_COLOR: [number, number, number] = [0.18, 0.45, 0.85];
export const DROPOFF_COLOR: [number, number, number] = [0.85, 0.25, 0.22];
export const FILTERED_DIM = 0.12;
export const HIGHLIGHT_BOOST = 1.35;
export const BRUSH_COLOR: [number, number, number] = [1.0, 0.95, 0.3];

export function hexToRgb(hex: string): [number, number, number] {
  const v = parseInt(hex.slice(1), 16);
  return [((v >> 16) & 0xff) / 255, ((v >> 8) & 0xff) / 255, (v & 0xff) / 255];
}

function clamp01(v: number): number {
  return v < 0 ? 0 : v > 1 ? 1 : v;
}

/**
 * Render color for one point given its status, endpoint role, and query
 * palette index (255 = in no query). Filtered points are dimmed rather than
 * dropped so the frame keeps a stable point count.
 */
export function pointColor(
  status: PointStatus,
  isPickup: boolean,
  paletteIndex: number,
): [number, number, number] {
  const base = isPickup ? PICKUP_COLOR : DROPOFF_COLOR;
  switch (status) {
    case PointStatus.FilteredOut:
      return [base[0] * FILTERED_DIM, base[1] * FILTERED_DIM, base[2] * FILTERED_DIM];
    case PointStatus.Brushed:
      return BRUSH_COLOR;
    case PointStatus.Highlighted: {
      const tint = paletteIndex < PALETTE.length ? hexToRgb(PALETTE[paletteIndex]) : base;
      return [
        clamp01(tint[0] * HIGHLIGHT_BOOST),
        clamp01(tint[1] * HIGHLIGHT_BOOST),
        clamp01(tint[2] * HIGHLIGHT_BOOST),
      ];
    }
    default:
      return base;
  }
}
