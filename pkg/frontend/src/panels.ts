/**
 * Linked-panel geometry: pure transforms from server aggregates to drawable
 * shapes, kept separate from the canvas painters so they stay testable. All
 * numbers shown come from the server; nothing is recounted client-side.
 */

import { HistogramJson, SeriesJson, SlicesJson } from "./api.js";

export interface Box {
  width: number;
  height: number;
}

/** Line-graph polyline for a count/mean series, x left-to-right by bucket. */
export function seriesPolyline(series: SeriesJson, box: Box): [number, number][] {
  const buckets = series.buckets;
  if (buckets.length === 0) return [];
  const values = buckets.map((b) => b.value ?? 0);
  const max = Math.max(...values, 1);
  const stepX = buckets.length > 1 ? box.width / (buckets.length - 1) : 0;
  return values.map((v, i) => [i * stepX, box.height - (v / max) * box.height]);
}

export interface Bar {
  x: number;
  y: number;
  width: number;
  height: number;
}

/** Histogram-style bars for a series or value histogram. */
export function seriesBars(values: number[], box: Box): Bar[] {
  if (values.length === 0) return [];
  const max = Math.max(...values, 1);
  const barWidth = box.width / values.length;
  return values.map((v, i) => {
    const h = (v / max) * box.height;
    return { x: i * barWidth, y: box.height - h, width: barWidth, height: h };
  });
}

export function histogramBars(histogram: HistogramJson, box: Box): Bar[] {
  return seriesBars(histogram.bins.map((b) => b.count), box);
}

/**
 * Wall labels for recurrence slices: every slice shows its lower and upper
 * bound formatted in the dataset zone at minute precision.
 */
export function sliceLabels(slices: SlicesJson, timezone: string): string[] {
  const fmt = new Intl.DateTimeFormat("en-US", {
    timeZone: timezone,
    month: "short",
    day: "2-digit",
    hour: "2-digit",
    minute: "2-digit",
    hour12: false,
  });
  return slices.slices.map(([lo, hi]) => `${fmt.format(new Date(lo * 1000))} – ${fmt.format(new Date(hi * 1000))}`);
}

/** Choropleth rows sorted by count descending, unassigned last. */
export function choroplethRows(counts: Record<string, number>, unassigned: number): [string, number][] {
  const rows = Object.entries(counts).sort((a, b) => b[1] - a[1]);
  rows.push(["(unassigned)", unassigned]);
  return rows;
}
