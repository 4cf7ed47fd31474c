/** Heatmap overlay model: per-model min-max normalization to colors.
 *
 * Walls arrive as nulls and stay null; everything displayed comes straight
 * from the fetched grid, only rescaled for color.
 */

import type { HeatmapResponse } from "./types.js";

export interface OverlayModel {
  model: string;
  min: number;
  max: number;
  /** Normalized 0..1 intensity per cell; null on walls. */
  intensity: (number | null)[][];
}

export function buildOverlay(heatmap: HeatmapResponse): OverlayModel {
  const flat = heatmap.values.flat().filter((v): v is number => v !== null);
  const min = flat.length ? Math.min(...flat) : 0;
  const max = flat.length ? Math.max(...flat) : 0;
  const span = max - min;
  const intensity = heatmap.values.map((row) =>
    row.map((v) => (v === null ? null : span > 0 ? (v - min) / span : 0)),
  );
  return { model: heatmap.model, min, max, intensity };
}

/** Cold-to-hot ramp used by the canvas renderer and the legend. */
export function colorFor(intensity: number): string {
  const t = Math.max(0, Math.min(1, intensity));
  const hue = 240 - 240 * t; // blue -> red
  return `hsl(${hue.toFixed(0)}, 85%, ${Math.round(35 + 25 * t)}%)`;
}

export function legendStops(overlay: OverlayModel, count = 5): Array<{
  value: number;
  color: string;
}> {
  const stops = [];
  for (let i = 0; i < count; i++) {
    const t = count === 1 ? 0 : i / (count - 1);
    stops.push({ value: overlay.min + t * (overlay.max - overlay.min), color: colorFor(t) });
  }
  return stops;
}
