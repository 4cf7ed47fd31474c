/** Pure grid render model: everything the canvas needs, nothing computed
 * beyond reshaping API responses. */

import type { OverlayModel } from "./overlay.js";
import { colorFor } from "./overlay.js";
import type { MapView, Point, TrajectoryView } from "./types.js";

export type CellKind = "wall" | "floor" | "goal" | "start" | "object";

export interface CellRender {
  x: number;
  y: number;
  kind: CellKind;
  glyph: string | null;
  classId: number | null;
  overlayColor: string | null;
  onAgentPath: boolean;
  onUserPath: boolean;
  agentHere: boolean;
}

export interface GridRenderModel {
  width: number;
  height: number;
  cells: CellRender[][];
}

function kindAt(map: MapView, x: number, y: number): { kind: CellKind; glyph: string | null } {
  const glyph = map.rows[y][x];
  if (glyph === "#") return { kind: "wall", glyph: null };
  if (glyph === "G") return { kind: "goal", glyph: null };
  if (glyph === "S") return { kind: "start", glyph: null };
  if (glyph === ".") return { kind: "floor", glyph: null };
  return { kind: "object", glyph };
}

export function buildGridRenderModel(
  map: MapView,
  agent: Point | null,
  overlay: OverlayModel | null,
  paths: { agent?: TrajectoryView; user?: TrajectoryView } = {},
): GridRenderModel {
  const objectAt = new Map<string, number>();
  for (const obj of map.objects) {
    objectAt.set(`${obj.x},${obj.y}`, obj.class_id);
  }
  const agentPath = new Set((paths.agent?.path ?? []).map((p) => `${p.x},${p.y}`));
  const userPath = new Set((paths.user?.path ?? []).map((p) => `${p.x},${p.y}`));

  const cells: CellRender[][] = [];
  for (let y = 0; y < map.height; y++) {
    const row: CellRender[] = [];
    for (let x = 0; x < map.width; x++) {
      const { kind, glyph } = kindAt(map, x, y);
      const key = `${x},${y}`;
      const intensity = overlay?.intensity[y][x] ?? null;
      row.push({
        x,
        y,
        kind,
        glyph,
        classId: objectAt.get(key) ?? null,
        // Walls never receive overlay color; they render as wall texture.
        overlayColor: kind !== "wall" && intensity !== null ? colorFor(intensity) : null,
        onAgentPath: agentPath.has(key),
        onUserPath: userPath.has(key),
        agentHere: agent !== null && agent.x === x && agent.y === y,
      });
    }
    cells.push(row);
  }
  return { width: map.width, height: map.height, cells };
}
