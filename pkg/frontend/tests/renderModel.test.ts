import { describe, expect, it } from "vitest";

import { buildOverlay, colorFor, legendStops } from "../src/overlay.js";
import { buildGridRenderModel } from "../src/renderModel.js";
import { EXPLAIN_FIXTURE, HEATMAP_FIXTURE, MAP_FIXTURE } from "./fixtures.js";

describe("overlay normalization", () => {
  it("is per-model min-max", () => {
    const overlay = buildOverlay(HEATMAP_FIXTURE);
    expect(overlay.min).toBe(0.1);
    expect(overlay.max).toBe(1.0);
    expect(overlay.intensity[1][3]).toBe(0); // the minimum cell
    expect(overlay.intensity[3][3]).toBe(1); // the maximum cell
    expect(overlay.intensity[2][2]).toBeCloseTo((0.6 - 0.1) / 0.9);
  });

  it("keeps walls null", () => {
    const overlay = buildOverlay(HEATMAP_FIXTURE);
    expect(overlay.intensity[0][0]).toBeNull();
    expect(overlay.intensity[4][4]).toBeNull();
  });

  it("handles constant grids without dividing by zero", () => {
    const overlay = buildOverlay({
      model: "agent",
      width: 2,
      height: 1,
      values: [[0.5, 0.5]],
    });
    expect(overlay.intensity[0]).toEqual([0, 0]);
  });

  it("legend spans the model's own range", () => {
    const overlay = buildOverlay(HEATMAP_FIXTURE);
    const stops = legendStops(overlay, 3);
    expect(stops[0].value).toBeCloseTo(0.1);
    expect(stops[2].value).toBeCloseTo(1.0);
    expect(stops[0].color).toBe(colorFor(0));
  });
});

describe("grid render model", () => {
  it("classifies cells and never puts overlay color on walls", () => {
    const overlay = buildOverlay(HEATMAP_FIXTURE);
    const model = buildGridRenderModel(MAP_FIXTURE, { x: 1, y: 1 }, overlay);
    expect(model.cells[0][0].kind).toBe("wall");
    expect(model.cells[0][0].overlayColor).toBeNull();
    expect(model.cells[1][1].kind).toBe("start");
    expect(model.cells[1][1].overlayColor).not.toBeNull();
    expect(model.cells[3][3].kind).toBe("goal");
    expect(model.cells[1][3].kind).toBe("object");
    expect(model.cells[1][3].classId).toBe(1);
    expect(model.cells[1][1].agentHere).toBe(true);
  });

  it("marks both trajectory overlays from the response paths verbatim", () => {
    const model = buildGridRenderModel(MAP_FIXTURE, null, null, {
      agent: EXPLAIN_FIXTURE.traj_agent,
      user: EXPLAIN_FIXTURE.traj_user,
    });
    for (const p of EXPLAIN_FIXTURE.traj_agent.path) {
      expect(model.cells[p.y][p.x].onAgentPath).toBe(true);
    }
    for (const p of EXPLAIN_FIXTURE.traj_user.path) {
      expect(model.cells[p.y][p.x].onUserPath).toBe(true);
    }
    expect(model.cells[2][2].onAgentPath).toBe(false);
    expect(model.cells[3][1].onUserPath).toBe(false);
  });

  it("performs no arithmetic on displayed values beyond rescaling", () => {
    // The intensity grid must be an affine rescale of the response grid:
    // rank order and ratios of differences are preserved exactly.
    const overlay = buildOverlay(HEATMAP_FIXTURE);
    const raw = HEATMAP_FIXTURE.values.flat().filter((v): v is number => v !== null);
    const scaled = overlay.intensity.flat().filter((v): v is number => v !== null);
    for (let i = 1; i < raw.length; i++) {
      expect(Math.sign(raw[i] - raw[0])).toBe(Math.sign(scaled[i] - scaled[0]));
      expect(scaled[i] - scaled[0]).toBeCloseTo((raw[i] - raw[0]) / (overlay.max - overlay.min));
    }
  });
});
