/** Browser entry: wires the controller to the DOM. Kept thin; all state
 * lives in SessionController and all drawing data in the render model. */

import { ApiClient } from "./api.js";
import { SessionController } from "./controller.js";
import { buildGridRenderModel } from "./renderModel.js";
import { legendStops } from "./overlay.js";
import type { ActionName, SessionConfig } from "./types.js";

const CELL = 48;

const DEFAULT_MAP = `GRID 11 7
###########
#....bb...#
#S.S.S.S.S#
#.#######.#
#S#######G#
#S.......S#
###########

b object 1 1
`;

const DEFAULT_CONFIG: SessionConfig = {
  map: { text: DEFAULT_MAP },
  classes: [
    { id: 0, name: "goal", sign: "positive",
      display_name: "green goal", consequence: "reach the goal" },
    { id: 1, name: "stairs", sign: "negative",
      display_name: "dangerous stairs", consequence: "fall down the stairs" },
  ],
  learner: { alpha: 0.2, gamma: 0.9, epsilon_end: 0.15, episodes: 3000, seed: 11 },
  influence: { alpha: 1.0 },
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const api = new ApiClient(
  (document.querySelector("meta[name=api-base]") as HTMLMetaElement | null)?.content ??
    "http://127.0.0.1:8000",
);
const controller = new SessionController(api);

const canvas = el<HTMLCanvasElement>("grid");
const ctx = canvas.getContext("2d")!;
let editMode = false;
let editGlyph = "#";
let playTimer: number | null = null;

const CLASS_COLORS = ["#2e7d32", "#1565c0", "#b71c1c", "#6a1b9a", "#ef6c00"];

function draw(): void {
  const map = controller.map;
  if (!map) return;
  canvas.width = map.width * CELL;
  canvas.height = map.height * CELL;
  const model = buildGridRenderModel(
    map,
    controller.state?.position ?? null,
    controller.overlay,
    {
      agent: controller.explanation?.response.traj_agent,
      user: controller.explanation?.response.traj_user,
    },
  );

  for (const row of model.cells) {
    for (const cell of row) {
      const px = cell.x * CELL;
      const py = cell.y * CELL;
      if (cell.kind === "wall") {
        ctx.fillStyle = "#3a3a3a";
        ctx.fillRect(px, py, CELL, CELL);
        ctx.strokeStyle = "#222";
        ctx.strokeRect(px + 4, py + 4, CELL - 8, CELL - 8);
        continue;
      }
      ctx.fillStyle = cell.overlayColor ?? "#f4f0e8";
      ctx.fillRect(px, py, CELL, CELL);
      ctx.strokeStyle = "#d8d2c4";
      ctx.strokeRect(px, py, CELL, CELL);

      if (cell.kind === "goal") {
        ctx.fillStyle = "#2e7d32";
        ctx.fillRect(px + 8, py + 8, CELL - 16, CELL - 16);
      } else if (cell.kind === "object" && cell.classId !== null) {
        ctx.fillStyle =
          cell.classId >= 0 ? CLASS_COLORS[(cell.classId + 1) % CLASS_COLORS.length] : "#9e9d24";
        ctx.beginPath();
        ctx.arc(px + CELL / 2, py + CELL / 2, CELL / 4, 0, Math.PI * 2);
        ctx.fill();
      } else if (cell.kind === "start") {
        ctx.strokeStyle = "#8d6e63";
        ctx.strokeRect(px + 12, py + 12, CELL - 24, CELL - 24);
      }

      if (cell.onAgentPath) {
        ctx.strokeStyle = "#1b5e20";
        ctx.lineWidth = 3;
        ctx.strokeRect(px + 6, py + 6, CELL - 12, CELL - 12);
        ctx.lineWidth = 1;
      }
      if (cell.onUserPath) {
        ctx.strokeStyle = "#e65100";
        ctx.lineWidth = 3;
        ctx.strokeRect(px + 10, py + 10, CELL - 20, CELL - 20);
        ctx.lineWidth = 1;
      }
      if (cell.agentHere) {
        ctx.fillStyle = "#c62828";
        ctx.beginPath();
        ctx.moveTo(px + CELL / 2, py + 10);
        ctx.lineTo(px + CELL - 10, py + CELL - 10);
        ctx.lineTo(px + 10, py + CELL - 10);
        ctx.closePath();
        ctx.fill();
      }
    }
  }
  renderPanels();
}

function renderPanels(): void {
  el("status").textContent = controller.state
    ? `step ${controller.state.step_count} | trained: ${controller.trained}` +
      (controller.state.done ? " | episode done" : "")
    : "no session";
  el("banner").style.display = controller.staleBannerVisible ? "block" : "none";
  el("retrain-prompt").style.display = controller.retrainPrompt ? "block" : "none";

  const training = controller.training;
  el("train-status").textContent =
    training.state === "done"
      ? `trained: ${training.episodesRun} episodes, success ${(training.successRate ?? 0).toFixed(2)}`
      : training.state === "failed"
        ? `training failed: ${training.error}`
        : training.state;

  el("pending").textContent = controller.pendingCounterfactual.join(", ") || "(none)";

  const panel = el("explanation");
  if (controller.explanation) {
    const chips = controller.explanation.chips
      .map((chip) => `<span class="chip ${chip.dominant ?? "none"}">${chip.label}: ${
        chip.dominant === "A" ? "agent route" : chip.dominant === "U" ? "your route" : "no difference"
      }</span>`)
      .join(" ");
    panel.innerHTML = `<p>${controller.explanation.text}</p><div>${chips}</div>`;
  } else {
    panel.textContent = "Pause playback, queue an alternative action, and ask why not.";
  }

  const legend = el("legend");
  if (controller.overlay) {
    legend.innerHTML = legendStops(controller.overlay)
      .map((s) => `<span style="background:${s.color}">${s.value.toFixed(2)}</span>`)
      .join("");
  } else {
    legend.textContent = "";
  }
}

async function guard(work: () => Promise<void>): Promise<void> {
  try {
    await work();
  } catch (error) {
    el("error").textContent = String(error);
    setTimeout(() => (el("error").textContent = ""), 5000);
  }
  draw();
}

function stopPlayback(): void {
  controller.pause();
  if (playTimer !== null) {
    window.clearInterval(playTimer);
    playTimer = null;
  }
}

function wire(): void {
  el("connect").onclick = () =>
    guard(async () => {
      await controller.createSession(DEFAULT_CONFIG);
    });
  el("train").onclick = () =>
    guard(async () => {
      await controller.train(undefined, () => renderPanels());
    });
  el("play").onclick = () =>
    guard(async () => {
      controller.play();
      playTimer = window.setInterval(() => {
        if (!controller.playing || controller.state?.done) {
          stopPlayback();
          draw();
          return;
        }
        void controller.step().then(draw);
      }, 350);
    });
  el("pause").onclick = () => {
    stopPlayback();
    draw();
  };
  el("step").onclick = () => guard(async () => void (await controller.step()));
  el("reset").onclick = () =>
    guard(async () => {
      stopPlayback();
      await controller.reset();
    });
  for (const action of ["up", "down", "left", "right"] as ActionName[]) {
    el(`cf-${action}`).onclick = () => {
      controller.queueCounterfactualAction(action);
      draw();
    };
  }
  el("cf-clear").onclick = () => {
    controller.clearCounterfactual();
    draw();
  };
  el("explain-agg").onclick = () =>
    guard(async () => void (await controller.requestExplanation({ mode: "aggregated" })));
  el("explain-local").onclick = () =>
    guard(async () => void (await controller.requestExplanation({ mode: "local" })));
  el<HTMLSelectElement>("overlay").onchange = (event) =>
    guard(async () => {
      await controller.selectOverlay((event.target as HTMLSelectElement).value);
    });
  el("edit-toggle").onclick = () => {
    editMode = !editMode;
    el("edit-toggle").textContent = editMode ? "editing: click cells" : "edit map";
  };
  el<HTMLSelectElement>("edit-glyph").onchange = (event) => {
    editGlyph = (event.target as HTMLSelectElement).value;
  };
  canvas.onclick = (event) => {
    if (!editMode || !controller.map) return;
    const rect = canvas.getBoundingClientRect();
    const x = Math.floor((event.clientX - rect.left) / CELL);
    const y = Math.floor((event.clientY - rect.top) / CELL);
    void guard(async () => {
      await controller.applyEdits([{ x, y, glyph: editGlyph }]);
    });
  };
  el("retrain").onclick = () => guard(async () => void (await controller.train()));

  el<HTMLSelectElement>("overlay").innerHTML =
    `<option value="none">no overlay</option><option value="agent">agent values</option>` +
    DEFAULT_CONFIG.classes.map((c) => `<option value="${c.id}">${c.display_name}</option>`).join("");
}

wire();
draw();
