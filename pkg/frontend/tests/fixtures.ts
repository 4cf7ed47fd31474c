/** Recorded API response shapes used by the contract tests. */

import type {
  ExplainResponse,
  HeatmapResponse,
  MapView,
  SessionCreated,
  StateView,
} from "../src/types.js";

export const MAP_FIXTURE: MapView = {
  width: 5,
  height: 5,
  rows: ["#####", "#S.b#", "#...#", "#..G#", "#####"],
  starts: [{ x: 1, y: 1 }],
  goals: [{ x: 3, y: 3 }],
  objects: [{ id: 0, glyph: "b", class_id: 1, terminal: true, x: 3, y: 1 }],
  classes: [
    { id: 0, name: "goal", sign: "positive", display_name: "green goal" },
    { id: 1, name: "stairs", sign: "negative", display_name: "dangerous stairs" },
  ],
};

export const STATE_FIXTURE: StateView = {
  position: { x: 1, y: 1 },
  step_count: 0,
  done: false,
  max_steps: 100,
  trained: true,
  stale: false,
};

export const SESSION_FIXTURE: SessionCreated = {
  session_id: "abc123",
  map: MAP_FIXTURE,
  state: STATE_FIXTURE,
};

export const HEATMAP_FIXTURE: HeatmapResponse = {
  model: "agent",
  width: 5,
  height: 5,
  values: [
    [null, null, null, null, null],
    [null, 0.2, 0.4, 0.1, null],
    [null, 0.4, 0.6, 0.8, null],
    [null, 0.6, 0.8, 1.0, null],
    [null, null, null, null, null],
  ],
};

export const EXPLAIN_FIXTURE: ExplainResponse = {
  structure: {
    mode: "aggregated",
    empty: false,
    per_class: {
      "0": { mean_agent: 0.41, mean_user: 0.33, dominant: "A", sign: "positive" },
      "1": { mean_agent: 0.02, mean_user: 0.19, dominant: "U", sign: "negative" },
    },
  },
  text:
    "If the agent goes up, it will pass through regions influenced by the " +
    "dangerous stairs; going down feels safer.",
  action_agent: "down",
  action_user: "up",
  traj_agent: {
    origin: "agent",
    terminated: { kind: "goal", class_id: null },
    actions: ["down", "down", "right", "right"],
    path: [
      { x: 1, y: 1 },
      { x: 1, y: 2 },
      { x: 1, y: 3 },
      { x: 2, y: 3 },
      { x: 3, y: 3 },
    ],
    length: 4,
  },
  traj_user: {
    origin: "counterfactual",
    terminated: { kind: "danger", class_id: 1 },
    actions: ["up", "right", "right"],
    path: [
      { x: 1, y: 1 },
      { x: 1, y: 1 },
      { x: 2, y: 1 },
      { x: 3, y: 1 },
    ],
    length: 3,
  },
};

type Responder = (body: string | undefined) => { status: number; body: unknown };

/** Tiny fetch stub keyed by "METHOD path"; records every call. */
export function fetchStub(routes: Record<string, Responder | unknown>) {
  const calls: Array<{ method: string; url: string; body: unknown }> = [];
  const impl = async (input: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const path = input.replace(/^https?:\/\/[^/]+/, "");
    const rawBody = typeof init?.body === "string" ? init.body : undefined;
    calls.push({ method, url: path, body: rawBody ? JSON.parse(rawBody) : undefined });
    const key = `${method} ${path}`;
    const route = routes[key];
    if (route === undefined) {
      return new Response(
        JSON.stringify({ code: "unknown", message: `no stub for ${key}` }),
        { status: 500 },
      );
    }
    const result =
      typeof route === "function" ? (route as Responder)(rawBody) : { status: 200, body: route };
    return new Response(JSON.stringify(result.body), { status: result.status });
  };
  return { impl, calls };
}
