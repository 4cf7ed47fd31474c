/** Wire types for the /api/v1 service. */

export type ActionName = "up" | "down" | "left" | "right";

export interface Point {
  x: number;
  y: number;
}

export interface ClassInfo {
  id: number;
  name: string;
  sign: "positive" | "negative" | "mixed";
  display_name: string;
}

export interface ObjectView {
  id: number;
  glyph: string;
  class_id: number;
  terminal: boolean;
  x: number;
  y: number;
}

export interface MapView {
  width: number;
  height: number;
  rows: string[];
  starts: Point[];
  goals: Point[];
  objects: ObjectView[];
  classes: ClassInfo[];
}

export interface StateView {
  position: Point;
  step_count: number;
  done: boolean;
  max_steps: number;
  trained: boolean;
  stale: boolean;
}

export interface SessionCreated {
  session_id: string;
  map: MapView;
  state: StateView;
}

export interface Frame {
  index: number;
  position: Point;
  action: ActionName | null;
  reward_total: number;
  reward_by_class: number[] | null;
  terminal: boolean;
  done: boolean;
}

export interface StepResponse {
  frame: Frame;
  state: StateView;
}

export interface TrainStarted {
  job_id: string;
  status: "running";
}

export interface JobView {
  job_id: string;
  session_id: string;
  status: "running" | "done" | "failed";
  episodes_run?: number;
  success_rate?: number;
  error?: string;
}

export interface ClassComparison {
  mean_agent: number;
  mean_user: number;
  dominant: "A" | "U" | null;
  sign: "positive" | "negative" | "mixed";
}

export interface LocalTopView {
  set_agent: number[];
  set_user: number[];
  method: "max-set" | "top-means";
}

export interface StructureView {
  mode: "aggregated" | "local";
  empty: boolean;
  per_class: Record<string, ClassComparison>;
  local_top?: LocalTopView;
}

export interface TrajectoryView {
  origin: "agent" | "counterfactual";
  terminated: { kind: string; class_id: number | null };
  actions: ActionName[];
  path: Point[];
  length: number;
}

export interface ExplainResponse {
  structure: StructureView;
  text: string;
  action_agent: ActionName;
  action_user: ActionName;
  traj_agent: TrajectoryView;
  traj_user: TrajectoryView;
}

export interface HeatmapResponse {
  model: string;
  width: number;
  height: number;
  values: (number | null)[][];
}

export interface EditResponse {
  staleness: boolean;
  changed: boolean;
}

export interface ThresholdPoint {
  threshold: number;
  agreement: number | null;
  coverage: number;
}

export interface FaithfulnessView {
  direct_agreement: number;
  probe_accuracy: number;
  probe_kind: string;
  threshold_curve: ThresholdPoint[];
  positive_only_curve: ThresholdPoint[];
  rmspe_per_run: number[];
  mean_rmspe: number | null;
  states_evaluated: number;
  excluded_near_zero: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  field?: string;
}

/** Experiment config accepted by POST /sessions (map text inline). */
export interface SessionConfig {
  map: { text: string };
  classes: Array<{
    id: number;
    name: string;
    sign: string;
    display_name: string;
    consequence: string;
  }>;
  learner?: Record<string, number>;
  influence?: Record<string, unknown>;
  explain?: Record<string, unknown>;
  faithfulness?: Record<string, unknown>;
}
