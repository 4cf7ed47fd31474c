/** Typed client for the /api/v1 service. */

import type {
  ActionName,
  ApiErrorBody,
  EditResponse,
  ExplainResponse,
  FaithfulnessView,
  Frame,
  HeatmapResponse,
  JobView,
  MapView,
  Point,
  SessionConfig,
  SessionCreated,
  StateView,
  StepResponse,
  TrainStarted,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(body.message);
  }

  /** True when the server wants the session retrained first. */
  get needsRetrain(): boolean {
    return this.status === 409 && this.body.code === "untrained_or_stale";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/v1${path}`, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let parsed: ApiErrorBody;
      try {
        parsed = (await response.json()) as ApiErrorBody;
      } catch {
        parsed = { code: "unknown", message: `HTTP ${response.status}` };
      }
      throw new ApiError(response.status, parsed);
    }
    return (await response.json()) as T;
  }

  createSession(config: SessionConfig): Promise<SessionCreated> {
    return this.request("POST", "/sessions", config);
  }

  getState(sessionId: string): Promise<StateView> {
    return this.request("GET", `/sessions/${sessionId}/state`);
  }

  getMap(sessionId: string): Promise<MapView> {
    return this.request("GET", `/sessions/${sessionId}/map`);
  }

  reset(sessionId: string, startIndex?: number): Promise<StateView> {
    return this.request("POST", `/sessions/${sessionId}/reset`,
      startIndex === undefined ? {} : { start_index: startIndex });
  }

  step(sessionId: string, action?: ActionName): Promise<StepResponse> {
    return this.request("POST", `/sessions/${sessionId}/step`,
      action === undefined ? {} : { action });
  }

  trace(sessionId: string): Promise<{ frames: Frame[] }> {
    return this.request("GET", `/sessions/${sessionId}/trace`);
  }

  startTraining(sessionId: string, overrides?: { episodes?: number; seed?: number }):
      Promise<TrainStarted> {
    return this.request("POST", `/sessions/${sessionId}/train`, overrides ?? {});
  }

  getJob(jobId: string): Promise<JobView> {
    return this.request("GET", `/jobs/${jobId}`);
  }

  /** Poll a training job until it leaves the running state. */
  async pollJob(
    jobId: string,
    onUpdate?: (job: JobView) => void,
    intervalMs = 150,
  ): Promise<JobView> {
    for (;;) {
      const job = await this.getJob(jobId);
      onUpdate?.(job);
      if (job.status !== "running") {
        return job;
      }
      await sleep(intervalMs);
    }
  }

  explain(
    sessionId: string,
    counterfactual: ActionName[],
    options?: { atState?: Point; mode?: "aggregated" | "local"; agentAction?: ActionName },
  ): Promise<ExplainResponse> {
    return this.request("POST", `/sessions/${sessionId}/explain`, {
      counterfactual_actions: counterfactual,
      at_state: options?.atState,
      mode: options?.mode ?? "aggregated",
      agent_action: options?.agentAction,
    });
  }

  heatmap(sessionId: string, model: string): Promise<HeatmapResponse> {
    return this.request("GET", `/sessions/${sessionId}/heatmap?model=${encodeURIComponent(model)}`);
  }

  editMap(sessionId: string, cells: Array<Point & { glyph: string }>): Promise<EditResponse> {
    return this.request("POST", `/sessions/${sessionId}/map/edit`, { set_cells: cells });
  }

  faithfulness(sessionId: string): Promise<FaithfulnessView> {
    return this.request("GET", `/sessions/${sessionId}/faithfulness`);
  }
}
