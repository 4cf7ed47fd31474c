/** Session controller: the UI's single state machine.
 *
 * Owns the lifecycle create -> train -> playback -> pause -> counterfactual
 * query -> explanation -> map edit -> retrain. Never simulates or learns;
 * every displayed value is copied from an API response. DOM code renders
 * snapshots of this controller and calls its methods.
 */

import { ApiClient, ApiError } from "./api.js";
import type {
  ActionName,
  ExplainResponse,
  Frame,
  JobView,
  MapView,
  Point,
  SessionConfig,
  StateView,
} from "./types.js";
import { buildOverlay, type OverlayModel } from "./overlay.js";

export type OverlaySelection = "none" | "agent" | string; // class id or name

export interface ExplanationPanel {
  text: string;
  response: ExplainResponse;
  /** Per-class dominance chips, in class-id order. */
  chips: Array<{ classId: number; label: string; dominant: "A" | "U" | null }>;
}

export interface TrainingStatus {
  state: "idle" | "running" | "done" | "failed";
  episodesRun?: number;
  successRate?: number;
  error?: string;
}

export class SessionController {
  sessionId: string | null = null;
  map: MapView | null = null;
  state: StateView | null = null;
  frames: Frame[] = [];
  playing = false;
  overlaySelection: OverlaySelection = "none";
  overlay: OverlayModel | null = null;
  pendingCounterfactual: ActionName[] = [];
  explanation: ExplanationPanel | null = null;
  training: TrainingStatus = { state: "idle" };
  retrainPrompt = false;

  constructor(private api: ApiClient) {}

  /** Staleness banner state mirrors the server's stale flag verbatim. */
  get staleBannerVisible(): boolean {
    return this.state?.stale ?? false;
  }

  get trained(): boolean {
    return this.state?.trained ?? false;
  }

  private requireSession(): string {
    if (this.sessionId === null) {
      throw new Error("no session; call createSession first");
    }
    return this.sessionId;
  }

  async createSession(config: SessionConfig): Promise<void> {
    const created = await this.api.createSession(config);
    this.sessionId = created.session_id;
    this.map = created.map;
    this.state = created.state;
    this.frames = (await this.api.trace(created.session_id)).frames;
    this.explanation = null;
    this.overlay = null;
  }

  async refresh(): Promise<void> {
    const id = this.requireSession();
    this.state = await this.api.getState(id);
    this.map = await this.api.getMap(id);
  }

  async train(
    overrides?: { episodes?: number; seed?: number },
    onProgress?: (job: JobView) => void,
  ): Promise<TrainingStatus> {
    const id = this.requireSession();
    this.training = { state: "running" };
    const started = await this.api.startTraining(id, overrides);
    const job = await this.api.pollJob(started.job_id, onProgress);
    if (job.status === "done") {
      this.training = {
        state: "done",
        episodesRun: job.episodes_run,
        successRate: job.success_rate,
      };
      this.retrainPrompt = false;
    } else {
      this.training = { state: "failed", error: job.error };
    }
    await this.refresh();
    if (this.overlaySelection !== "none") {
      await this.selectOverlay(this.overlaySelection);
    }
    return this.training;
  }

  /** One playback step; the agent picks the action when none is given. */
  async step(action?: ActionName): Promise<Frame> {
    const id = this.requireSession();
    const response = await this.api.step(id, action);
    this.state = response.state;
    this.frames.push(response.frame);
    return response.frame;
  }

  pause(): void {
    this.playing = false;
  }

  play(): void {
    this.playing = true;
  }

  async reset(startIndex?: number): Promise<void> {
    const id = this.requireSession();
    this.state = await this.api.reset(id, startIndex);
    this.frames = (await this.api.trace(id)).frames;
  }

  /** Build up the ordered multi-step counterfactual before submitting. */
  queueCounterfactualAction(action: ActionName): void {
    this.pendingCounterfactual.push(action);
  }

  removeQueuedAction(index: number): void {
    this.pendingCounterfactual.splice(index, 1);
  }

  clearCounterfactual(): void {
    this.pendingCounterfactual = [];
  }

  /**
   * Ask the why-not question for the queued actions at the current state
   * (or an explicit decision point). A stale/untrained conflict surfaces
   * as a retrain prompt instead of an error.
   */
  async requestExplanation(
    options: { atState?: Point; mode?: "aggregated" | "local" } = {},
  ): Promise<ExplanationPanel | null> {
    const id = this.requireSession();
    if (this.pendingCounterfactual.length === 0) {
      throw new Error("queue at least one counterfactual action first");
    }
    try {
      const response = await this.api.explain(id, this.pendingCounterfactual, options);
      this.explanation = {
        text: response.text,
        response,
        chips: Object.entries(response.structure.per_class)
          .map(([cid, stats]) => ({
            classId: Number(cid),
            label: this.classLabel(Number(cid)),
            dominant: stats.dominant,
          }))
          .sort((a, b) => a.classId - b.classId),
      };
      this.retrainPrompt = false;
      return this.explanation;
    } catch (error) {
      if (error instanceof ApiError && error.needsRetrain) {
        this.retrainPrompt = true;
        return null;
      }
      throw error;
    }
  }

  classLabel(classId: number): string {
    const info = this.map?.classes.find((c) => c.id === classId);
    return info?.display_name ?? `class ${classId}`;
  }

  /** Fetch and install a heatmap overlay; "none" clears it. */
  async selectOverlay(selection: OverlaySelection): Promise<void> {
    this.overlaySelection = selection;
    if (selection === "none") {
      this.overlay = null;
      return;
    }
    const id = this.requireSession();
    try {
      this.overlay = buildOverlay(await this.api.heatmap(id, selection));
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.retrainPrompt = true;
        this.overlay = null;
        return;
      }
      throw error;
    }
  }

  /** Apply cell edits; server-side validation errors pass through. */
  async applyEdits(cells: Array<Point & { glyph: string }>): Promise<boolean> {
    const id = this.requireSession();
    const result = await this.api.editMap(id, cells);
    await this.refresh();
    if (result.changed) {
      this.explanation = null;
      this.frames = (await this.api.trace(id)).frames;
    }
    return result.staleness;
  }
}
