"""HTTP service exposing sessions, training jobs, playback, counterfactual
explanations, heatmaps, map editing, and faithfulness reports.

JSON over HTTP under /api/v1. Errors are {code, message, field?}. Training
runs on a background thread and is polled as a job resource. Sessions are
independent; within a session, mutations are serialized by a lock.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from typing import Any, Optional

from fastapi import Body, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import env, workflow
from .env import Action, EnvState, GridError, GridMap, MalformedMap
from .faithfulness import TooFewSamples
from .persistence import ExperimentConfig, ValidationError, parse_config
from .rollout import Trajectory

API_PREFIX = "/api/v1"


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, field_path: Optional[str] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.field_path = field_path


@dataclass
class Session:
    session_id: str
    config: ExperimentConfig
    grid: GridMap
    map_text: str
    artifacts: Optional[workflow.TrainedArtifacts] = None
    state: EnvState = None  # type: ignore[assignment]
    trace: list[dict] = field(default_factory=list)
    stale: bool = False
    lock: threading.RLock = field(default_factory=threading.RLock)

    @property
    def trained(self) -> bool:
        return self.artifacts is not None and self.artifacts.episodes_run > 0


@dataclass
class TrainJob:
    job_id: str
    session_id: str
    status: str = "running"  # running | done | failed
    episodes_run: int = 0
    success_rate: float = 0.0
    error: Optional[str] = None


class ServiceState:
    def __init__(self):
        self.sessions: dict[str, Session] = {}
        self.jobs: dict[str, TrainJob] = {}
        self.registry_lock = threading.Lock()

    def session(self, session_id: str) -> Session:
        with self.registry_lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}")
        return session

    def job(self, job_id: str) -> TrainJob:
        with self.registry_lock:
            job = self.jobs.get(job_id)
        if job is None:
            raise ApiError(404, "unknown_job", f"no training job {job_id!r}")
        return job


def _state_view(session: Session) -> dict:
    s = session.state
    return {
        "position": {"x": s.position[0], "y": s.position[1]},
        "step_count": s.step_count,
        "done": s.done,
        "max_steps": s.max_steps,
        "trained": session.trained,
        "stale": session.stale,
    }


def _map_view(session: Session) -> dict:
    grid = session.grid
    return {
        "width": grid.width,
        "height": grid.height,
        "rows": list(grid.rows),
        "starts": [{"x": x, "y": y} for x, y in grid.start_positions],
        "goals": [{"x": x, "y": y} for x, y in sorted(grid.goal_cells)],
        "objects": [
            {
                "id": o.object_id,
                "glyph": o.glyph,
                "class_id": o.class_id,
                "terminal": o.terminal,
                "x": o.x,
                "y": o.y,
            }
            for o in grid.objects
        ],
        "classes": [
            {
                "id": rc.class_id,
                "name": rc.name,
                "sign": rc.sign_mode.value,
                "display_name": rc.display_name,
            }
            for rc in session.config.classes
        ],
    }


def _trajectory_view(traj: Trajectory) -> dict:
    return {
        "origin": traj.origin,
        "terminated": {
            "kind": traj.terminated.kind.value,
            "class_id": traj.terminated.class_id,
        },
        "actions": [env.ACTION_NAMES[a] for a in traj.actions],
        "path": [{"x": x, "y": y} for x, y in traj.positions],
        "length": len(traj),
    }


def _structure_view(structure) -> dict:
    view: dict[str, Any] = {
        "mode": structure.mode,
        "empty": structure.empty,
        "per_class": {
            str(cid): {
                "mean_agent": st.mean_agent,
                "mean_user": st.mean_user,
                "dominant": st.dominant.value if st.dominant else None,
                "sign": st.sign_mode.value,
            }
            for cid, st in structure.per_class.items()
        },
    }
    if structure.local_top is not None:
        view["local_top"] = {
            "set_agent": list(structure.local_top.set_agent),
            "set_user": list(structure.local_top.set_user),
            "method": structure.local_top.method.value,
        }
    return view


def _parse_action(name: Any, field_path: str) -> Action:
    if not isinstance(name, str):
        raise ApiError(400, "bad_action", "action must be a string", field_path)
    try:
        return Action.from_name(name)
    except ValueError:
        raise ApiError(400, "bad_action", f"unknown action {name!r}", field_path) from None


def _append_frame(session: Session, action: Optional[Action], transition=None) -> dict:
    s = session.state
    frame = {
        "index": len(session.trace),
        "position": {"x": s.position[0], "y": s.position[1]},
        "action": env.ACTION_NAMES[action] if action is not None else None,
        "reward_total": transition.reward_total if transition else 0.0,
        "reward_by_class": list(transition.reward_by_class) if transition else None,
        "terminal": transition.terminal if transition else False,
        "done": s.done,
    }
    session.trace.append(frame)
    return frame


def create_app() -> FastAPI:
    app = FastAPI(title="rewardlens")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    state = ServiceState()
    app.state.service = state

    @app.exception_handler(ApiError)
    async def api_error_handler(_req: Request, exc: ApiError):
        body = {"code": exc.code, "message": exc.message}
        if exc.field_path:
            body["field"] = exc.field_path
        return JSONResponse(status_code=exc.status, content=body)

    def require_ready(session: Session) -> workflow.TrainedArtifacts:
        if not session.trained:
            raise ApiError(409, "untrained_or_stale", "session has no trained artifacts")
        if session.stale:
            raise ApiError(
                409, "untrained_or_stale", "map was edited after training; retrain first"
            )
        return session.artifacts

    @app.post(API_PREFIX + "/sessions", status_code=201)
    def create_session(payload: dict = Body(...)):
        try:
            config = parse_config(json.dumps(payload))
            grid = workflow.load_grid(config)
        except ValidationError as exc:
            raise ApiError(400, "validation_error", exc.message, exc.field_path) from None
        except GridError as exc:
            raise ApiError(400, "validation_error", str(exc), "map") from None
        session = Session(
            session_id=uuid.uuid4().hex,
            config=config,
            grid=grid,
            map_text=config.map_text,
            state=env.reset(grid, 0, config.learner.max_steps),
        )
        _append_frame(session, None)
        with state.registry_lock:
            state.sessions[session.session_id] = session
        return {"session_id": session.session_id, "map": _map_view(session),
                "state": _state_view(session)}

    @app.get(API_PREFIX + "/sessions/{session_id}/state")
    def get_state(session_id: str):
        session = state.session(session_id)
        with session.lock:
            return _state_view(session)

    @app.get(API_PREFIX + "/sessions/{session_id}/map")
    def get_map(session_id: str):
        session = state.session(session_id)
        with session.lock:
            return _map_view(session)

    @app.post(API_PREFIX + "/sessions/{session_id}/reset")
    def reset_session(session_id: str, payload: dict = Body(default={})):
        session = state.session(session_id)
        start_index = payload.get("start_index", 0)
        if not isinstance(start_index, int):
            raise ApiError(400, "validation_error", "start_index must be an integer",
                           "start_index")
        with session.lock:
            try:
                session.state = env.reset(
                    session.grid, start_index, session.config.learner.max_steps
                )
            except GridError as exc:
                raise ApiError(400, "validation_error", str(exc), "start_index") from None
            session.trace = []
            _append_frame(session, None)
            return _state_view(session)

    @app.post(API_PREFIX + "/sessions/{session_id}/step")
    def step_session(session_id: str, payload: dict = Body(default={})):
        session = state.session(session_id)
        with session.lock:
            if session.state.done:
                raise ApiError(409, "episode_done", "episode finished; reset to continue")
            if payload.get("action") is not None:
                action = _parse_action(payload["action"], "action")
            else:
                policy = session.artifacts.agent if session.artifacts else None
                action = policy.greedy(session.state.position) if policy else Action.UP
            transition = env.step(
                session.state, action, session.grid, session.config.classes
            )
            session.state = transition.next_state
            frame = _append_frame(session, action, transition)
            return {"frame": frame, "state": _state_view(session)}

    @app.get(API_PREFIX + "/sessions/{session_id}/trace")
    def get_trace(session_id: str):
        session = state.session(session_id)
        with session.lock:
            return {"frames": list(session.trace)}

    @app.post(API_PREFIX + "/sessions/{session_id}/train", status_code=202)
    def train_session(session_id: str, payload: dict = Body(default={})):
        session = state.session(session_id)
        episodes = payload.get("episodes")
        seed = payload.get("seed")
        for name, value in (("episodes", episodes), ("seed", seed)):
            if value is not None and (not isinstance(value, int) or value < 0):
                raise ApiError(400, "validation_error", f"{name} must be a non-negative integer",
                               name)
        job = TrainJob(job_id=uuid.uuid4().hex, session_id=session_id)
        with state.registry_lock:
            state.jobs[job.job_id] = job
        map_snapshot = session.map_text

        def run():
            try:
                artifacts = workflow.train_experiment(
                    session.config, grid=session.grid, episodes=episodes, seed=seed
                )
                with session.lock:
                    session.artifacts = artifacts
                    # An edit racing the training keeps the session stale.
                    session.stale = session.map_text != map_snapshot
                job.episodes_run = artifacts.episodes_run
                job.success_rate = artifacts.success_rate
                job.status = "done"
            except Exception as exc:  # surfaced through the job resource
                job.error = f"{type(exc).__name__}: {exc}"
                job.status = "failed"

        threading.Thread(target=run, daemon=True).start()
        return {"job_id": job.job_id, "status": job.status}

    @app.get(API_PREFIX + "/jobs/{job_id}")
    def get_job(job_id: str):
        job = state.job(job_id)
        body = {"job_id": job.job_id, "session_id": job.session_id, "status": job.status}
        if job.status == "done":
            body["episodes_run"] = job.episodes_run
            body["success_rate"] = job.success_rate
        if job.status == "failed":
            body["error"] = job.error
        return body

    @app.post(API_PREFIX + "/sessions/{session_id}/explain")
    def explain_session(session_id: str, payload: dict = Body(...)):
        session = state.session(session_id)
        with session.lock:
            artifacts = require_ready(session)
            grid = session.grid
            position = session.state.position
            config = session.config

        at_state = payload.get("at_state")
        if at_state is not None:
            if (
                not isinstance(at_state, dict)
                or not isinstance(at_state.get("x"), int)
                or not isinstance(at_state.get("y"), int)
            ):
                raise ApiError(400, "validation_error", "at_state must be {x, y}", "at_state")
            position = (at_state["x"], at_state["y"])
        raw_actions = payload.get("counterfactual_actions")
        if not isinstance(raw_actions, list) or not raw_actions:
            raise ApiError(400, "bad_action", "counterfactual_actions must be a non-empty list",
                           "counterfactual_actions")
        counterfactual = [
            _parse_action(a, f"counterfactual_actions[{i}]") for i, a in enumerate(raw_actions)
        ]
        agent_action = None
        if payload.get("agent_action") is not None:
            agent_action = _parse_action(payload["agent_action"], "agent_action")
        mode = payload.get("mode", "aggregated")
        if mode not in ("aggregated", "local"):
            raise ApiError(400, "validation_error", "mode must be aggregated or local", "mode")

        try:
            result = workflow.explain_query(
                grid,
                config.classes,
                config.lexicon,
                artifacts.agent,
                artifacts.ips,
                position,
                counterfactual,
                mode=mode,
                exclusion_ratio=config.explain.exclusion_ratio,
                floor=config.explain.floor,
                extra_steps=config.explain.extra_steps,
                agent_action=agent_action,
            )
        except ValueError as exc:
            raise ApiError(400, "bad_action", str(exc)) from None
        return {
            "structure": _structure_view(result.structure),
            "text": result.text,
            "action_agent": env.ACTION_NAMES[result.action_agent],
            "action_user": env.ACTION_NAMES[result.action_user],
            "traj_agent": _trajectory_view(result.traj_agent),
            "traj_user": _trajectory_view(result.traj_user),
        }

    @app.get(API_PREFIX + "/sessions/{session_id}/heatmap")
    def heatmap(session_id: str, model: str = "agent"):
        session = state.session(session_id)
        with session.lock:
            if not session.trained:
                raise ApiError(409, "untrained_or_stale", "train the session first")
            artifacts = session.artifacts
            grid = session.grid
            if model == "agent":
                vf = artifacts.agent
            else:
                ip = _find_ip(artifacts.ips, session.config, model)
                if ip is None:
                    raise ApiError(404, "unknown_model", f"no model {model!r}", "model")
                vf = ip.values
            return {
                "model": model,
                "width": grid.width,
                "height": grid.height,
                "values": workflow.heatmap_grid(grid, vf),
            }

    @app.post(API_PREFIX + "/sessions/{session_id}/map/edit")
    def edit_map(session_id: str, payload: dict = Body(...)):
        session = state.session(session_id)
        edits_raw = payload.get("set_cells")
        if not isinstance(edits_raw, list):
            raise ApiError(400, "invalid_edit", "set_cells must be a list", "set_cells")
        edits = []
        for i, item in enumerate(edits_raw):
            if (
                not isinstance(item, dict)
                or not isinstance(item.get("x"), int)
                or not isinstance(item.get("y"), int)
                or not isinstance(item.get("glyph"), str)
            ):
                raise ApiError(400, "invalid_edit", "each edit needs x, y, glyph",
                               f"set_cells[{i}]")
            edits.append((item["x"], item["y"], item["glyph"]))
        with session.lock:
            if not edits:
                return {"staleness": session.stale, "changed": False}
            try:
                new_text = env.apply_cell_edits(session.map_text, edits)
                new_grid = env.load_map(new_text, session.config.classes)
            except (GridError, MalformedMap) as exc:
                raise ApiError(400, "invalid_edit", str(exc), "set_cells") from None
            changed = new_text != session.map_text
            if changed:
                session.map_text = new_text
                session.grid = new_grid
                session.stale = True
                session.state = env.reset(new_grid, 0, session.config.learner.max_steps)
                session.trace = []
                _append_frame(session, None)
            return {"staleness": session.stale, "changed": changed}

    @app.get(API_PREFIX + "/sessions/{session_id}/faithfulness")
    def faithfulness_endpoint(session_id: str):
        session = state.session(session_id)
        with session.lock:
            artifacts = require_ready(session)
            grid = session.grid
            config = session.config
        try:
            report = workflow.faithfulness_report(config, grid, artifacts)
        except TooFewSamples as exc:
            raise ApiError(409, "too_few_samples", str(exc)) from None
        return report.to_dict()

    return app


def _find_ip(ips, config: ExperimentConfig, model: str):
    """Resolve a heatmap model name: class id digits or class name."""
    for ip in ips:
        rc = config.classes.by_id(ip.class_id)
        if model == str(ip.class_id) or model == rc.name:
            return ip
    return None


def serve(config: ExperimentConfig, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Run the service until interrupted. The config seeds the first session."""
    import uvicorn

    app = create_app()
    app.state.default_config = config
    uvicorn.run(app, host=host, port=port, log_level="warning")
