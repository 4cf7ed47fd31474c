"""Checkpoint and experiment-config I/O.

Checkpoints are versioned JSON documents with value tables stored as
sorted key/row pairs, so identical artifacts serialize to identical bytes.
Configs are JSON with sections map / classes / learner / influence /
explain / faithfulness; missing fields take documented defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .env import RewardClass, RewardClassSet, SignMode, UnknownClass
from .explain import (
    DEFAULT_EXCLUSION_FLOOR,
    DEFAULT_EXCLUSION_RATIO,
    Lexicon,
    lexicon_for,
)
from .faithfulness import DEFAULT_KNN_K, DEFAULT_NEAR_ZERO, DEFAULT_THRESHOLDS
from .influence import InfluenceConfig, InfluencePredictor, IpMode, UpdateSchedule
from .learner import LearnerConfig, MlpValues, TableValues, ValueFunction

CHECKPOINT_VERSION = 1


class PersistenceError(Exception):
    pass


class VersionMismatch(PersistenceError):
    pass


class MapHashMismatch(PersistenceError):
    pass


class CorruptFile(PersistenceError):
    pass


class ValidationError(PersistenceError):
    """Config rejection carrying the offending field path."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path
        self.message = message


def map_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# --- value function (de)serialization -----------------------------------

def _encode_values(vf: ValueFunction) -> dict:
    if isinstance(vf, TableValues):
        return {
            "kind": "table",
            "action_count": vf.action_count,
            "default": vf.default,
            "entries": [
                [f"{key[0]},{key[1]}", [float(v) for v in row]]
                for key, row in vf.items()
            ],
        }
    if isinstance(vf, MlpValues):
        return {
            "kind": "mlp",
            "action_count": vf.action_count,
            "feature_dim": vf.feature_dim,
            "w1": vf.w1.tolist(),
            "b1": vf.b1.tolist(),
            "w2": vf.w2.tolist(),
            "b2": vf.b2.tolist(),
        }
    raise PersistenceError(f"cannot serialize value function of type {type(vf)!r}")


def _decode_values(data: dict, grid_width: int) -> ValueFunction:
    kind = data.get("kind")
    if kind == "table":
        vf = TableValues(int(data["action_count"]), float(data.get("default", 0.0)))
        for key_text, row in data["entries"]:
            x_text, y_text = key_text.split(",")
            key = (int(x_text), int(y_text))
            for action, value in enumerate(row):
                vf._row(key)[action] = float(value)
        return vf
    if kind == "mlp":
        dim = int(data["feature_dim"])

        def one_hot(key):
            phi = np.zeros(dim)
            phi[key[1] * grid_width + key[0]] = 1.0
            return phi

        vf = MlpValues(int(data["action_count"]), dim, one_hot)
        vf.w1 = np.asarray(data["w1"], dtype=np.float64)
        vf.b1 = np.asarray(data["b1"], dtype=np.float64)
        vf.w2 = np.asarray(data["w2"], dtype=np.float64)
        vf.b2 = np.asarray(data["b2"], dtype=np.float64)
        return vf
    raise CorruptFile(f"unknown value function kind {kind!r}")


# --- checkpoints ---------------------------------------------------------

@dataclass
class Checkpoint:
    map_text: str
    map_hash: str
    classes: RewardClassSet
    agent: ValueFunction
    ips: list[InfluencePredictor]
    learner_cfg: LearnerConfig
    ip_cfg: InfluenceConfig
    seed: int
    episodes_run: int
    format_version: int = CHECKPOINT_VERSION

    @property
    def trained(self) -> bool:
        return self.episodes_run > 0


def _classes_to_json(classes: RewardClassSet) -> list[dict]:
    return [
        {
            "id": rc.class_id,
            "name": rc.name,
            "sign": rc.sign_mode.value,
            "display_name": rc.display_name,
            "consequence": rc.consequence,
        }
        for rc in classes
    ]


def _classes_from_json(data: list[dict]) -> RewardClassSet:
    return RewardClassSet(
        RewardClass(
            class_id=int(item["id"]),
            name=str(item["name"]),
            sign_mode=SignMode(item["sign"]),
            display_name=str(item.get("display_name", item["name"])),
            consequence=str(item.get("consequence", "")),
        )
        for item in data
    )


def checkpoint_to_json(cp: Checkpoint) -> str:
    doc = {
        "format_version": cp.format_version,
        "map_hash": cp.map_hash,
        "map_text": cp.map_text,
        "seed": cp.seed,
        "episodes_run": cp.episodes_run,
        "classes": _classes_to_json(cp.classes),
        "learner_cfg": {
            "alpha": cp.learner_cfg.alpha,
            "gamma": cp.learner_cfg.gamma,
            "epsilon_start": cp.learner_cfg.epsilon_start,
            "epsilon_end": cp.learner_cfg.epsilon_end,
            "epsilon_decay_episodes": cp.learner_cfg.epsilon_decay_episodes,
            "episodes": cp.learner_cfg.episodes,
            "seed": cp.learner_cfg.seed,
            "max_steps": cp.learner_cfg.max_steps,
        },
        "ip_cfg": {
            "gamma": cp.ip_cfg.gamma,
            "alpha": cp.ip_cfg.alpha,
            "buffer_capacity": cp.ip_cfg.buffer_capacity,
            "schedule": cp.ip_cfg.schedule.value,
            "batch_size": cp.ip_cfg.batch_size,
            "class_gamma": {str(k): v for k, v in sorted(cp.ip_cfg.class_gamma.items())},
        },
        "agent": _encode_values(cp.agent),
        "ips": [
            {
                "class_id": ip.class_id,
                "sign": ip.sign_mode.value,
                "gamma": ip.gamma,
                "mode": ip.mode.value,
                "values": _encode_values(ip.values),
            }
            for ip in cp.ips
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_checkpoint(path: str | Path, cp: Checkpoint) -> None:
    Path(path).write_text(checkpoint_to_json(cp), encoding="utf-8")


def checkpoint_from_json(
    text: str,
    current_map_text: Optional[str] = None,
    force: bool = False,
) -> Checkpoint:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"checkpoint is not valid JSON: {exc}") from None
    try:
        version = int(doc["format_version"])
        if version != CHECKPOINT_VERSION:
            raise VersionMismatch(
                f"checkpoint version {version}, expected {CHECKPOINT_VERSION}"
            )
        map_text = doc["map_text"]
        stored_hash = doc["map_hash"]
        if not force:
            if map_digest(map_text) != stored_hash:
                raise MapHashMismatch("embedded map text does not match stored hash")
            if current_map_text is not None and map_digest(current_map_text) != stored_hash:
                raise MapHashMismatch("map file changed since the checkpoint was written")
        classes = _classes_from_json(doc["classes"])
        lc = doc["learner_cfg"]
        learner_cfg = LearnerConfig(
            alpha=lc["alpha"],
            gamma=lc["gamma"],
            epsilon_start=lc["epsilon_start"],
            epsilon_end=lc["epsilon_end"],
            epsilon_decay_episodes=lc["epsilon_decay_episodes"],
            episodes=lc["episodes"],
            seed=lc["seed"],
            max_steps=lc["max_steps"],
        )
        ic = doc["ip_cfg"]
        ip_cfg = InfluenceConfig(
            gamma=ic["gamma"],
            alpha=ic["alpha"],
            buffer_capacity=ic["buffer_capacity"],
            schedule=UpdateSchedule(ic["schedule"]),
            batch_size=ic["batch_size"],
            class_gamma={int(k): float(v) for k, v in ic["class_gamma"].items()},
        )
        width = _grid_width(map_text)
        agent = _decode_values(doc["agent"], width)
        ips = []
        for item in doc["ips"]:
            rc = classes.by_id(int(item["class_id"]))
            ip = InfluencePredictor(
                class_id=rc.class_id,
                sign_mode=SignMode(item["sign"]),
                gamma=float(item["gamma"]),
                alpha=ip_cfg.alpha,
                buffer_capacity=ip_cfg.buffer_capacity,
                schedule=ip_cfg.schedule,
                batch_size=ip_cfg.batch_size,
                mode=IpMode(item["mode"]),
                values=_decode_values(item["values"], width),
            )
            ips.append(ip)
        return Checkpoint(
            map_text=map_text,
            map_hash=stored_hash,
            classes=classes,
            agent=agent,
            ips=ips,
            learner_cfg=learner_cfg,
            ip_cfg=ip_cfg,
            seed=int(doc["seed"]),
            episodes_run=int(doc["episodes_run"]),
            format_version=version,
        )
    except (KeyError, TypeError, ValueError, UnknownClass) as exc:
        raise CorruptFile(f"checkpoint is missing or mistypes a field: {exc!r}") from None


def load_checkpoint(
    path: str | Path,
    current_map_text: Optional[str] = None,
    force: bool = False,
) -> Checkpoint:
    """Read a checkpoint; verify version and map hash unless forced."""
    text = Path(path).read_text(encoding="utf-8")
    return checkpoint_from_json(text, current_map_text=current_map_text, force=force)


def _grid_width(map_text: str) -> int:
    for line in map_text.splitlines():
        stripped = line.strip()
        if stripped and not stripped.startswith(";"):
            parts = stripped.split()
            if len(parts) == 3 and parts[0] == "GRID":
                return int(parts[1])
            break
    return 0


# --- experiment configuration -------------------------------------------

@dataclass
class ExplainSettings:
    exclusion_ratio: float = DEFAULT_EXCLUSION_RATIO
    floor: float = DEFAULT_EXCLUSION_FLOOR
    extra_steps: int = 5
    person: str = "third"


@dataclass
class FaithfulnessSettings:
    thresholds: list[float] = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    k: int = DEFAULT_KNN_K
    near_zero: float = DEFAULT_NEAR_ZERO


@dataclass
class ExperimentConfig:
    map_text: str
    classes: RewardClassSet
    lexicon: Lexicon
    learner: LearnerConfig
    influence: InfluenceConfig
    explain: ExplainSettings
    faithfulness: FaithfulnessSettings
    map_path: Optional[str] = None


def _expect(section: dict, allowed: set[str], path: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ValidationError(f"{path}.{sorted(unknown)[0]}", "unknown field")


def _number(section: dict, key: str, default, path: str, low=None, high=None,
            low_open: bool = False, integer: bool = False):
    value = section.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{path}.{key}", "must be a number")
    if integer and int(value) != value:
        raise ValidationError(f"{path}.{key}", "must be an integer")
    if low is not None and (value <= low if low_open else value < low):
        raise ValidationError(f"{path}.{key}", f"must be {'>' if low_open else '>='} {low}")
    if high is not None and value > high:
        raise ValidationError(f"{path}.{key}", f"must be <= {high}")
    return int(value) if integer else float(value)


def parse_config(text: str, base_dir: Optional[str | Path] = None) -> ExperimentConfig:
    """Parse and validate a JSON experiment config, applying defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError("$", f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("$", "config must be a JSON object")
    _expect(doc, {"map", "classes", "learner", "influence", "explain", "faithfulness"}, "$")

    map_section = doc.get("map")
    if not isinstance(map_section, dict):
        raise ValidationError("map", "section is required")
    _expect(map_section, {"text", "path"}, "map")
    map_path = map_section.get("path")
    map_text = map_section.get("text")
    if map_text is None and map_path is None:
        raise ValidationError("map", "either text or path is required")
    if map_text is None:
        resolved = Path(base_dir) / map_path if base_dir else Path(map_path)
        if not resolved.exists():
            raise ValidationError("map.path", f"file not found: {resolved}")
        map_text = resolved.read_text(encoding="utf-8")

    class_items = doc.get("classes")
    if not isinstance(class_items, list) or not class_items:
        raise ValidationError("classes", "a non-empty class list is required")
    parsed_classes = []
    for i, item in enumerate(class_items):
        if not isinstance(item, dict):
            raise ValidationError(f"classes[{i}]", "must be an object")
        _expect(item, {"id", "name", "sign", "display_name", "consequence"}, f"classes[{i}]")
        try:
            sign = SignMode(str(item.get("sign", "")))
        except ValueError:
            raise ValidationError(
                f"classes[{i}].sign", "must be positive, negative, or mixed"
            ) from None
        if "id" not in item or "name" not in item:
            raise ValidationError(f"classes[{i}]", "id and name are required")
        parsed_classes.append(
            RewardClass(
                class_id=int(item["id"]),
                name=str(item["name"]),
                sign_mode=sign,
                display_name=str(item.get("display_name", item["name"])),
                consequence=str(item.get("consequence", "")),
            )
        )
    try:
        classes = RewardClassSet(parsed_classes)
    except ValueError as exc:
        raise ValidationError("classes", str(exc)) from None

    learner_section = doc.get("learner", {})
    _expect(
        learner_section,
        {"alpha", "gamma", "epsilon_start", "epsilon_end", "epsilon_decay_episodes",
         "episodes", "seed", "max_steps"},
        "learner",
    )
    try:
        learner = LearnerConfig(
            alpha=_number(learner_section, "alpha", 0.1, "learner", low=0, high=1, low_open=True),
            gamma=_number(learner_section, "gamma", 0.99, "learner", low=0, high=1),
            epsilon_start=_number(learner_section, "epsilon_start", 1.0, "learner", low=0, high=1),
            epsilon_end=_number(learner_section, "epsilon_end", 0.05, "learner", low=0, high=1),
            epsilon_decay_episodes=_number(
                learner_section, "epsilon_decay_episodes", None, "learner", low=1, integer=True
            ),
            episodes=_number(learner_section, "episodes", 2000, "learner", low=0, integer=True),
            seed=_number(learner_section, "seed", 0, "learner", low=0, integer=True),
            max_steps=_number(learner_section, "max_steps", None, "learner", low=1, integer=True),
        )
    except ValueError as exc:
        raise ValidationError("learner", str(exc)) from None

    influence_section = doc.get("influence", {})
    _expect(
        influence_section,
        {"gamma", "alpha", "buffer_capacity", "schedule", "batch_size", "class_gamma"},
        "influence",
    )
    schedule_text = influence_section.get("schedule", UpdateSchedule.EPISODE_PASS.value)
    try:
        schedule = UpdateSchedule(schedule_text)
    except ValueError:
        raise ValidationError("influence.schedule", "must be episode-pass or minibatch") from None
    class_gamma = {}
    for key, value in (influence_section.get("class_gamma") or {}).items():
        try:
            cid = int(key)
        except ValueError:
            raise ValidationError("influence.class_gamma", f"bad class id {key!r}") from None
        if not classes.has(cid) or cid < 0:
            raise ValidationError("influence.class_gamma", f"unknown class id {cid}")
        if not isinstance(value, (int, float)) or not 0 <= value <= 1:
            raise ValidationError(f"influence.class_gamma.{key}", "must be in [0, 1]")
        class_gamma[cid] = float(value)
    influence = InfluenceConfig(
        gamma=_number(influence_section, "gamma", 0.5, "influence", low=0, high=1),
        alpha=_number(influence_section, "alpha", 0.2, "influence", low=0, high=1, low_open=True),
        buffer_capacity=_number(
            influence_section, "buffer_capacity", 50000, "influence", low=1, integer=True
        ),
        schedule=schedule,
        batch_size=_number(influence_section, "batch_size", 64, "influence", low=1, integer=True),
        class_gamma=class_gamma,
    )

    explain_section = doc.get("explain", {})
    _expect(explain_section, {"exclusion_ratio", "floor", "extra_steps", "person", "templates"},
            "explain")
    person = explain_section.get("person", "third")
    if person not in ("third", "first"):
        raise ValidationError("explain.person", "must be third or first")
    explain_settings = ExplainSettings(
        exclusion_ratio=_number(
            explain_section, "exclusion_ratio", DEFAULT_EXCLUSION_RATIO, "explain", low=0
        ),
        floor=_number(explain_section, "floor", DEFAULT_EXCLUSION_FLOOR, "explain",
                      low=0, low_open=True),
        extra_steps=_number(explain_section, "extra_steps", 5, "explain", low=0, integer=True),
        person=person,
    )
    templates = explain_section.get("templates") or {}
    if not isinstance(templates, dict):
        raise ValidationError("explain.templates", "must be an object")

    faith_section = doc.get("faithfulness", {})
    _expect(faith_section, {"thresholds", "k", "near_zero"}, "faithfulness")
    thresholds = faith_section.get("thresholds", list(DEFAULT_THRESHOLDS))
    if not isinstance(thresholds, list) or not thresholds:
        thresholds = list(DEFAULT_THRESHOLDS)
    for i, value in enumerate(thresholds):
        if not isinstance(value, (int, float)) or value < 0:
            raise ValidationError(f"faithfulness.thresholds[{i}]", "must be >= 0")
    faith = FaithfulnessSettings(
        thresholds=[float(v) for v in thresholds],
        k=_number(faith_section, "k", DEFAULT_KNN_K, "faithfulness", low=1, integer=True),
        near_zero=_number(faith_section, "near_zero", DEFAULT_NEAR_ZERO, "faithfulness",
                          low=0, low_open=True),
    )

    lexicon = lexicon_for(classes, person=person, templates=templates)
    return ExperimentConfig(
        map_text=map_text,
        classes=classes,
        lexicon=lexicon,
        learner=learner,
        influence=influence,
        explain=explain_settings,
        faithfulness=faith,
        map_path=str(map_path) if map_path else None,
    )
