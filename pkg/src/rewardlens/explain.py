"""Counterfactual comparison of trajectory pairs and text rendering.

Aggregated mode compares per-class trajectory means of best-case influence
and assigns each class to the trajectory it dominates, excluding classes
whose means are too close to carry information. Local mode compares the
sets of classes that win the per-state influence argmax inside two short
segments, falling back to top-3 mean ranking when those sets coincide.
Rendering is deterministic template filling from a lexicon.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .env import ACTION_NAMES, Action, RewardClassSet, SignMode
from .influence import InfluencePredictor, influence_value
from .rollout import Segment, Trajectory

DEFAULT_EXCLUSION_RATIO = 0.05
DEFAULT_EXCLUSION_FLOOR = 1e-6

EQUIVALENT_SENTENCE = "Both choices look equivalent to me."


class ExplanationError(Exception):
    pass


class EmptyTrajectory(ExplanationError):
    pass


class MissingLexiconEntry(ExplanationError):
    pass


class Side(str, enum.Enum):
    AGENT = "A"
    USER = "U"


class LocalMethod(str, enum.Enum):
    MAX_SET = "max-set"
    TOP_MEANS = "top-means"


@dataclass(frozen=True)
class ClassStats:
    class_id: int
    sign_mode: SignMode
    mean_agent: float
    mean_user: float
    dominant: Optional[Side]  # None when excluded as non-differentiating


@dataclass(frozen=True)
class LocalTop:
    set_agent: tuple[int, ...]
    set_user: tuple[int, ...]
    method: LocalMethod


@dataclass(frozen=True)
class ExplanationStructure:
    """Language-neutral comparison result, ready for rendering."""

    mode: str  # "aggregated" | "local"
    per_class: dict[int, ClassStats]
    local_top: Optional[LocalTop]
    empty: bool

    def differentiating(self) -> list[int]:
        return sorted(
            cid for cid, st in self.per_class.items() if st.dominant is not None
        )


def trajectory_class_mean(traj: Trajectory, ip: InfluencePredictor) -> float:
    """Mean over the trajectory's states of max-over-action influence."""
    states = traj.states
    if not states:
        raise EmptyTrajectory("trajectory has no states")
    total = sum(influence_value(ip, s.position) for s in states)
    return total / len(states)


def segment_class_mean(seg: Segment, ip: InfluencePredictor) -> float:
    states = seg.states
    if not states:
        raise EmptyTrajectory("segment has no states")
    total = sum(influence_value(ip, s.position) for s in states)
    return total / len(states)


def _dominance(
    mean_a: float, mean_u: float, exclusion_ratio: float, floor: float
) -> Optional[Side]:
    scale = max(mean_a, mean_u, floor)
    if abs(mean_a - mean_u) <= exclusion_ratio * scale:
        return None
    return Side.AGENT if mean_a > mean_u else Side.USER


def aggregated_explanation(
    traj_agent: Trajectory,
    traj_user: Trajectory,
    ips: Sequence[InfluencePredictor],
    exclusion_ratio: float = DEFAULT_EXCLUSION_RATIO,
    floor: float = DEFAULT_EXCLUSION_FLOOR,
) -> ExplanationStructure:
    """Whole-trajectory comparison: each class goes to the side it dominates.

    A class is excluded (dominant None) when the two means differ by no
    more than exclusion_ratio relative to the larger mean; the floor keeps
    the comparison meaningful when both means are near zero.
    """
    if exclusion_ratio < 0:
        raise ValueError("exclusion_ratio must be non-negative")
    per_class: dict[int, ClassStats] = {}
    for ip in ips:
        mean_a = trajectory_class_mean(traj_agent, ip)
        mean_u = trajectory_class_mean(traj_user, ip)
        per_class[ip.class_id] = ClassStats(
            class_id=ip.class_id,
            sign_mode=ip.sign_mode,
            mean_agent=mean_a,
            mean_user=mean_u,
            dominant=_dominance(mean_a, mean_u, exclusion_ratio, floor),
        )
    empty = all(st.dominant is None for st in per_class.values())
    return ExplanationStructure("aggregated", per_class, None, empty)


def _max_set(seg: Segment, ips: Sequence[InfluencePredictor]) -> set[int]:
    """Classes achieving the per-state influence maximum at least once.

    Ties admit every tied class; with all-zero influence that is all of
    them, which simply pushes the comparison to the mean-based fallback.
    """
    winners: set[int] = set()
    for state in seg.states:
        values = [(ip.class_id, influence_value(ip, state.position)) for ip in ips]
        best = max(v for _, v in values)
        winners.update(cid for cid, v in values if v == best)
    return winners


def local_explanation(
    seg_agent: Segment,
    seg_user: Segment,
    ips: Sequence[InfluencePredictor],
) -> ExplanationStructure:
    """Near-horizon comparison over two segments.

    Primary method: compare the sets of classes that win the per-state
    maximum anywhere in each segment. When those sets are equal the
    comparison switches to the three highest segment means per side.
    """
    means_a = {ip.class_id: segment_class_mean(seg_agent, ip) for ip in ips}
    means_u = {ip.class_id: segment_class_mean(seg_user, ip) for ip in ips}
    per_class = {
        ip.class_id: ClassStats(
            class_id=ip.class_id,
            sign_mode=ip.sign_mode,
            mean_agent=means_a[ip.class_id],
            mean_user=means_u[ip.class_id],
            dominant=None,
        )
        for ip in ips
    }

    set_a = _max_set(seg_agent, ips)
    set_u = _max_set(seg_user, ips)
    if set_a != set_u:
        top = LocalTop(
            set_agent=tuple(sorted(set_a)),
            set_user=tuple(sorted(set_u)),
            method=LocalMethod.MAX_SET,
        )
        empty = False
    else:
        top = LocalTop(
            set_agent=_top_by_mean(means_a),
            set_user=_top_by_mean(means_u),
            method=LocalMethod.TOP_MEANS,
        )
        # Identical ordered rankings mean nothing differentiates the sides.
        empty = top.set_agent == top.set_user
    return ExplanationStructure("local", per_class, top, empty)


def _top_by_mean(means: dict[int, float], limit: int = 3) -> tuple[int, ...]:
    ranked = sorted(means.items(), key=lambda kv: (-kv[1], kv[0]))
    return tuple(cid for cid, _ in ranked[:limit])


# --- rendering ---------------------------------------------------------

THIRD_PERSON_TEMPLATES = {
    "equivalent": EQUIVALENT_SENTENCE,
    "negative_dominant": (
        "If the agent goes {action}, it will pass through regions influenced "
        "by the {class}; going {other_action} feels safer."
    ),
    "positive_dominant": (
        "If the agent goes {other_action}, it will pass through regions less "
        "influenced by the {class}; going {action} is better."
    ),
    "local_negative": (
        "Going {action} exposes the agent to the {class}, where it could {consequence}."
    ),
    "local_positive": "Going {action} keeps the agent closer to the {class}.",
    "local_priority": "Going {action}, the agent pays more attention to the {class}.",
}

FIRST_PERSON_TEMPLATES = {
    "equivalent": EQUIVALENT_SENTENCE,
    "negative_dominant": (
        "If I go {action}, I fear I will {consequence}; going {other_action} feels safer."
    ),
    "positive_dominant": (
        "If I go {other_action}, I will feel less drawn by the {class}; "
        "going {action} is better."
    ),
    "local_negative": "Going {action}, I could {consequence}.",
    "local_positive": "Going {action}, I stay closer to the {class}.",
    "local_priority": "Going {action}, I pay more attention to the {class}.",
}


@dataclass(frozen=True)
class LexiconEntry:
    display_name: str
    consequence: str


@dataclass
class Lexicon:
    """Names and sentence templates used to verbalize a structure."""

    entries: dict[int, LexiconEntry]
    action_names: dict[Action, str] = field(default_factory=lambda: dict(ACTION_NAMES))
    person: str = "third"  # "third" | "first"
    templates: dict[str, str] = field(default_factory=dict)

    def entry(self, class_id: int) -> LexiconEntry:
        try:
            return self.entries[class_id]
        except KeyError:
            raise MissingLexiconEntry(f"no lexicon entry for class {class_id}") from None

    def template(self, name: str) -> str:
        if name in self.templates:
            return self.templates[name]
        base = FIRST_PERSON_TEMPLATES if self.person == "first" else THIRD_PERSON_TEMPLATES
        return base[name]

    def action_name(self, action: Action) -> str:
        return self.action_names[action]


def lexicon_for(classes: RewardClassSet, person: str = "third",
                templates: Optional[dict[str, str]] = None) -> Lexicon:
    """Build a lexicon from the class definitions' display phrases."""
    entries = {
        rc.class_id: LexiconEntry(rc.display_name, rc.consequence) for rc in classes
    }
    return Lexicon(entries=entries, person=person, templates=dict(templates or {}))


def _fill(template: str, **values: str) -> str:
    return template.format(**values)


def render(
    structure: ExplanationStructure,
    lexicon: Lexicon,
    action_agent: Action,
    action_user: Action,
) -> str:
    """Deterministic English text for a structure: one sentence per
    differentiating class, joined in class-id order."""
    if structure.empty:
        return lexicon.template("equivalent")

    name_a = lexicon.action_name(action_agent)
    name_u = lexicon.action_name(action_user)
    sentences: list[str] = []

    if structure.mode == "aggregated":
        for cid in sorted(structure.per_class):
            stats = structure.per_class[cid]
            if stats.dominant is None:
                continue
            entry = lexicon.entry(cid)
            dom_action = name_a if stats.dominant is Side.AGENT else name_u
            other_action = name_u if stats.dominant is Side.AGENT else name_a
            key = (
                "positive_dominant"
                if stats.sign_mode is SignMode.POSITIVE
                else "negative_dominant"
            )
            sentences.append(
                _fill(
                    lexicon.template(key),
                    action=dom_action,
                    other_action=other_action,
                    consequence=entry.consequence,
                    **{"class": entry.display_name},
                )
            )
        return " ".join(sentences)

    top = structure.local_top
    assert top is not None
    if top.method is LocalMethod.MAX_SET:
        only_a = set(top.set_agent) - set(top.set_user)
        only_u = set(top.set_user) - set(top.set_agent)
        for cid in sorted(only_a | only_u):
            entry = lexicon.entry(cid)
            action = name_a if cid in only_a else name_u
            sign = structure.per_class[cid].sign_mode
            key = "local_positive" if sign is SignMode.POSITIVE else "local_negative"
            sentences.append(
                _fill(
                    lexicon.template(key),
                    action=action,
                    other_action=name_u if cid in only_a else name_a,
                    consequence=entry.consequence,
                    **{"class": entry.display_name},
                )
            )
    else:
        rank_a = {cid: i for i, cid in enumerate(top.set_agent)}
        rank_u = {cid: i for i, cid in enumerate(top.set_user)}
        for cid in sorted(set(rank_a) | set(rank_u)):
            ra = rank_a.get(cid, len(rank_a) + 1)
            ru = rank_u.get(cid, len(rank_u) + 1)
            if ra == ru:
                continue
            entry = lexicon.entry(cid)
            action = name_a if ra < ru else name_u
            sentences.append(
                _fill(
                    lexicon.template("local_priority"),
                    action=action,
                    other_action=name_u if ra < ru else name_a,
                    consequence=entry.consequence,
                    **{"class": entry.display_name},
                )
            )
    return " ".join(sentences)
