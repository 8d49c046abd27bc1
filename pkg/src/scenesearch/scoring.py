"""Utility scores in [0, 1] for every node an agent can currently see.

Observed rooms score by containment priors, objects by co-occurrence priors
blended with their room's score, frontiers aggregate nearby object scores,
and unexplored rooms fall back to a default so they stay selectable. Three
interchangeable backends supply the raw priors: learned MLPs, embedding
cosine similarity, and exact planted tables (the test oracle).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict, replace
from pathlib import Path

from .embeddings import concat, cosine
from .scenegraph import NodeKind, normalize_label


@dataclass(frozen=True)
class ScoringConfig:
    """Agent hyperparameters; the defaults are the shipped configuration."""

    w: float = 0.3  # room influence weight
    default_room_score: float = 0.7
    default_frontier_score: float = 0.6
    frontier_radius: float = 2.0  # meters
    room_influence: bool = True
    delta: float = 0.1  # utility margin consumed by the selection policy
    frontier_aggregate: str = "max"  # "max" | "mean"

    def __post_init__(self):
        for name in ("w", "default_room_score", "default_frontier_score", "delta"):
            value = getattr(self, name)
            if not 0.0 <= value <= (math.inf if name == "delta" else 1.0):
                raise ValueError(f"{name} out of range: {value}")
        if self.frontier_radius < 0:
            raise ValueError("frontier_radius must be nonnegative")
        if self.frontier_aggregate not in ("max", "mean"):
            raise ValueError(f"unknown frontier aggregate {self.frontier_aggregate!r}")

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ScoringConfig":
        config, _ = load_config_file(path)
        return config


def load_config_file(path: str | Path) -> tuple["ScoringConfig", str | None]:
    """Read a config file; returns the scoring config and an optional backend spec.

    The file may carry every ScoringConfig field plus a ``backend`` string
    (e.g. ``table:tables.json``) that runners use when no backend is given
    on the command line.
    """
    obj = json.loads(Path(path).read_text())
    backend = obj.pop("backend", None)
    return ScoringConfig(**obj), backend


#: Named presets. "default" matches the learned scorers; the "sim-*" presets
#: retune the default exploration scores to cosine-similarity distributions
#: (narrow similarity ranges need lower defaults); "hash" suits the seeded
#: hash embedder whose similarities concentrate near 0.5.
PRESETS: dict[str, ScoringConfig] = {
    "default": ScoringConfig(),
    "sim-narrow": ScoringConfig(default_room_score=0.3, default_frontier_score=0.25, delta=0.05),
    "sim-wide": ScoringConfig(default_room_score=0.7, default_frontier_score=0.4, delta=0.05),
    "hash": ScoringConfig(default_room_score=0.55, default_frontier_score=0.5, delta=0.05),
}


def preset(name: str, **overrides) -> ScoringConfig:
    try:
        config = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}, choose from {sorted(PRESETS)}") from None
    return replace(config, **overrides) if overrides else config


class ScoringError(ValueError):
    pass


class TableBackend:
    """Exact lookups from planted prior tables; used as the scorer oracle.

    ``reflexive`` scores an object 1.0 whenever its label equals the query.
    Missing pairs fall back to ``default`` when given, otherwise they raise.
    """

    def __init__(self, contain: dict[tuple[str, str], float],
                 cooccur: dict[tuple[str, str], float],
                 default: float | None = None, reflexive: bool = False):
        self.contain = {(normalize_label(r), normalize_label(q)): float(v) for (r, q), v in contain.items()}
        self.cooccur = {(normalize_label(o), normalize_label(q)): float(v) for (o, q), v in cooccur.items()}
        self.default = default
        self.reflexive = reflexive

    def _lookup(self, table, key, what):
        value = table.get(key, self.default)
        if value is None:
            raise ScoringError(f"no planted {what} score for {key!r}")
        return value

    def score_room(self, room_label: str, query: str) -> float:
        key = (normalize_label(room_label), normalize_label(query))
        return self._lookup(self.contain, key, "containment")

    def score_object(self, object_label: str, query: str) -> float:
        key = (normalize_label(object_label), normalize_label(query))
        if self.reflexive and key[0] == key[1]:
            return 1.0
        return self._lookup(self.cooccur, key, "co-occurrence")

    @classmethod
    def load(cls, path: str | Path, **kwargs) -> "TableBackend":
        obj = json.loads(Path(path).read_text())
        return cls(
            contain={(r, q): v for r, q, v in obj["contain"]},
            cooccur={(o, q): v for o, q, v in obj["cooccur"]},
            **kwargs,
        )

    def save(self, path: str | Path) -> None:
        obj = {
            "contain": [[r, q, v] for (r, q), v in sorted(self.contain.items())],
            "cooccur": [[o, q, v] for (o, q), v in sorted(self.cooccur.items())],
        }
        Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


class CosineBackend:
    """Embedding cosine similarity mapped to [0, 1] via (1 + cos) / 2."""

    def __init__(self, provider):
        self.provider = provider

    def _sim(self, a: str, b: str) -> float:
        return (1.0 + cosine(self.provider.embed(a), self.provider.embed(b))) / 2.0

    def score_room(self, room_label: str, query: str) -> float:
        return self._sim(room_label, query)

    def score_object(self, object_label: str, query: str) -> float:
        return self._sim(object_label, query)


class LearnedBackend:
    """Distilled relational scorers over concatenated embeddings."""

    def __init__(self, provider, cooccur_model, contain_model):
        if cooccur_model.relation != "cooccur" or contain_model.relation != "contain":
            raise ScoringError("models plugged into the wrong relation slots")
        for model in (cooccur_model, contain_model):
            if model.embedding_dim != provider.dim:
                raise ScoringError(
                    f"model embedding dim {model.embedding_dim} does not match provider dim {provider.dim}")
        self.provider = provider
        self.cooccur_model = cooccur_model
        self.contain_model = contain_model

    def score_room(self, room_label: str, query: str) -> float:
        x = concat(self.provider.embed(room_label), self.provider.embed(query))
        return self.contain_model.forward(x)

    def score_object(self, object_label: str, query: str) -> float:
        x = concat(self.provider.embed(object_label), self.provider.embed(query))
        return self.cooccur_model.forward(x)


def score_room(backend, room_label: str, query: str) -> float:
    value = backend.score_room(room_label, query)
    _check_range(value, f"room score for {room_label!r}")
    return value


def score_object(backend, object_label: str, query: str) -> float:
    value = backend.score_object(object_label, query)
    _check_range(value, f"object score for {object_label!r}")
    return value


def update_object_score(u_room: float, u_obj: float, w: float,
                        room_influence: bool = True) -> float:
    """Blend an object's score with its room context: u_room * (w + (1-w) * u_obj)."""
    if not room_influence:
        return u_obj
    for value in (u_room, u_obj, w):
        _check_range(value, "update input")
    return u_room * (w + (1.0 - w) * u_obj)


def _check_range(value: float, what: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise ScoringError(f"{what} out of [0, 1]: {value}")


@dataclass(frozen=True)
class NodeScore:
    node: int
    raw: float
    updated: float
    source: str  # room | object | frontier_aggregate | default_room | default_frontier


def _room_scores(backend, query: str, observation, config: ScoringConfig) -> dict[int, float]:
    out = {}
    for node in observation.revealed_nodes():
        if node.kind != NodeKind.ROOM:
            continue
        try:
            out[node.id] = score_room(backend, node.room_category, query) if node.room_category \
                else config.default_room_score
        except Exception as err:
            raise ScoringError(f"scoring room node {node.id}: {err}") from err
    return out


def _updated_object_scores(backend, query: str, observation, config: ScoringConfig,
                           room_scores: dict[int, float]):
    """Per-object (raw, updated) scores plus xy positions for revealed objects."""
    raw, updated, positions = {}, {}, {}
    for node in observation.revealed_nodes():
        if node.kind not in (NodeKind.OBJECT, NodeKind.NESTED_OBJECT):
            continue
        try:
            value = score_object(backend, node.label, query)
        except Exception as err:
            raise ScoringError(f"scoring object node {node.id}: {err}") from err
        room = observation.room_of(node.id)
        u_room = room_scores.get(room.id, config.default_room_score) if room else config.default_room_score
        raw[node.id] = value
        updated[node.id] = update_object_score(u_room, value, config.w, config.room_influence)
        positions[node.id] = tuple(node.xy())
    return raw, updated, positions


def _aggregate_nearby(updated: dict[int, float], positions: dict[int, tuple], frontier_pos,
                      config: ScoringConfig) -> tuple[float, int]:
    nearby = [
        updated[node_id] for node_id in updated
        if math.dist(positions[node_id], frontier_pos) <= config.frontier_radius
    ]
    if not nearby:
        return config.default_frontier_score, 0
    value = max(nearby) if config.frontier_aggregate == "max" else sum(nearby) / len(nearby)
    return value, len(nearby)


def score_frontier(backend, frontier, observation, config: ScoringConfig, query: str) -> float:
    """Aggregate updated object scores within the frontier radius, or the default."""
    room_scores = _room_scores(backend, query, observation, config)
    _, updated, positions = _updated_object_scores(backend, query, observation, config, room_scores)
    value, _ = _aggregate_nearby(updated, positions, tuple(frontier.position), config)
    return value


def score_all(backend, query: str, observation, config: ScoringConfig) -> dict[int, NodeScore]:
    """Score every observed node by its kind-specific rule.

    Backend errors are re-raised with the offending node attached.
    """
    scores: dict[int, NodeScore] = {}
    room_scores = _room_scores(backend, query, observation, config)
    for room_id, value in room_scores.items():
        scores[room_id] = NodeScore(room_id, raw=value, updated=value, source="room")

    raw, updated, positions = _updated_object_scores(backend, query, observation, config, room_scores)
    for node_id in raw:
        scores[node_id] = NodeScore(node_id, raw=raw[node_id], updated=updated[node_id], source="object")

    for view in observation.frontiers:
        value, n_nearby = _aggregate_nearby(updated, positions, tuple(view.position), config)
        source = "frontier_aggregate" if n_nearby else "default_frontier"
        scores[view.id] = NodeScore(view.id, raw=value, updated=value, source=source)

    for view in observation.unexplored_rooms:
        scores[view.id] = NodeScore(
            view.id, raw=config.default_room_score, updated=config.default_room_score,
            source="default_room")
    return scores
