"""Node-selection policies and the single-episode control loop.

The margin policy first keeps every actionable node whose utility is within
``delta`` of the best one, then walks to the closest of those; ``delta=0``
degenerates to plain utility-argmax. A uniform-random agent and a
cosine-similarity variant (same selection rule, different backend) serve as
baselines.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .environment import Environment, EpisodeSpec
from .scoring import NodeScore, ScoringConfig, score_all


def select_scout(utilities: dict[int, float], distances: dict[int, float], delta: float) -> int:
    """Closest node among those scoring within ``delta`` of the maximum utility.

    Unreachable nodes are skipped unless every candidate is unreachable, in
    which case the highest-utility candidate wins. Ties break toward higher
    utility, then the smaller node id.
    """
    if not utilities:
        raise ValueError("empty actionable set")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    u_max = max(utilities.values())
    margin_set = [n for n, u in utilities.items() if u >= u_max - delta]
    reachable = [n for n in margin_set if math.isfinite(distances.get(n, math.inf))]
    if reachable:
        return min(reachable, key=lambda n: (distances[n], -utilities[n], n))
    return min(margin_set, key=lambda n: (-utilities[n], n))


def select_random(actionable, rng: np.random.Generator) -> int:
    """Uniform draw over the actionable set."""
    ordered = sorted(actionable)
    if not ordered:
        raise ValueError("empty actionable set")
    return ordered[int(rng.integers(len(ordered)))]


class ScoutAgent:
    """Margin-plus-distance selection over whatever backend scored the nodes."""

    def __init__(self, delta: float = 0.1):
        self.delta = delta

    def select(self, observation, scores: dict[int, NodeScore],
               distances: dict[int, float], rng: np.random.Generator) -> int:
        utilities = {n: s.updated for n, s in scores.items()}
        return select_scout(utilities, distances, self.delta)


class RandomAgent:
    def select(self, observation, scores: dict[int, NodeScore],
               distances: dict[int, float], rng: np.random.Generator) -> int:
        return select_random(scores.keys(), rng)


@dataclass(frozen=True)
class AgentSpec:
    """Parsed agent string, e.g. ``scout:delta=0.1`` or ``similarity:preset=hash``."""

    kind: str  # scout | random | similarity
    delta: float | None = None
    room_influence: bool | None = None
    preset: str | None = None
    raw: str = ""

    @classmethod
    def parse(cls, text: str) -> "AgentSpec":
        name, _, params = text.strip().partition(":")
        if name not in ("scout", "random", "similarity"):
            raise ValueError(f"unknown agent kind {name!r}")
        fields: dict = {"kind": name, "raw": text.strip()}
        if params:
            for item in params.split(","):
                key, _, value = item.partition("=")
                if key == "delta":
                    fields["delta"] = float(value)
                elif key == "room_influence":
                    if value not in ("on", "off"):
                        raise ValueError(f"room_influence must be on or off, got {value!r}")
                    fields["room_influence"] = value == "on"
                elif key == "preset" and name == "similarity":
                    fields["preset"] = value
                else:
                    raise ValueError(f"unknown agent parameter {key!r} in {text!r}")
        return cls(**fields)


@dataclass
class StepDecision:
    """One selection, with enough context to re-validate it offline."""

    u_max: float
    candidates: tuple[int, ...]  # the margin set
    chosen: int
    utility: float
    distance: float
    inference_s: float
    utilities: dict[int, float] = field(default_factory=dict)
    distances: dict[int, float] = field(default_factory=dict)


@dataclass
class EpisodeRun:
    success: bool
    steps: int
    traveled: float
    trace: list[StepDecision]
    action_log: list[dict]
    failure_reason: str | None = None

    @property
    def mean_inference_s(self) -> float:
        if not self.trace:
            return 0.0
        return sum(d.inference_s for d in self.trace) / len(self.trace)


def run_episode(scene, spec: EpisodeSpec, agent, backend, config: ScoringConfig,
                engine=None, rng: np.random.Generator | None = None) -> EpisodeRun:
    """Observe, score, select, and step until the episode terminates.

    Inference time covers scoring plus selection; environment bookkeeping
    (reveals, geodesic distance fields) is excluded.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    env = Environment(scene, spec, engine)
    observation = env.reset()
    trace: list[StepDecision] = []

    while not env.terminal:
        actionable = env.actionable()
        if not actionable:
            state = env.state
            return EpisodeRun(
                success=False, steps=state.steps, traveled=state.traveled,
                trace=trace, action_log=env.action_log,
                failure_reason="no actionable nodes left")
        distances = env.action_distances()

        start = time.perf_counter()
        scores = score_all(backend, spec.query, observation, config)
        action_scores = {n: scores[n] for n in actionable}
        chosen = agent.select(observation, action_scores, distances, rng)
        inference_s = time.perf_counter() - start

        if chosen not in actionable:
            raise RuntimeError(f"agent chose non-actionable node {chosen}")
        utilities = {n: s.updated for n, s in action_scores.items()}
        u_max = max(utilities.values())
        margin = tuple(sorted(n for n, u in utilities.items() if u >= u_max - config.delta))
        trace.append(StepDecision(
            u_max=u_max, candidates=margin, chosen=chosen,
            utility=utilities[chosen], distance=distances[chosen],
            inference_s=inference_s, utilities=utilities, distances=dict(distances)))
        observation = env.step(chosen).observation

    state = env.state
    return EpisodeRun(
        success=env.success, steps=state.steps, traveled=state.traveled,
        trace=trace, action_log=env.action_log)
