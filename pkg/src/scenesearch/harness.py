"""Benchmark suite runner: metrics, aggregation, and result export.

Runs the full episode x agent x seed cross product deterministically and
writes three artifacts: ``records.jsonl`` (one line per episode run, byte
stable across reruns with the same seeds), ``summary.csv`` (per-agent
mean +- population std over seeds), and ``sr_curve.csv`` (cumulative success
fraction per step, plot ready). Wall-clock inference times are volatile, so
they go to ``timings.csv`` and the summary instead of the canonical records.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .agents import AgentSpec, EpisodeRun, RandomAgent, ScoutAgent, run_episode
from .environment import EpisodeSpec, shortest_solution
from .occupancy import GeodesicEngine
from .scenegraph import SceneGraph
from .scoring import CosineBackend, ScoringConfig, preset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpisodeRecord:
    episode_id: str
    scene_id: str
    query: str
    agent: str  # raw agent spec string
    seed: int
    spawn_seed: int
    success: bool
    steps: int
    traveled: float
    oracle_steps: int
    oracle_traveled: float
    mean_inference_s: float
    error: str | None = None

    def spl_contribution(self) -> float:
        return _spl_term(self.success, self.traveled, self.oracle_traveled)

    def spl_steps_contribution(self) -> float:
        return _spl_term(self.success, float(self.steps), float(self.oracle_steps))


def _spl_term(success: bool, actual: float, optimal: float) -> float:
    if not success:
        return 0.0
    if actual == 0.0 and optimal == 0.0:
        return 1.0
    return optimal / max(actual, optimal)


def spl(records) -> float:
    """Success weighted by path length over traveled meters; failures count 0."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    return sum(r.spl_contribution() for r in records) / len(records)


def spl_steps(records) -> float:
    """Step-count variant of SPL, reported alongside for transparency."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    return sum(r.spl_steps_contribution() for r in records) / len(records)


def success_rate(records) -> float:
    records = list(records)
    if not records:
        raise ValueError("no records")
    return sum(r.success for r in records) / len(records)


def sr_curve(records, n_max: int) -> np.ndarray:
    """curve[k] = fraction of episodes that succeeded within <= k steps."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    curve = np.zeros(n_max + 1)
    for record in records:
        if record.success:
            curve[min(record.steps, n_max):] += 1
    return curve / len(records)


@dataclass
class AgentAggregate:
    """Per-seed means reduced to mean +- population std across seeds."""

    sr_mean: float
    sr_std: float
    spl_mean: float
    spl_std: float
    spl_steps_mean: float
    steps_mean: float
    steps_std: float
    inference_mean_s: float


@dataclass
class SuiteReport:
    records: list[EpisodeRecord]
    aggregates: dict[str, AgentAggregate]
    curves: dict[str, np.ndarray]
    n_max: int


def derive_spawn_seed(suite_seed: int, episode_index: int) -> int:
    return int(np.random.SeedSequence([suite_seed, episode_index]).generate_state(1)[0])


def build_agent(spec: AgentSpec, backend, provider, base_config: ScoringConfig):
    """Resolve an agent spec into (agent, backend, scoring config)."""
    if spec.kind == "random":
        return RandomAgent(), backend, base_config
    if spec.kind == "scout":
        config = base_config
        if spec.delta is not None:
            config = replace(config, delta=spec.delta)
        if spec.room_influence is not None:
            config = replace(config, room_influence=spec.room_influence)
        return ScoutAgent(delta=config.delta), backend, config
    if spec.kind == "similarity":
        if provider is None:
            raise ValueError("similarity agent needs an embedding provider")
        config = preset(spec.preset or "default")
        if spec.delta is not None:
            config = replace(config, delta=spec.delta)
        if spec.room_influence is not None:
            config = replace(config, room_influence=spec.room_influence)
        return ScoutAgent(delta=config.delta), CosineBackend(provider), config
    raise ValueError(f"unknown agent kind {spec.kind!r}")


def run_suite(scenes: dict[str, SceneGraph], episodes: list[EpisodeSpec],
              agent_specs: list[str], seeds: list[int] | int, backend,
              provider=None, config: ScoringConfig | None = None,
              out_dir: str | Path | None = None,
              dilation_radius: float | None = None) -> SuiteReport:
    """Run every (episode, agent, seed) combination and aggregate the metrics.

    Episode failures are recorded, not raised; the suite always completes.
    Geodesic engines and solution oracles are cached per scene so repeated
    runs over one scene stay cheap.
    """
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    config = config or ScoringConfig()
    parsed = [AgentSpec.parse(s) for s in agent_specs]

    engines: dict[str, GeodesicEngine] = {}
    for scene_id, scene in scenes.items():
        kwargs = {} if dilation_radius is None else {"dilation_radius": dilation_radius}
        engines[scene_id] = GeodesicEngine(scene.occupancy, **kwargs)
    oracle_cache: dict[tuple, tuple[int, float]] = {}
    n_max = max((e.n_max for e in episodes), default=0)

    records: list[EpisodeRecord] = []
    for episode_index, episode in enumerate(episodes):
        scene = scenes.get(episode.scene_id)
        if scene is None:
            raise ValueError(f"episode {episode_index} references unknown scene {episode.scene_id!r}")
        engine = engines[episode.scene_id]
        for agent_spec in parsed:
            for seed in seeds:
                spawn_seed = episode.spawn_seed if episode.spawn_seed is not None \
                    else derive_spawn_seed(seed, episode_index)
                spec = replace(episode, spawn_seed=spawn_seed)
                records.append(_run_one(
                    scene, spec, agent_spec, seed, episode_index,
                    backend, provider, config, engine, oracle_cache))

    records.sort(key=lambda r: (r.episode_id, r.agent, r.seed))
    report = _aggregate(records, parsed, n_max)
    if out_dir is not None:
        write_outputs(report, Path(out_dir))
    return report


def _run_one(scene, spec, agent_spec, seed, episode_index, backend, provider,
             config, engine, oracle_cache) -> EpisodeRecord:
    episode_id = f"ep{episode_index:04d}"
    oracle_key = (scene.scene_id, spec.goal, spec.spawn_seed)
    try:
        if oracle_key not in oracle_cache:
            oracle_cache[oracle_key] = shortest_solution(scene, spec, engine)
        oracle_steps, oracle_traveled = oracle_cache[oracle_key]
        agent, agent_backend, agent_config = build_agent(agent_spec, backend, provider, config)
        rng = np.random.default_rng(np.random.SeedSequence([seed, episode_index]))
        run: EpisodeRun = run_episode(scene, spec, agent, agent_backend, agent_config,
                                      engine=engine, rng=rng)
        return EpisodeRecord(
            episode_id=episode_id, scene_id=scene.scene_id, query=spec.query,
            agent=agent_spec.raw, seed=seed, spawn_seed=spec.spawn_seed,
            success=run.success, steps=run.steps, traveled=run.traveled,
            oracle_steps=oracle_steps, oracle_traveled=oracle_traveled,
            mean_inference_s=run.mean_inference_s,
            error=run.failure_reason)
    except Exception as err:  # episode-level failure; the suite continues
        logger.exception("episode %s agent %s seed %d failed", episode_id, agent_spec.raw, seed)
        return EpisodeRecord(
            episode_id=episode_id, scene_id=scene.scene_id, query=spec.query,
            agent=agent_spec.raw, seed=seed, spawn_seed=spec.spawn_seed,
            success=False, steps=0, traveled=0.0,
            oracle_steps=0, oracle_traveled=0.0, mean_inference_s=0.0,
            error=f"{type(err).__name__}: {err}")


def _aggregate(records: list[EpisodeRecord], parsed: list[AgentSpec], n_max: int) -> SuiteReport:
    aggregates: dict[str, AgentAggregate] = {}
    curves: dict[str, np.ndarray] = {}
    for spec in parsed:
        mine = [r for r in records if r.agent == spec.raw]
        if not mine:
            continue
        seeds = sorted({r.seed for r in mine})
        by_seed = [[r for r in mine if r.seed == s] for s in seeds]
        srs = [success_rate(group) for group in by_seed]
        spls = [spl(group) for group in by_seed]
        steps = [float(np.mean([r.steps for r in group])) for group in by_seed]
        aggregates[spec.raw] = AgentAggregate(
            sr_mean=float(np.mean(srs)), sr_std=float(np.std(srs)),
            spl_mean=float(np.mean(spls)), spl_std=float(np.std(spls)),
            spl_steps_mean=spl_steps(mine),
            steps_mean=float(np.mean(steps)), steps_std=float(np.std(steps)),
            inference_mean_s=float(np.mean([r.mean_inference_s for r in mine])),
        )
        curves[spec.raw] = sr_curve(mine, n_max)
    return SuiteReport(records=records, aggregates=aggregates, curves=curves, n_max=n_max)


def record_json_obj(record: EpisodeRecord) -> dict:
    """Deterministic subset of a record; timing is kept out on purpose."""
    obj = {
        "episode": record.episode_id,
        "scene": record.scene_id,
        "query": record.query,
        "agent": record.agent,
        "seed": record.seed,
        "spawn_seed": record.spawn_seed,
        "success": record.success,
        "steps": record.steps,
        "traveled": record.traveled,
        "oracle_steps": record.oracle_steps,
        "oracle_traveled": record.oracle_traveled,
    }
    if record.error is not None:
        obj["error"] = record.error
    return obj


def write_outputs(report: SuiteReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "records.jsonl", "w") as fh:
        for record in report.records:
            fh.write(json.dumps(record_json_obj(record), sort_keys=True) + "\n")

    with open(out_dir / "timings.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "agent", "seed", "mean_inference_s"])
        for record in report.records:
            writer.writerow([record.episode_id, record.agent, record.seed,
                             repr(record.mean_inference_s)])

    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent", "sr_mean", "sr_std", "spl_mean", "spl_std",
                         "spl_steps_mean", "steps_mean", "steps_std", "inference_mean_s"])
        for agent, agg in report.aggregates.items():
            writer.writerow([agent] + [repr(v) for v in (
                agg.sr_mean, agg.sr_std, agg.spl_mean, agg.spl_std,
                agg.spl_steps_mean, agg.steps_mean, agg.steps_std, agg.inference_mean_s)])

    with open(out_dir / "sr_curve.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "agent", "fraction"])
        for agent, curve in report.curves.items():
            for step, fraction in enumerate(curve):
                writer.writerow([step, agent, repr(float(fraction))])


def load_scene_dir(directory: str | Path) -> dict[str, SceneGraph]:
    """Load every ``*.sg.json`` scene in a directory, keyed by scene id."""
    scenes = {}
    for path in sorted(Path(directory).glob("*.sg.json")):
        scene = SceneGraph.load(path)
        scenes[scene.scene_id] = scene
    if not scenes:
        raise ValueError(f"no *.sg.json scenes found in {directory}")
    return scenes
