"""Episodic partial-observability environment over a scene graph.

An episode starts in a random region of a random room. The agent sees the
revealed subgraph plus two kinds of placeholder nodes: frontiers (regions of
a revealed room whose contents are hidden) and unexplored rooms (rooms known
only through a door, attributes hidden). Actions explore one node at a time:

* unexplored room: reveals the room, its region closest to the agent with
  that region's first-level objects, the remaining regions as frontiers, and
  door-connected rooms as new unexplored rooms;
* frontier: reveals the backing region and its first-level objects;
* object with an openable/explorable affordance: reveals its nested objects
  (an empty container reveals nothing but still costs the step).

The agent teleports to each explored element; traveled distance accrues as
grid geodesics between successive positions. The episode ends when the goal
node is revealed or the step budget runs out.
"""

from __future__ import annotations

import heapq
import itertools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .occupancy import GeodesicEngine
from .scenegraph import Affordance, NodeKind, SceneGraph, SceneNode

logger = logging.getLogger(__name__)

DEFAULT_STEP_BUDGET = 50


class EpisodeError(RuntimeError):
    pass


@dataclass(frozen=True)
class EpisodeSpec:
    scene_id: str
    goal: int
    query: str
    spawn_seed: int | None = 0  # None defers to the suite runner's derivation
    n_max: int = DEFAULT_STEP_BUDGET
    interactive: bool | None = None  # informational: goal needs a container opened

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")


def load_episode_specs(path: str | Path) -> list[EpisodeSpec]:
    """Episode list file: [{query, scene, goal, interactive?, spawn_seed?, n_max?}]."""
    entries = json.loads(Path(path).read_text())
    specs = []
    for i, raw in enumerate(entries):
        unknown = raw.keys() - {"query", "scene", "goal", "interactive", "spawn_seed", "n_max"}
        if unknown:
            raise ValueError(f"episode {i}: unknown keys {sorted(unknown)}")
        spawn_seed = raw.get("spawn_seed")
        specs.append(
            EpisodeSpec(
                scene_id=raw["scene"],
                goal=int(raw["goal"]),
                query=raw["query"],
                spawn_seed=None if spawn_seed is None else int(spawn_seed),
                n_max=int(raw.get("n_max", DEFAULT_STEP_BUDGET)),
                interactive=raw.get("interactive"),
            )
        )
    return specs


def save_episode_specs(specs: list[EpisodeSpec], path: str | Path) -> None:
    entries = []
    for s in specs:
        entry = {"query": s.query, "scene": s.scene_id, "goal": s.goal, "n_max": s.n_max}
        if s.spawn_seed is not None:
            entry["spawn_seed"] = s.spawn_seed
        if s.interactive is not None:
            entry["interactive"] = s.interactive
        entries.append(entry)
    Path(path).write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class FrontierView:
    id: int
    position: np.ndarray  # backing-region centroid; the region id stays hidden


@dataclass(frozen=True)
class UnexploredRoomView:
    id: int  # the room's node id; all other attributes stay hidden
    position: np.ndarray  # midpoint of the discovering door


class Observation:
    """Immutable snapshot of what the agent currently knows."""

    def __init__(self, scene: SceneGraph, revealed: frozenset[int],
                 frontiers: tuple[FrontierView, ...],
                 unexplored_rooms: tuple[UnexploredRoomView, ...],
                 agent_position: np.ndarray, steps_taken: int, traveled: float):
        self._scene = scene
        self.revealed = revealed
        self.frontiers = frontiers
        self.unexplored_rooms = unexplored_rooms
        self.agent_position = agent_position
        self.steps_taken = steps_taken
        self.traveled = traveled

    def node(self, node_id: int) -> SceneNode:
        if node_id not in self.revealed:
            raise KeyError(f"node {node_id} is not revealed")
        return self._scene.node(node_id)

    def revealed_nodes(self):
        for node_id in sorted(self.revealed):
            yield self._scene.node(node_id)

    def room_of(self, node_id: int) -> SceneNode | None:
        room = self._scene.room_of(node_id)
        if room is not None and room.id in self.revealed:
            return room
        return None


@dataclass(frozen=True)
class StepOutcome:
    observation: Observation
    newly_revealed: frozenset[int]
    terminal: bool
    success: bool


@dataclass
class _State:
    revealed: set[int]
    opened: set[int]
    frontiers: dict[int, int]  # view id -> backing region id
    unexplored: dict[int, tuple[float, float]]  # room id -> door midpoint
    agent_pos: tuple[float, float]
    steps: int = 0
    traveled: float = 0.0
    next_view_id: int = 0
    terminal: bool = False
    success: bool = False

    def copy(self) -> "_State":
        return _State(
            revealed=set(self.revealed),
            opened=set(self.opened),
            frontiers=dict(self.frontiers),
            unexplored=dict(self.unexplored),
            agent_pos=self.agent_pos,
            steps=self.steps,
            traveled=self.traveled,
            next_view_id=self.next_view_id,
            terminal=self.terminal,
            success=self.success,
        )

    def key(self):
        return (
            frozenset(self.revealed),
            frozenset(self.opened),
            (round(self.agent_pos[0], 9), round(self.agent_pos[1], 9)),
        )


class Environment:
    """Stateful episode driver; one instance per episode, scenes are shared."""

    def __init__(self, scene: SceneGraph, spec: EpisodeSpec,
                 engine: GeodesicEngine | None = None):
        if spec.goal not in scene.nodes:
            raise ValueError(f"goal node {spec.goal} does not exist in scene {scene.scene_id}")
        self.scene = scene
        self.spec = spec
        self.engine = engine if engine is not None else GeodesicEngine(scene.occupancy)
        self.state: _State | None = None
        self.action_log: list[dict] = []
        self._warned_unreachable = False

    # -- distance helpers --------------------------------------------------

    def _distance(self, origin, target) -> float:
        d = self.engine.distance(origin, target)
        if math.isinf(d):
            if not self._warned_unreachable:
                logger.warning("scene %s: no free path between %s and %s, using straight line",
                               self.scene.scene_id, origin, target)
                self._warned_unreachable = True
            return float(math.hypot(target[0] - origin[0], target[1] - origin[1]))
        return d

    def _nearest_region(self, region_ids: list[int], origin) -> int:
        targets = {rid: self.scene.node(rid).xy() for rid in region_ids}
        distances = self.engine.distances(origin, targets)
        finite = {rid: d for rid, d in distances.items() if math.isfinite(d)}
        if finite:
            return min(sorted(finite), key=finite.get)
        euclid = {rid: math.dist(origin, tuple(t)) for rid, t in targets.items()}
        return min(sorted(euclid), key=euclid.get)

    # -- reveal primitives (shared by the live env and the solution search) -

    def _regions_of(self, room_id: int) -> list[int]:
        return [c for c in self.scene.children(room_id)
                if self.scene.node(c).kind == NodeKind.REGION]

    def _reveal_region(self, state: _State, region_id: int, newly: set[int]) -> None:
        if region_id not in state.revealed:
            state.revealed.add(region_id)
            newly.add(region_id)
        for obj_id in self.scene.children(region_id):
            if obj_id not in state.revealed:
                state.revealed.add(obj_id)
                newly.add(obj_id)
        for view_id, backing in list(state.frontiers.items()):
            if backing == region_id:
                del state.frontiers[view_id]

    def _enter_room(self, state: _State, room_id: int, newly: set[int],
                    spawn_region: int | None = None) -> tuple[float, float]:
        """Reveal a room; returns the agent's new position inside it."""
        if room_id not in state.revealed:
            state.revealed.add(room_id)
            newly.add(room_id)
        state.unexplored.pop(room_id, None)

        regions = self._regions_of(room_id)
        if regions:
            chosen = spawn_region if spawn_region is not None \
                else self._nearest_region(regions, state.agent_pos)
            self._reveal_region(state, chosen, newly)
            for region_id in regions:
                if region_id == chosen or region_id in state.revealed:
                    continue
                if region_id not in state.frontiers.values():
                    state.frontiers[state.next_view_id] = region_id
                    state.next_view_id += 1
            position = tuple(self.scene.node(chosen).xy())
        else:
            position = tuple(self.scene.node(room_id).xy())

        for neighbor in self.scene.connected_rooms(room_id):
            if neighbor in state.revealed or neighbor in state.unexplored:
                continue
            doors = self.scene.doors_between(room_id, neighbor)
            door = min(doors, key=lambda d: d.id)
            state.unexplored[neighbor] = (float(door.midpoint[0]), float(door.midpoint[1]))
        return position

    def _initial_state(self) -> _State:
        if self.spec.spawn_seed is None:
            raise EpisodeError("episode spec has no spawn seed; derive one before running")
        rng = np.random.default_rng(self.spec.spawn_seed)
        candidates = [room.id for room in self.scene.rooms() if self._regions_of(room.id)]
        if not candidates:
            raise EpisodeError(f"scene {self.scene.scene_id} has no room with regions to spawn in")
        room_id = candidates[int(rng.integers(len(candidates)))]
        regions = self._regions_of(room_id)
        spawn_region = regions[int(rng.integers(len(regions)))]

        state = _State(
            revealed={self.scene.root().id},
            opened=set(),
            frontiers={},
            unexplored={},
            agent_pos=tuple(self.scene.node(spawn_region).xy()),
            next_view_id=max(self.scene.nodes) + 1,
        )
        newly: set[int] = set()
        state.agent_pos = self._enter_room(state, room_id, newly, spawn_region=spawn_region)
        self._check_terminal(state)
        return state

    def _check_terminal(self, state: _State) -> None:
        if self.spec.goal in state.revealed:
            state.terminal = True
            state.success = True
        elif state.steps >= self.spec.n_max:
            state.terminal = True
            state.success = False

    def _actionable(self, state: _State) -> set[int]:
        out = set(state.frontiers) | set(state.unexplored)
        for node_id in state.revealed:
            node = self.scene.node(node_id)
            if (node.kind == NodeKind.OBJECT and node_id not in state.opened
                    and node.affordances & {Affordance.OPENABLE, Affordance.EXPLORABLE}):
                out.add(node_id)
        return out

    def _apply(self, state: _State, target: int) -> set[int]:
        """Mutate ``state`` by exploring ``target``; returns the newly revealed ids."""
        if state.terminal:
            raise EpisodeError("cannot step a terminal episode")
        if target not in self._actionable(state):
            raise EpisodeError(f"target {target} is not actionable")
        newly: set[int] = set()
        old_pos = state.agent_pos
        if target in state.unexplored:
            new_pos = self._enter_room(state, target, newly)
        elif target in state.frontiers:
            region_id = state.frontiers[target]
            self._reveal_region(state, region_id, newly)
            new_pos = tuple(self.scene.node(region_id).xy())
        else:
            for child in self.scene.children(target):
                if child not in state.revealed:
                    state.revealed.add(child)
                    newly.add(child)
            state.opened.add(target)
            new_pos = tuple(self.scene.node(target).xy())
        state.traveled += self._distance(old_pos, new_pos)
        state.agent_pos = new_pos
        state.steps += 1
        self._check_terminal(state)
        return newly

    # -- public episode interface -------------------------------------------

    def reset(self) -> Observation:
        self.state = self._initial_state()
        self.action_log = [{
            "event": "reset",
            "spawn_seed": self.spec.spawn_seed,
            "position": list(self.state.agent_pos),
            "revealed": sorted(self.state.revealed),
            "terminal": self.state.terminal,
            "success": self.state.success,
        }]
        return self.observation()

    def observation(self) -> Observation:
        state = self._require_state()
        frontiers = tuple(
            FrontierView(view_id, self.scene.node(region_id).xy())
            for view_id, region_id in sorted(state.frontiers.items())
        )
        unexplored = tuple(
            UnexploredRoomView(room_id, np.array(midpoint))
            for room_id, midpoint in sorted(state.unexplored.items())
        )
        return Observation(
            scene=self.scene,
            revealed=frozenset(state.revealed),
            frontiers=frontiers,
            unexplored_rooms=unexplored,
            agent_position=np.array(state.agent_pos),
            steps_taken=state.steps,
            traveled=state.traveled,
        )

    @property
    def terminal(self) -> bool:
        return self._require_state().terminal

    @property
    def success(self) -> bool:
        return self._require_state().success

    def actionable(self) -> set[int]:
        return self._actionable(self._require_state())

    def action_positions(self) -> dict[int, tuple[float, float]]:
        """World target position of every actionable node."""
        state = self._require_state()
        out = {}
        for view_id, region_id in state.frontiers.items():
            out[view_id] = tuple(self.scene.node(region_id).xy())
        for room_id, midpoint in state.unexplored.items():
            out[room_id] = midpoint
        for node_id in self._actionable(state):
            if node_id not in out:
                out[node_id] = tuple(self.scene.node(node_id).xy())
        return out

    def action_distances(self) -> dict[int, float]:
        """Geodesic meters from the agent to every actionable node."""
        state = self._require_state()
        return self.engine.distances(state.agent_pos, self.action_positions())

    def step(self, target: int) -> StepOutcome:
        state = self._require_state()
        newly = self._apply(state, target)
        self.action_log.append({
            "event": "step",
            "action": int(target),
            "position": list(state.agent_pos),
            "traveled": state.traveled,
            "newly_revealed": sorted(newly),
            "terminal": state.terminal,
            "success": state.success,
        })
        return StepOutcome(
            observation=self.observation(),
            newly_revealed=frozenset(newly),
            terminal=state.terminal,
            success=state.success,
        )

    def write_action_log(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for entry in self.action_log:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def _require_state(self) -> _State:
        if self.state is None:
            raise EpisodeError("environment not reset")
        return self.state


def replay(scene: SceneGraph, spec: EpisodeSpec, actions: list[int],
           engine: GeodesicEngine | None = None) -> Environment:
    """Re-run a recorded action sequence; used to audit episode records."""
    env = Environment(scene, spec, engine)
    env.reset()
    for action in actions:
        env.step(action)
    return env


def shortest_solution(scene: SceneGraph, spec: EpisodeSpec,
                      engine: GeodesicEngine | None = None,
                      state_cap: int = 100_000) -> tuple[int, float]:
    """Fewest steps to reveal the goal and, among those, least travel.

    Uniform-cost search over the environment's own transition function with
    lexicographic (steps, traveled) cost; ignores the episode step budget.
    """
    env = Environment(scene, spec, engine)
    start = env._initial_state()
    if spec.goal in start.revealed:
        return 0, 0.0

    counter = itertools.count()
    heap = [(0, 0.0, next(counter), start)]
    best: dict = {start.key(): (0, 0.0)}
    expanded = 0
    while heap:
        steps, traveled, _, state = heapq.heappop(heap)
        if spec.goal in state.revealed:
            return steps, traveled
        if best.get(state.key(), (math.inf, math.inf)) < (steps, traveled):
            continue
        expanded += 1
        if expanded > state_cap:
            raise EpisodeError(f"solution search exceeded {state_cap} states")
        for action in sorted(env._actionable(state)):
            successor = state.copy()
            env._apply(successor, action)
            # The step budget does not bind the oracle search.
            successor.terminal = False
            successor.success = False
            cost = (successor.steps, successor.traveled)
            key = successor.key()
            if cost < best.get(key, (math.inf, math.inf)):
                best[key] = cost
                heapq.heappush(heap, (cost[0], cost[1], next(counter), successor))
    raise EpisodeError(f"goal {spec.goal} is not revealable in scene {scene.scene_id}")
