"""Seeded synthetic households with planted relational ground truth.

Each generated scene is a row of rooms joined by doors, two object clumps
(regions) per room, and containers that may hide nested objects. Alongside
the scenes the generator plants:

* prior tables that point at each goal's room and container (the oracle
  backend for benchmark runs),
* an embedding table whose vectors cluster by room, so cosine similarity
  carries a weaker, room-level version of the same signal.

All labels are unique per scene, which keeps the planted tables unambiguous
when several scenes share one benchmark suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embeddings import TableProvider, unit
from .environment import EpisodeSpec, save_episode_specs
from .occupancy import OccupancyGrid
from .scenegraph import (
    Affordance,
    Door,
    EdgeKind,
    NodeKind,
    SceneEdge,
    SceneGraph,
    SceneNode,
)
from .scoring import TableBackend

ROOM_SIZE = 6.0  # meters per room side
RESOLUTION = 0.25
DOOR_HALF_WIDTH = 0.5

CONTAINER_WORDS = ("cabinet", "chest", "wardrobe", "rack")
FILLER_WORDS = ("plant", "stool", "lamp", "bin")
NESTED_WORDS = ("cup", "book", "towel", "bowl", "candle", "folder")


@dataclass
class SynthSuite:
    scenes: list[SceneGraph]
    episodes: list[EpisodeSpec]
    contain_table: dict[tuple[str, str], float]
    cooccur_table: dict[tuple[str, str], float]
    embedding_vectors: dict[str, np.ndarray]
    goal_rooms: dict[str, str] = field(default_factory=dict)  # query -> room category

    def table_backend(self, default: float | None = None) -> TableBackend:
        return TableBackend(self.contain_table, self.cooccur_table, default=default)

    def embedding_provider(self) -> TableProvider:
        return TableProvider(self.embedding_vectors, source="synthetic")

    def write(self, directory: str | Path) -> None:
        """Materialize scenes, grids, episodes, tables, and embeddings on disk."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for scene in self.scenes:
            scene.save(directory / f"{scene.scene_id}.sg.json")
            if scene.occupancy is not None:
                scene.occupancy.save(directory / scene.occupancy_ref)
        save_episode_specs(self.episodes, directory / "episodes.json")
        self.table_backend().save(directory / "tables.json")
        self.embedding_provider().save(directory / "embeddings.emb")


def _room_grid(n_rooms: int) -> OccupancyGrid:
    cells_per_room = int(ROOM_SIZE / RESOLUTION)
    width = n_rooms * cells_per_room + 2
    height = cells_per_room + 2
    cells = np.zeros((height, width), dtype=bool)
    cells[0, :] = cells[-1, :] = True
    cells[:, 0] = cells[:, -1] = True
    door_rows = [
        r for r in range(height)
        if abs((-RESOLUTION + (r + 0.5) * RESOLUTION) - ROOM_SIZE / 2) <= DOOR_HALF_WIDTH
    ]
    for boundary in range(1, n_rooms):
        col = boundary * cells_per_room + 1
        cells[:, col] = True
        for r in door_rows:
            cells[r, col] = False
    return OccupancyGrid(resolution=RESOLUTION, origin=(-RESOLUTION, -RESOLUTION), cells=cells)


def build_scene(scene_id: str, seed: int, n_rooms: int = 4,
                containers_per_region: int = 2, fillers_per_region: int = 1,
                nested_per_container: int = 1) -> tuple[SceneGraph, dict]:
    """One synthetic scene plus metadata describing where everything lives."""
    rng = np.random.default_rng(seed)
    nodes: dict[int, SceneNode] = {}
    edges: list[SceneEdge] = []
    next_id = 0

    def add(node: SceneNode) -> int:
        nodes[node.id] = node
        return node.id

    root = add(SceneNode(id=next_id, kind=NodeKind.ROOT))
    next_id += 1

    room_ids = []
    for i in range(n_rooms):
        category = f"{scene_id} room {i}"
        room_ids.append(add(SceneNode(
            id=next_id, kind=NodeKind.ROOM, label=category,
            position=np.array([(i + 0.5) * ROOM_SIZE, ROOM_SIZE / 2, 0.0]),
            parent=root, room_category=category)))
        edges.append(SceneEdge(root, room_ids[-1], EdgeKind.CONTAINS))
        next_id += 1

    clump_offsets = [(1.5, 1.5), (4.5, 4.5)]
    meta = {"containers": [], "objects_by_room": {}, "room_of_label": {}, "nested": []}
    object_counter = 0
    for i, room_id in enumerate(room_ids):
        category = nodes[room_id].room_category
        meta["objects_by_room"][category] = []
        for clump_x, clump_y in clump_offsets:
            center = np.array([i * ROOM_SIZE + clump_x, clump_y])
            members = []
            for j in range(containers_per_region + fillers_per_region):
                is_container = j < containers_per_region
                word = CONTAINER_WORDS[object_counter % len(CONTAINER_WORDS)] if is_container \
                    else FILLER_WORDS[object_counter % len(FILLER_WORDS)]
                label = f"{scene_id} {word} {object_counter}"
                position = center + rng.uniform(-0.6, 0.6, size=2)
                members.append((label, position, is_container))
                object_counter += 1

            region_id = next_id
            next_id += 1
            object_ids = []
            for label, position, is_container in members:
                affordances = {Affordance.NAVIGABLE}
                if is_container:
                    opener = Affordance.OPENABLE if object_counter % 2 else Affordance.EXPLORABLE
                    affordances.add(opener)
                object_ids.append(add(SceneNode(
                    id=next_id, kind=NodeKind.OBJECT, label=label,
                    position=np.array([position[0], position[1], 0.5]),
                    parent=region_id, affordances=frozenset(affordances))))
                meta["objects_by_room"][category].append(label)
                meta["room_of_label"][label] = category
                if is_container:
                    meta["containers"].append((object_ids[-1], label, category))
                next_id += 1

            centroid = np.mean([nodes[o].position[:2] for o in object_ids], axis=0)
            add(SceneNode(id=region_id, kind=NodeKind.REGION,
                          position=np.array([centroid[0], centroid[1], 0.0]),
                          parent=room_id))
            edges.append(SceneEdge(room_id, region_id, EdgeKind.CONTAINS))
            for object_id in object_ids:
                edges.append(SceneEdge(region_id, object_id, EdgeKind.CONTAINS))

    nested_counter = 0
    for container_id, container_label, category in meta["containers"]:
        container = nodes[container_id]
        relation = EdgeKind.INSIDE if Affordance.OPENABLE in container.affordances \
            else EdgeKind.ON_TOP_OF
        for _ in range(nested_per_container):
            word = NESTED_WORDS[nested_counter % len(NESTED_WORDS)]
            label = f"{scene_id} {word} {nested_counter}"
            nested_id = add(SceneNode(
                id=next_id, kind=NodeKind.NESTED_OBJECT, label=label,
                position=container.position + np.array([0.0, 0.0, 0.3]),
                parent=container_id, affordances=frozenset({Affordance.NAVIGABLE})))
            edges.append(SceneEdge(container_id, nested_id, EdgeKind.CONTAINS))
            edges.append(SceneEdge(container_id, nested_id, relation))
            meta["room_of_label"][label] = category
            meta["objects_by_room"][category].append(label)
            meta["nested"].append((nested_id, label, container_id, container_label, category))
            nested_counter += 1
            next_id += 1

    doors = []
    for i in range(n_rooms - 1):
        midpoint = np.array([(i + 1) * ROOM_SIZE, ROOM_SIZE / 2])
        doors.append(Door(id=i, midpoint=midpoint, rooms=(room_ids[i], room_ids[i + 1])))
        edges.append(SceneEdge(room_ids[i], room_ids[i + 1], EdgeKind.CONNECTS_VIA, door_id=i))
        edges.append(SceneEdge(room_ids[i + 1], room_ids[i], EdgeKind.CONNECTS_VIA, door_id=i))

    graph = SceneGraph(
        scene_id=scene_id, nodes=nodes, edges=edges, doors=doors,
        occupancy_ref=f"{scene_id}.occ", occupancy=_room_grid(n_rooms),
    )
    violations = graph.validate()
    if violations:
        raise AssertionError(f"synthetic scene invalid: {violations}")
    return graph, meta


def build_suite(seed: int = 0, n_scenes: int = 5, n_rooms: int = 4,
                episodes_per_scene: int = 10, n_max: int = 10,
                containers_per_region: int = 3, embedding_dim: int = 24,
                interactive_fraction: float = 0.7) -> SynthSuite:
    """Scenes, episodes, and planted priors for one benchmark suite.

    Priors score each goal's room at 0.9 and its carrier container at 0.9
    with a 0.82 decoy in the same room, leaving everything else low, so a
    scorer following them heads almost straight to the goal. Decoy
    containers are what separate the prior-guided agent from the
    room-level-only similarity baseline, so their count sets the gap.
    """
    rng = np.random.default_rng(seed)
    suite = SynthSuite(scenes=[], episodes=[], contain_table={}, cooccur_table={},
                       embedding_vectors={}, goal_rooms={})

    room_basis: dict[str, np.ndarray] = {}
    for scene_index in range(n_scenes):
        scene_id = f"synth{scene_index:02d}"
        scene, meta = build_scene(scene_id, seed=int(rng.integers(2**31)), n_rooms=n_rooms,
                                  containers_per_region=containers_per_region)
        suite.scenes.append(scene)

        for category in meta["objects_by_room"]:
            basis = unit(rng.standard_normal(embedding_dim))
            room_basis[category] = basis
            suite.embedding_vectors[category] = basis
        for label, category in meta["room_of_label"].items():
            noise = unit(rng.standard_normal(embedding_dim))
            suite.embedding_vectors[label] = unit(0.8 * room_basis[category] + 0.6 * noise)

        nested = list(meta["nested"])
        first_level = [
            (node.id, node.label, meta["room_of_label"][node.label])
            for node in scene.nodes.values()
            if node.kind == NodeKind.OBJECT and not scene.children(node.id)
        ]
        n_interactive = round(episodes_per_scene * interactive_fraction)
        for episode_index in range(episodes_per_scene):
            if episode_index < n_interactive and nested:
                pick = nested[int(rng.integers(len(nested)))]
                goal_id, query, carrier_id, carrier_label, category = pick
                interactive = True
            else:
                goal_id, query, category = first_level[int(rng.integers(len(first_level)))]
                carrier_label = None
                interactive = False
            suite.episodes.append(EpisodeSpec(
                scene_id=scene_id, goal=goal_id, query=query,
                spawn_seed=None, n_max=n_max, interactive=interactive))
            suite.goal_rooms[query] = category
            _plant_priors(suite, meta, rng, query, category, carrier_label)
    return suite


def _plant_priors(suite: SynthSuite, meta: dict, rng: np.random.Generator,
                  query: str, goal_category: str, carrier_label: str | None) -> None:
    for category, labels in meta["objects_by_room"].items():
        if (category, query) not in suite.contain_table:
            score = 0.9 if category == goal_category else round(float(rng.uniform(0.05, 0.3)), 3)
            suite.contain_table[(category, query)] = score
        for label in labels:
            if (label, query) in suite.cooccur_table:
                continue
            suite.cooccur_table[(label, query)] = round(float(rng.uniform(0.05, 0.4)), 3)
    if carrier_label is not None:
        suite.cooccur_table[(carrier_label, query)] = 0.9
        decoys = [
            label for _, label, category in meta["containers"]
            if category == goal_category and label != carrier_label
        ]
        if decoys:
            decoy = decoys[int(rng.integers(len(decoys)))]
            suite.cooccur_table[(decoy, query)] = 0.82
    else:
        # First-level goal: mark its clump-mates as plausible company.
        for label in meta["objects_by_room"][goal_category]:
            if label != query and (label, query) in suite.cooccur_table:
                suite.cooccur_table[(label, query)] = max(
                    suite.cooccur_table[(label, query)],
                    round(float(rng.uniform(0.3, 0.5)), 3))
