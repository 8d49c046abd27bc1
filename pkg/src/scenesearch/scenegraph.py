"""Hierarchical scene-graph data model, validation, and JSON serialization.

A scene is a five-layer directed tree (root, rooms, regions, objects,
nested objects) plus door-connectivity edges between rooms. The graph is
the shared substrate for extraction, scoring, and episode rollouts; it is
immutable after load and safe to share across episode workers.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


class SceneFormatError(ValueError):
    """A scene file could not be parsed against the schema."""


class SceneValidationError(ValueError):
    """A parsed scene violates structural invariants."""

    def __init__(self, violations: list[str]):
        super().__init__("scene invalid: " + "; ".join(violations))
        self.violations = violations


class NodeKind(str, Enum):
    ROOT = "root"
    ROOM = "room"
    REGION = "region"
    OBJECT = "object"
    NESTED_OBJECT = "nested_object"
    # Observation-only kinds; banned in ground-truth scene files.
    FRONTIER = "frontier"
    UNEXPLORED_ROOM = "unexplored_room"


class Affordance(str, Enum):
    OPENABLE = "openable"
    EXPLORABLE = "explorable"
    NAVIGABLE = "navigable"


class EdgeKind(str, Enum):
    CONTAINS = "contains"
    CONNECTS_VIA = "connects_via"
    ON_TOP_OF = "on_top_of"
    INSIDE = "inside"


#: Tree depth of each ground-truth node kind; contains-edges must step one layer down.
LAYER: dict[NodeKind, int] = {
    NodeKind.ROOT: 0,
    NodeKind.ROOM: 1,
    NodeKind.REGION: 2,
    NodeKind.OBJECT: 3,
    NodeKind.NESTED_OBJECT: 4,
}


def normalize_label(text: str) -> str:
    """Lowercase, trim, and collapse internal whitespace to single spaces."""
    return " ".join(text.split()).lower()


@dataclass(frozen=True)
class SceneNode:
    id: int
    kind: NodeKind
    label: str = ""
    position: np.ndarray | None = None  # (3,) meters; None for the root
    parent: int | None = None
    affordances: frozenset[Affordance] = frozenset()
    room_category: str | None = None

    def xy(self) -> np.ndarray:
        if self.position is None:
            raise ValueError(f"node {self.id} has no position")
        return self.position[:2]


@dataclass(frozen=True)
class SceneEdge:
    src: int
    dst: int
    kind: EdgeKind
    door_id: int | None = None


@dataclass(frozen=True)
class Door:
    id: int
    midpoint: np.ndarray  # (2,) meters
    rooms: tuple[int, int]


@dataclass
class SceneGraph:
    """Immutable-after-load scene description.

    ``occupancy`` is resolved from ``occupancy_ref`` at load time when the
    referenced grid file exists next to the scene file; planning falls back
    to straight-line distances when it is absent.
    """

    scene_id: str
    nodes: dict[int, SceneNode]
    edges: list[SceneEdge]
    doors: list[Door] = field(default_factory=list)
    occupancy_ref: str = ""
    occupancy: "object | None" = None  # OccupancyGrid; untyped to avoid an import cycle

    def __post_init__(self):
        self._children: dict[int, list[int]] = {}
        for edge in self.edges:
            if edge.kind == EdgeKind.CONTAINS:
                self._children.setdefault(edge.src, []).append(edge.dst)
        for ids in self._children.values():
            ids.sort()

    # -- lookups ---------------------------------------------------------

    def node(self, node_id: int) -> SceneNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise KeyError(f"unknown node id {node_id}") from None

    def root(self) -> SceneNode:
        for node in self.nodes.values():
            if node.kind == NodeKind.ROOT:
                return node
        raise SceneValidationError(["scene has no root node"])

    def children(self, node_id: int) -> list[int]:
        """Contains-edge children of ``node_id`` in ascending id order."""
        self.node(node_id)
        return list(self._children.get(node_id, []))

    def subtree_labels(self, node_id: int) -> Counter:
        """Multiset of non-empty labels in the contains-subtree rooted at ``node_id``."""
        labels: Counter = Counter()
        stack = [node_id]
        while stack:
            current = self.node(stack.pop())
            if current.label:
                labels[current.label] += 1
            stack.extend(self._children.get(current.id, []))
        return labels

    def rooms(self) -> list[SceneNode]:
        return sorted(
            (n for n in self.nodes.values() if n.kind == NodeKind.ROOM),
            key=lambda n: n.id,
        )

    def room_of(self, node_id: int) -> SceneNode | None:
        """Nearest room ancestor of a node (the node itself if it is a room)."""
        current = self.node(node_id)
        while current is not None:
            if current.kind == NodeKind.ROOM:
                return current
            if current.parent is None:
                return None
            current = self.node(current.parent)
        return None

    def connected_rooms(self, room_id: int) -> list[int]:
        """Rooms reachable from ``room_id`` through a single door."""
        out = {e.dst for e in self.edges if e.kind == EdgeKind.CONNECTS_VIA and e.src == room_id}
        return sorted(out)

    def doors_between(self, room_a: int, room_b: int) -> list[Door]:
        pair = {room_a, room_b}
        return [d for d in self.doors if set(d.rooms) == pair]

    # -- validation ------------------------------------------------------

    def validate(self) -> list[str]:
        """Check every structural invariant; returns human-readable violations."""
        out: list[str] = []
        roots = [n for n in self.nodes.values() if n.kind == NodeKind.ROOT]
        if len(roots) != 1:
            out.append(f"scene must have exactly one root, found {len(roots)}")

        for node in self.nodes.values():
            if node.kind not in LAYER:
                out.append(f"node {node.id}: kind {node.kind.value} banned in ground truth")
                continue
            if node.kind == NodeKind.ROOT:
                if node.parent is not None:
                    out.append(f"node {node.id}: root must not have a parent")
                if node.position is not None:
                    out.append(f"node {node.id}: root must not have a position")
            else:
                if node.position is None:
                    out.append(f"node {node.id}: missing position")
                if node.parent is None:
                    out.append(f"node {node.id}: missing parent")
                elif node.parent not in self.nodes:
                    out.append(f"node {node.id}: parent {node.parent} does not exist")
                else:
                    parent = self.nodes[node.parent]
                    if parent.kind not in LAYER or LAYER.get(node.kind, -1) != LAYER[parent.kind] + 1:
                        out.append(f"node {node.id}: parent layer skip")
                if not node.label:
                    if node.kind in (NodeKind.ROOM, NodeKind.OBJECT, NodeKind.NESTED_OBJECT):
                        out.append(f"node {node.id}: empty label")
            if node.label != normalize_label(node.label):
                out.append(f"node {node.id}: label {node.label!r} not normalized")
            if node.kind == NodeKind.ROOM and not node.room_category:
                out.append(f"node {node.id}: room without category")
            if node.kind != NodeKind.ROOM and node.room_category is not None:
                out.append(f"node {node.id}: room_category on non-room")
            if node.kind == NodeKind.NESTED_OBJECT and node.parent in self.nodes:
                holder = self.nodes[node.parent]
                if not holder.affordances & {Affordance.OPENABLE, Affordance.EXPLORABLE}:
                    out.append(f"node {node.id}: parent {holder.id} lacks an openable/explorable affordance")

        contains_parent: dict[int, int] = {}
        for i, edge in enumerate(self.edges):
            if edge.src not in self.nodes or edge.dst not in self.nodes:
                out.append(f"edge {i}: references a missing node")
                continue
            src, dst = self.nodes[edge.src], self.nodes[edge.dst]
            if edge.kind == EdgeKind.CONTAINS:
                if edge.dst in contains_parent:
                    out.append(f"edge {i}: node {edge.dst} contained twice")
                contains_parent[edge.dst] = edge.src
                if dst.parent != edge.src:
                    out.append(f"edge {i}: contains edge disagrees with parent of node {edge.dst}")
            elif edge.kind == EdgeKind.CONNECTS_VIA:
                if src.kind != NodeKind.ROOM or dst.kind != NodeKind.ROOM:
                    out.append(f"edge {i}: connects_via must link rooms")
                if edge.door_id is None:
                    out.append(f"edge {i}: connects_via without door id")
                elif not any(
                    e.kind == EdgeKind.CONNECTS_VIA
                    and e.src == edge.dst
                    and e.dst == edge.src
                    and e.door_id == edge.door_id
                    for e in self.edges
                ):
                    out.append(
                        f"edge {i}: connects_via {edge.src}->{edge.dst} door {edge.door_id} has no symmetric partner"
                    )
            else:  # on_top_of / inside
                if src.kind != NodeKind.OBJECT or dst.kind != NodeKind.NESTED_OBJECT:
                    out.append(f"edge {i}: {edge.kind.value} must link an object to a nested object")
                elif dst.parent != edge.src:
                    out.append(f"edge {i}: {edge.kind.value} disagrees with the contains tree")

        for node in self.nodes.values():
            if node.kind in LAYER and node.kind != NodeKind.ROOT and node.parent is not None:
                if contains_parent.get(node.id) != node.parent:
                    out.append(f"node {node.id}: no contains edge from parent {node.parent}")

        # Connectivity of the contains tree.
        if len(roots) == 1:
            seen = {roots[0].id}
            stack = [roots[0].id]
            while stack:
                for child in self._children.get(stack.pop(), []):
                    if child in self.nodes and child not in seen:
                        seen.add(child)
                        stack.append(child)
            for node_id in sorted(set(self.nodes) - seen):
                out.append(f"node {node_id}: unreachable from root")

        # Region positions sit at the centroid of their object children.
        for node in self.nodes.values():
            if node.kind != NodeKind.REGION or node.position is None:
                continue
            member_xy = [
                self.nodes[c].position[:2]
                for c in self._children.get(node.id, [])
                if self.nodes[c].position is not None
            ]
            if member_xy:
                centroid = np.mean(member_xy, axis=0)
                if not np.allclose(node.position[:2], centroid, atol=1e-6) or abs(node.position[2]) > 1e-6:
                    out.append(f"node {node.id}: region position is not the member centroid")

        # Every room must reach every other room through doors.
        room_ids = [n.id for n in self.nodes.values() if n.kind == NodeKind.ROOM]
        if len(room_ids) > 1:
            seen_rooms = {room_ids[0]}
            stack = [room_ids[0]]
            while stack:
                for other in self.connected_rooms(stack.pop()):
                    if other not in seen_rooms:
                        seen_rooms.add(other)
                        stack.append(other)
            for room_id in sorted(set(room_ids) - seen_rooms):
                out.append(f"room {room_id}: not connected to the other rooms via doors")

        for door in self.doors:
            for room_id in door.rooms:
                if room_id not in self.nodes or self.nodes[room_id].kind != NodeKind.ROOM:
                    out.append(f"door {door.id}: references non-room {room_id}")
        return out

    # -- serialization ---------------------------------------------------

    def to_json_obj(self) -> dict:
        nodes = []
        for node in sorted(self.nodes.values(), key=lambda n: n.id):
            nodes.append(
                {
                    "id": node.id,
                    "kind": node.kind.value,
                    "label": node.label,
                    "position": None if node.position is None else [float(v) for v in node.position],
                    "parent": node.parent,
                    "affordances": sorted(a.value for a in node.affordances),
                    "room_category": node.room_category,
                }
            )
        edges = [
            {"src": e.src, "dst": e.dst, "kind": e.kind.value, "door_id": e.door_id}
            for e in sorted(self.edges, key=lambda e: (e.kind.value, e.src, e.dst, e.door_id or -1))
        ]
        doors = [
            {"id": d.id, "midpoint": [float(v) for v in d.midpoint], "rooms": list(d.rooms)}
            for d in sorted(self.doors, key=lambda d: (d.id, d.rooms))
        ]
        return {
            "scene_id": self.scene_id,
            "nodes": nodes,
            "edges": edges,
            "doors": doors,
            "occupancy_ref": self.occupancy_ref,
        }

    def save(self, path: str | Path) -> None:
        """Write the canonical JSON form (sorted keys, nodes by id, stable edge order)."""
        Path(path).write_text(json.dumps(self.to_json_obj(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_json_obj(cls, obj: dict, occupancy=None) -> "SceneGraph":
        _require_keys(obj, {"scene_id", "nodes", "edges", "doors", "occupancy_ref"}, "scene")
        nodes: dict[int, SceneNode] = {}
        for i, raw in enumerate(obj["nodes"]):
            _require_keys(
                raw,
                {"id", "kind", "label", "position", "parent", "affordances", "room_category"},
                f"nodes[{i}]",
            )
            try:
                kind = NodeKind(raw["kind"])
            except ValueError:
                raise SceneFormatError(f"nodes[{i}]: unknown kind {raw['kind']!r}") from None
            position = raw["position"]
            if position is not None:
                if len(position) != 3:
                    raise SceneFormatError(f"nodes[{i}]: position must have 3 entries")
                position = np.asarray(position, dtype=float)
            try:
                affordances = frozenset(Affordance(a) for a in raw["affordances"])
            except ValueError:
                raise SceneFormatError(f"nodes[{i}]: unknown affordance in {raw['affordances']!r}") from None
            node_id = int(raw["id"])
            if node_id in nodes:
                raise SceneFormatError(f"nodes[{i}]: duplicate id {node_id}")
            nodes[node_id] = SceneNode(
                id=node_id,
                kind=kind,
                label=raw["label"],
                position=position,
                parent=None if raw["parent"] is None else int(raw["parent"]),
                affordances=affordances,
                room_category=raw["room_category"],
            )
        edges = []
        for i, raw in enumerate(obj["edges"]):
            _require_keys(raw, {"src", "dst", "kind", "door_id"}, f"edges[{i}]")
            try:
                kind = EdgeKind(raw["kind"])
            except ValueError:
                raise SceneFormatError(f"edges[{i}]: unknown kind {raw['kind']!r}") from None
            edges.append(
                SceneEdge(
                    src=int(raw["src"]),
                    dst=int(raw["dst"]),
                    kind=kind,
                    door_id=None if raw["door_id"] is None else int(raw["door_id"]),
                )
            )
        doors = []
        for i, raw in enumerate(obj["doors"]):
            _require_keys(raw, {"id", "midpoint", "rooms"}, f"doors[{i}]")
            if len(raw["rooms"]) != 2:
                raise SceneFormatError(f"doors[{i}]: rooms must list exactly two room ids")
            doors.append(
                Door(
                    id=int(raw["id"]),
                    midpoint=np.asarray(raw["midpoint"], dtype=float),
                    rooms=(int(raw["rooms"][0]), int(raw["rooms"][1])),
                )
            )
        return cls(
            scene_id=obj["scene_id"],
            nodes=nodes,
            edges=edges,
            doors=doors,
            occupancy_ref=obj["occupancy_ref"],
            occupancy=occupancy,
        )

    @classmethod
    def load(cls, path: str | Path) -> "SceneGraph":
        """Load and validate a scene file, resolving its occupancy grid if present."""
        path = Path(path)
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as err:
            raise SceneFormatError(f"{path}: invalid JSON at line {err.lineno}: {err.msg}") from None
        if not isinstance(obj, dict):
            raise SceneFormatError(f"{path}: top level must be an object")
        graph = cls.from_json_obj(obj)
        violations = graph.validate()
        if violations:
            raise SceneValidationError(violations)
        if graph.occupancy_ref:
            grid_path = path.parent / graph.occupancy_ref
            if grid_path.exists():
                from .occupancy import OccupancyGrid

                graph.occupancy = OccupancyGrid.load(grid_path)
            else:
                logger.warning("scene %s: occupancy_ref %r not found, planning falls back to straight lines",
                               graph.scene_id, graph.occupancy_ref)
        return graph


def _require_keys(obj: dict, keys: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise SceneFormatError(f"{where}: expected an object")
    missing = keys - obj.keys()
    if missing:
        raise SceneFormatError(f"{where}: missing keys {sorted(missing)}")
    unknown = obj.keys() - keys
    if unknown:
        raise SceneFormatError(f"{where}: unknown keys {sorted(unknown)}")
