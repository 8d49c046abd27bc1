"""Compact builders for hand-written test scenes.

``build_scene`` takes a nested room/region/object description and produces a
validated SceneGraph with predictable node ids: root 0, rooms in listed
order, then regions, objects, and nested objects in listed order.
"""

from __future__ import annotations

import numpy as np

from scenesearch.scenegraph import (
    Affordance,
    Door,
    EdgeKind,
    NodeKind,
    SceneEdge,
    SceneGraph,
    SceneNode,
)

AFFORDANCE_CODES = {
    "o": Affordance.OPENABLE,
    "e": Affordance.EXPLORABLE,
    "n": Affordance.NAVIGABLE,
}


def obj(label, xy, aff="n", nested=()):
    """Object description: (label, (x, y), affordance codes, nested items).

    Nested items are (label, kind) pairs with kind "inside" or "on_top_of".
    """
    return {"label": label, "xy": xy, "aff": aff, "nested": list(nested)}


def build_scene(rooms, doors=(), scene_id="toy", grid=None):
    """Assemble a scene from room dicts: {"category", "regions": [[obj, ...]]}.

    Doors are (room_index_a, room_index_b, (x, y)) with indexes into
    ``rooms``. Returns a validated SceneGraph; raises on violations.
    """
    nodes: dict[int, SceneNode] = {}
    edges: list[SceneEdge] = []
    next_id = 0

    def place(node):
        nonlocal next_id
        nodes[node.id] = node
        next_id += 1
        return node.id

    root_id = place(SceneNode(id=next_id, kind=NodeKind.ROOT))

    room_ids = []
    pending_regions = []  # (room_node_id, region description)
    for index, room in enumerate(rooms):
        position = room.get("position", (4.0 * index, 0.0))
        room_id = place(SceneNode(
            id=next_id, kind=NodeKind.ROOM, label=room["category"],
            position=np.array([position[0], position[1], 0.0]),
            parent=root_id, room_category=room["category"]))
        edges.append(SceneEdge(root_id, room_id, EdgeKind.CONTAINS))
        room_ids.append(room_id)
        for region in room.get("regions", []):
            pending_regions.append((room_id, region))

    region_ids = []
    pending_objects = []
    for room_id, region in pending_regions:
        region_id = next_id
        centroid = np.mean([d["xy"] for d in region], axis=0)
        place(SceneNode(id=region_id, kind=NodeKind.REGION,
                        position=np.array([centroid[0], centroid[1], 0.0]),
                        parent=room_id))
        edges.append(SceneEdge(room_id, region_id, EdgeKind.CONTAINS))
        region_ids.append(region_id)
        for descriptor in region:
            pending_objects.append((region_id, descriptor))

    object_ids = {}
    pending_nested = []
    for region_id, descriptor in pending_objects:
        affordances = frozenset(AFFORDANCE_CODES[c] for c in descriptor["aff"])
        object_id = place(SceneNode(
            id=next_id, kind=NodeKind.OBJECT, label=descriptor["label"],
            position=np.array([descriptor["xy"][0], descriptor["xy"][1], 0.5]),
            parent=region_id, affordances=affordances))
        edges.append(SceneEdge(region_id, object_id, EdgeKind.CONTAINS))
        object_ids[descriptor["label"]] = object_id
        for nested_label, kind in descriptor["nested"]:
            pending_nested.append((object_id, descriptor["xy"], nested_label, kind))

    for parent_id, xy, label, kind in pending_nested:
        nested_id = place(SceneNode(
            id=next_id, kind=NodeKind.NESTED_OBJECT, label=label,
            position=np.array([xy[0], xy[1], 0.8]),
            parent=parent_id, affordances=frozenset({Affordance.NAVIGABLE})))
        edges.append(SceneEdge(parent_id, nested_id, EdgeKind.CONTAINS))
        edges.append(SceneEdge(
            parent_id, nested_id,
            EdgeKind.INSIDE if kind == "inside" else EdgeKind.ON_TOP_OF))
        object_ids[label] = nested_id

    door_list = []
    for door_id, (ia, ib, midpoint) in enumerate(doors):
        a, b = room_ids[ia], room_ids[ib]
        door_list.append(Door(id=door_id, midpoint=np.array(midpoint), rooms=(a, b)))
        edges.append(SceneEdge(a, b, EdgeKind.CONNECTS_VIA, door_id=door_id))
        edges.append(SceneEdge(b, a, EdgeKind.CONNECTS_VIA, door_id=door_id))

    graph = SceneGraph(scene_id=scene_id, nodes=nodes, edges=edges,
                       doors=door_list, occupancy=grid)
    violations = graph.validate()
    if violations:
        raise AssertionError(f"test scene invalid: {violations}")
    graph.ids = object_ids  # label -> node id, for terse assertions
    graph.room_ids = room_ids
    graph.region_ids = region_ids
    return graph
