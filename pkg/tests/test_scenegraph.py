import json
from collections import Counter

import numpy as np
import pytest

from scenesearch.scenegraph import (
    Affordance,
    EdgeKind,
    NodeKind,
    SceneEdge,
    SceneFormatError,
    SceneGraph,
    SceneNode,
    SceneValidationError,
    normalize_label,
)

from helpers import build_scene, obj


def graphs_equal(a: SceneGraph, b: SceneGraph) -> bool:
    if a.scene_id != b.scene_id or a.occupancy_ref != b.occupancy_ref:
        return False
    if set(a.nodes) != set(b.nodes):
        return False
    for node_id, node in a.nodes.items():
        other = b.nodes[node_id]
        same_pos = (node.position is None and other.position is None) or (
            node.position is not None and other.position is not None
            and np.array_equal(node.position, other.position))
        if not (node.kind == other.kind and node.label == other.label and same_pos
                and node.parent == other.parent and node.affordances == other.affordances
                and node.room_category == other.room_category):
            return False
    if sorted(a.edges, key=repr) != sorted(b.edges, key=repr):
        return False
    door_key = lambda d: (d.id, d.rooms)
    for da, db in zip(sorted(a.doors, key=door_key), sorted(b.doors, key=door_key)):
        if da.id != db.id or da.rooms != db.rooms or not np.array_equal(da.midpoint, db.midpoint):
            return False
    return len(a.doors) == len(b.doors)


class TestNormalizeLabel:
    def test_lowercases_and_trims(self):
        assert normalize_label("  Coffee  Table ") == "coffee table"

    def test_collapses_tabs_and_newlines(self):
        assert normalize_label("a\t b\nc") == "a b c"

    def test_empty(self):
        assert normalize_label("   ") == ""


class TestValidate:
    def test_well_formed_scene_has_no_violations(self, two_room_scene):
        assert two_room_scene.validate() == []

    def test_object_parented_to_room_is_layer_skip(self, one_room_scene):
        bad = one_room_scene
        desk = bad.ids["desk"]
        room = bad.room_ids[0]
        node = bad.nodes[desk]
        bad.nodes[desk] = SceneNode(
            id=desk, kind=node.kind, label=node.label, position=node.position,
            parent=room, affordances=node.affordances)
        bad.edges = [e for e in bad.edges
                     if not (e.kind == EdgeKind.CONTAINS and e.dst == desk)]
        bad.edges.append(SceneEdge(room, desk, EdgeKind.CONTAINS))
        graph = SceneGraph(bad.scene_id, bad.nodes, bad.edges, bad.doors)
        violations = graph.validate()
        assert any(f"node {desk}: parent layer skip" in v for v in violations)

    def test_asymmetric_connects_via_names_the_edge(self, two_room_scene):
        graph = two_room_scene
        # Drop one direction of the single door edge; exactly the survivor
        # should be reported as missing its partner.
        removed = [e for e in graph.edges
                   if not (e.kind == EdgeKind.CONNECTS_VIA and e.src > e.dst)]
        broken = SceneGraph(graph.scene_id, graph.nodes, removed, graph.doors)
        complaints = [v for v in broken.validate() if "symmetric partner" in v]
        assert len(complaints) == 1
        a, b = graph.room_ids
        assert f"{a}->{b}" in complaints[0]

    def test_frontier_kind_banned_in_ground_truth(self, one_room_scene):
        graph = one_room_scene
        rogue = max(graph.nodes) + 1
        graph.nodes[rogue] = SceneNode(
            id=rogue, kind=NodeKind.FRONTIER, label="ghost",
            position=np.zeros(3), parent=graph.room_ids[0])
        violations = SceneGraph(graph.scene_id, graph.nodes, graph.edges, graph.doors).validate()
        assert any("banned in ground truth" in v for v in violations)

    def test_nested_parent_needs_opening_affordance(self):
        with pytest.raises(AssertionError, match="openable/explorable"):
            build_scene(rooms=[{
                "category": "studio",
                "regions": [[obj("crate", (0, 0), "n", nested=[("gem", "inside")])]],
            }])

    def test_region_centroid_mismatch_detected(self, one_room_scene):
        graph = one_room_scene
        region = graph.region_ids[0]
        node = graph.nodes[region]
        graph.nodes[region] = SceneNode(
            id=region, kind=node.kind, label=node.label,
            position=node.position + np.array([0.5, 0.0, 0.0]), parent=node.parent)
        violations = SceneGraph(graph.scene_id, graph.nodes, graph.edges, graph.doors).validate()
        assert any("member centroid" in v for v in violations)

    def test_disconnected_rooms_detected(self):
        with pytest.raises(AssertionError, match="not connected"):
            build_scene(rooms=[
                {"category": "a", "regions": [[obj("x", (0, 0))]]},
                {"category": "b", "regions": [[obj("y", (5, 0))]]},
            ])  # no doors


class TestSerialization:
    def test_round_trip_identity(self, two_room_scene, tmp_path):
        path = tmp_path / "scene.sg.json"
        two_room_scene.save(path)
        loaded = SceneGraph.load(path)
        assert graphs_equal(two_room_scene, loaded)

    def test_canonical_reemission_is_byte_stable(self, two_room_scene, tmp_path):
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        two_room_scene.save(first)
        SceneGraph.load(first).save(second)
        assert first.read_bytes() == second.read_bytes()

    def test_missing_nodes_key_is_parse_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({
            "scene_id": "x", "edges": [], "doors": [], "occupancy_ref": ""}))
        with pytest.raises(SceneFormatError, match="nodes"):
            SceneGraph.load(path)

    def test_unknown_field_rejected(self, two_room_scene, tmp_path):
        path = tmp_path / "extra.json"
        payload = two_room_scene.to_json_obj()
        payload["mesh"] = []
        path.write_text(json.dumps(payload))
        with pytest.raises(SceneFormatError, match="mesh"):
            SceneGraph.load(path)

    def test_absent_parent_rejected_with_violation(self, two_room_scene, tmp_path):
        payload = two_room_scene.to_json_obj()
        payload["nodes"][3]["parent"] = 999
        path = tmp_path / "orphan.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(SceneValidationError) as err:
            SceneGraph.load(path)
        assert any("999" in v for v in err.value.violations)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "trunc.json"
        path.write_text('{"scene_id": "x",\n  "nodes": [')
        with pytest.raises(SceneFormatError, match="line"):
            SceneGraph.load(path)


class TestQueries:
    def test_children_of_root_are_the_rooms(self, two_room_scene):
        graph = two_room_scene
        assert graph.children(0) == graph.room_ids

    def test_children_of_leaf_nested_object_is_empty(self, two_room_scene):
        assert two_room_scene.children(two_room_scene.ids["plate"]) == []

    def test_children_sorted_ascending(self, two_room_scene):
        for node_id in two_room_scene.nodes:
            children = two_room_scene.children(node_id)
            assert children == sorted(children)

    def test_unknown_id_raises(self, two_room_scene):
        with pytest.raises(KeyError, match="12345"):
            two_room_scene.children(12345)

    def test_subtree_labels_matches_recursive_oracle(self, two_room_scene):
        graph = two_room_scene

        def oracle(node_id):  # independent depth-first enumeration
            node = graph.nodes[node_id]
            counts = Counter([node.label]) if node.label else Counter()
            for child_id, child in graph.nodes.items():
                if child.parent == node_id and any(
                        e.kind == EdgeKind.CONTAINS and e.src == node_id and e.dst == child_id
                        for e in graph.edges):
                    counts += oracle(child_id)
            return counts

        for node_id in graph.nodes:
            assert graph.subtree_labels(node_id) == oracle(node_id)

    def test_subtree_labels_excludes_empty_region_labels(self, two_room_scene):
        graph = two_room_scene
        kitchen = graph.room_ids[0]
        labels = graph.subtree_labels(kitchen)
        # kitchen + 3 objects + 2 nested items; region labels are empty
        assert sum(labels.values()) == 6
        assert "" not in labels

    def test_room_of_walks_to_the_room(self, two_room_scene):
        graph = two_room_scene
        assert graph.room_of(graph.ids["plate"]).room_category == "kitchen"
        assert graph.room_of(graph.room_ids[1]).id == graph.room_ids[1]
        assert graph.room_of(0) is None

    def test_layer_discipline_exhaustive(self, two_room_scene):
        from scenesearch.scenegraph import LAYER
        graph = two_room_scene
        for edge in graph.edges:
            if edge.kind == EdgeKind.CONTAINS:
                assert LAYER[graph.nodes[edge.dst].kind] == LAYER[graph.nodes[edge.src].kind] + 1

    def test_door_symmetry_holds(self, two_room_scene):
        graph = two_room_scene
        via = [e for e in graph.edges if e.kind == EdgeKind.CONNECTS_VIA]
        for edge in via:
            assert any(o.src == edge.dst and o.dst == edge.src and o.door_id == edge.door_id
                       for o in via)

    def test_affordances_survive_round_trip(self, two_room_scene, tmp_path):
        path = tmp_path / "scene.json"
        two_room_scene.save(path)
        loaded = SceneGraph.load(path)
        cabinet = loaded.nodes[two_room_scene.ids["cabinet"]]
        assert cabinet.affordances == frozenset({Affordance.OPENABLE, Affordance.NAVIGABLE})
