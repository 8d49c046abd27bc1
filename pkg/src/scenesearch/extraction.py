"""Build scene graphs from annotated scenes.

The pipeline assigns objects to rooms by polygon containment, derives room
connectivity from dilated door boxes, clusters each room's object positions
into regions with a Gaussian mixture whose component count is picked by BIC,
and copies nested-object relations underneath their carrier objects.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .occupancy import OccupancyGrid
from .scenegraph import (
    Affordance,
    Door,
    EdgeKind,
    NodeKind,
    SceneEdge,
    SceneGraph,
    SceneNode,
    normalize_label,
)

logger = logging.getLogger(__name__)

COVARIANCE_FLOOR = 1e-4  # minimum covariance eigenvalue
DEFAULT_DOOR_DILATION = 0.15  # meters
EM_TOL = 1e-6
EM_MAX_ITERS = 200


class ExtractionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# geometry helpers
# ---------------------------------------------------------------------------

def point_segment_distance(p, a, b) -> float:
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def point_on_polygon_boundary(point, polygon, tol: float = 1e-9) -> bool:
    n = len(polygon)
    return any(
        point_segment_distance(point, polygon[i], polygon[(i + 1) % n]) <= tol
        for i in range(n)
    )


def point_in_polygon(point, polygon) -> bool:
    """Even-odd rule; boundary points count as inside."""
    if point_on_polygon_boundary(point, polygon):
        return True
    x, y = float(point[0]), float(point[1])
    inside = False
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            cross_x = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < cross_x:
                inside = not inside
    return inside


def polygon_edge_distance(point, polygon) -> float:
    n = len(polygon)
    return min(
        point_segment_distance(point, polygon[i], polygon[(i + 1) % n])
        for i in range(n)
    )


def polygon_centroid(polygon) -> np.ndarray:
    """Area centroid via the shoelace formula; vertex mean for degenerate polygons."""
    pts = np.asarray(polygon, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = cross.sum() / 2.0
    if abs(area) < 1e-12:
        return pts.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    def on_segment(a, b, c):
        return (min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
                and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_segment(p1, p2, q1)) or (o2 == 0 and on_segment(p1, p2, q2))
            or (o3 == 0 and on_segment(q1, q2, p1)) or (o4 == 0 and on_segment(q1, q2, p2)))


def rect_intersects_polygon(rect, polygon) -> bool:
    """Closed intersection test between an axis-aligned rectangle and a polygon."""
    xmin, ymin, xmax, ymax = rect
    if any(xmin <= px <= xmax and ymin <= py <= ymax for px, py in polygon):
        return True
    corners = [(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)]
    if any(point_in_polygon(c, polygon) for c in corners):
        return True
    rect_edges = list(zip(corners, corners[1:] + corners[:1]))
    n = len(polygon)
    for i in range(n):
        edge = (polygon[i], polygon[(i + 1) % n])
        if any(_segments_intersect(edge[0], edge[1], r1, r2) for r1, r2 in rect_edges):
            return True
    return False


# ---------------------------------------------------------------------------
# annotated-scene input
# ---------------------------------------------------------------------------

@dataclass
class ObjectAnnotation:
    instance: int
    label: str
    center: np.ndarray  # (3,)


@dataclass
class AnnotatedScene:
    scene_id: str
    objects: list[ObjectAnnotation]
    room_polygons: list[tuple[int, np.ndarray]]  # (room id, (n, 2) polygon)
    door_boxes: list[tuple[int, tuple[float, float, float, float]]]
    room_categories: dict[int, str]
    nested_edges: list[tuple[int, int, str]] = field(default_factory=list)
    occupancy: OccupancyGrid | None = None
    occupancy_ref: str = ""

    def save(self, path: str | Path) -> None:
        obj = {
            "scene_id": self.scene_id,
            "objects": [
                {"instance": o.instance, "label": o.label, "center": [float(v) for v in o.center]}
                for o in self.objects
            ],
            "rooms": [
                {"id": rid, "polygon": [[float(x), float(y)] for x, y in poly],
                 "category": self.room_categories.get(rid, "")}
                for rid, poly in self.room_polygons
            ],
            "doors": [{"id": did, "box": list(box)} for did, box in self.door_boxes],
            "nested": [
                {"parent": p, "child": c, "kind": kind} for p, c, kind in self.nested_edges
            ],
            "occupancy_ref": self.occupancy_ref,
        }
        Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "AnnotatedScene":
        path = Path(path)
        obj = json.loads(path.read_text())
        unknown = obj.keys() - {"scene_id", "objects", "rooms", "doors", "nested", "occupancy_ref"}
        if unknown:
            raise ExtractionError(f"{path}: unknown keys {sorted(unknown)}")
        objects = [
            ObjectAnnotation(int(o["instance"]), o["label"], np.asarray(o["center"], dtype=float))
            for o in obj["objects"]
        ]
        room_polygons = [(int(r["id"]), np.asarray(r["polygon"], dtype=float)) for r in obj["rooms"]]
        categories = {int(r["id"]): r["category"] for r in obj["rooms"]}
        doors = [(int(d["id"]), tuple(float(v) for v in d["box"])) for d in obj["doors"]]
        nested = [(int(n["parent"]), int(n["child"]), n["kind"]) for n in obj["nested"]]
        scene = cls(
            scene_id=obj["scene_id"], objects=objects, room_polygons=room_polygons,
            door_boxes=doors, room_categories=categories, nested_edges=nested,
            occupancy_ref=obj.get("occupancy_ref", ""),
        )
        if scene.occupancy_ref and (path.parent / scene.occupancy_ref).exists():
            scene.occupancy = OccupancyGrid.load(path.parent / scene.occupancy_ref)
        instances = {o.instance for o in objects}
        for parent, child, kind in nested:
            if parent not in instances or child not in instances:
                raise ExtractionError(f"nested edge ({parent}, {child}) references a missing instance")
            if kind not in ("inside", "on_top_of"):
                raise ExtractionError(f"unknown nested edge kind {kind!r}")
        return scene


# ---------------------------------------------------------------------------
# room assignment and connectivity
# ---------------------------------------------------------------------------

def assign_rooms(scene: AnnotatedScene) -> dict[int, int]:
    """Map each object instance to a room id.

    Containment uses the even-odd rule; boundary ties go to the smaller room
    id; objects outside every polygon go to the room with the nearest edge.
    """
    out = {}
    polygons = sorted(scene.room_polygons, key=lambda rp: rp[0])
    for annotation in scene.objects:
        point = annotation.center[:2]
        containing = [rid for rid, poly in polygons if point_in_polygon(point, poly)]
        if containing:
            out[annotation.instance] = min(containing)
        else:
            out[annotation.instance] = min(
                polygons, key=lambda rp: (polygon_edge_distance(point, rp[1]), rp[0])
            )[0]
    return out


def connect_rooms(scene: AnnotatedScene,
                  door_dilation: float = DEFAULT_DOOR_DILATION) -> list[tuple[int, int, int]]:
    """Room pairs joined by each dilated door box: (room_a, room_b, door_id)."""
    edges = []
    for door_id, (xmin, ymin, xmax, ymax) in scene.door_boxes:
        rect = (xmin - door_dilation, ymin - door_dilation,
                xmax + door_dilation, ymax + door_dilation)
        touching = sorted(
            rid for rid, poly in scene.room_polygons if rect_intersects_polygon(rect, poly)
        )
        if len(touching) < 2:
            logger.warning("door %d touches %d room(s); no connectivity added",
                           door_id, len(touching))
            continue
        for i, room_a in enumerate(touching):
            for room_b in touching[i + 1:]:
                edges.append((room_a, room_b, door_id))
    return edges


# ---------------------------------------------------------------------------
# Gaussian mixture fitting with BIC model selection
# ---------------------------------------------------------------------------

@dataclass
class GmmModel:
    k: int
    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, 2)
    covariances: np.ndarray  # (k, 2, 2)
    loglik: float
    n_iter: int = 0

    def responsibilities(self, points: np.ndarray) -> np.ndarray:
        log_r = self._log_joint(points)
        log_r -= log_r.max(axis=1, keepdims=True)
        r = np.exp(log_r)
        return r / r.sum(axis=1, keepdims=True)

    def assign(self, points: np.ndarray) -> np.ndarray:
        return np.argmax(self._log_joint(points), axis=1)

    def log_likelihood(self, points: np.ndarray) -> float:
        log_joint = self._log_joint(points)
        peak = log_joint.max(axis=1, keepdims=True)
        return float(np.sum(peak[:, 0] + np.log(np.exp(log_joint - peak).sum(axis=1))))

    def _log_joint(self, points: np.ndarray) -> np.ndarray:
        n = points.shape[0]
        out = np.empty((n, self.k))
        for j in range(self.k):
            cov = self.covariances[j]
            det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
            inv = np.array([[cov[1, 1], -cov[0, 1]], [-cov[1, 0], cov[0, 0]]]) / det
            diff = points - self.means[j]
            maha = np.einsum("ni,ij,nj->n", diff, inv, diff)
            out[:, j] = np.log(self.weights[j]) - math.log(2 * math.pi) \
                - 0.5 * math.log(det) - 0.5 * maha
        return out


def _floor_covariance(cov: np.ndarray, floor: float = COVARIANCE_FLOOR) -> np.ndarray:
    cov = (cov + cov.T) / 2.0
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    eigenvalues = np.maximum(eigenvalues, floor)
    return (eigenvectors * eigenvalues) @ eigenvectors.T


def _seed_means(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ style seeding: spread initial means by squared distance."""
    n = points.shape[0]
    means = [points[int(rng.integers(n))]]
    while len(means) < k:
        d2 = np.min([np.sum((points - m) ** 2, axis=1) for m in means], axis=0)
        total = d2.sum()
        if total <= 0.0:
            means.append(points[int(rng.integers(n))])
        else:
            means.append(points[int(rng.choice(n, p=d2 / total))])
    return np.array(means)


def fit_gmm(points, k: int, seed: int = 0, max_iters: int = EM_MAX_ITERS,
            tol: float = EM_TOL, n_init: int = 4) -> GmmModel:
    """EM fit of a k-component full-covariance 2D mixture.

    Runs ``n_init`` seeded restarts and keeps the best final likelihood,
    since a single k-means++ seeding can land every mean in one cluster.
    Covariance eigenvalues are floored, which keeps the M-step the exact
    maximizer over the floored model class, so the log-likelihood is
    non-decreasing across iterations even on degenerate inputs.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ExtractionError("points must be an (n, 2) array")
    n = points.shape[0]
    if k < 1:
        raise ExtractionError("k must be >= 1")
    if n < k:
        raise ExtractionError(f"need at least k={k} points, got {n}")
    if np.allclose(points, points[0]) and k > 1:
        logger.warning("all %d points coincide; %d components collapse to the floor", n, k)

    best: GmmModel | None = None
    for restart in range(max(1, n_init)):
        restart_seed = np.random.SeedSequence([seed, restart]).generate_state(1)[0]
        model = _fit_gmm_once(points, k, int(restart_seed), max_iters, tol)
        if best is None or model.loglik > best.loglik:
            best = model
    return best


def _fit_gmm_once(points: np.ndarray, k: int, seed: int, max_iters: int,
                  tol: float) -> GmmModel:
    n = points.shape[0]
    rng = np.random.default_rng(seed)
    means = _seed_means(points, k, rng)
    base_cov = _floor_covariance(np.cov(points.T) if n > 1 else np.eye(2))
    model = GmmModel(
        k=k, weights=np.full(k, 1.0 / k), means=means,
        covariances=np.repeat(base_cov[None, :, :], k, axis=0),
        loglik=-np.inf,
    )
    previous = -np.inf
    for iteration in range(max_iters):
        resp = model.responsibilities(points)
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-12)
        model.weights = nk / n
        model.means = (resp.T @ points) / nk[:, None]
        for j in range(k):
            diff = points - model.means[j]
            cov = (resp[:, j][:, None] * diff).T @ diff / nk[j]
            model.covariances[j] = _floor_covariance(cov)
        model.loglik = model.log_likelihood(points)
        model.n_iter = iteration + 1
        assert model.loglik >= previous - 1e-9, \
            f"EM log-likelihood decreased: {previous} -> {model.loglik}"
        if model.loglik - previous < tol and iteration > 0:
            break
        previous = model.loglik
    return model


def bic(model: GmmModel, n: int) -> float:
    """p(k) ln n - 2 loglik with p(k) = 6k - 1 free parameters in 2D."""
    p = 6 * model.k - 1
    return p * math.log(n) - 2.0 * model.loglik


def select_regions(points, k_min: int, k_max: int, seed: int = 0) -> tuple[int, np.ndarray]:
    """Component count minimizing BIC (ties to smaller k) and point assignments."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if not 1 <= k_min <= k_max <= n:
        raise ExtractionError(f"bounds must satisfy 1 <= k_min <= k_max <= n, got [{k_min}, {k_max}], n={n}")
    best_model = None
    best_bic = math.inf
    for k in range(k_min, k_max + 1):
        model = fit_gmm(points, k, seed=seed)
        score = bic(model, n)
        if score < best_bic:
            best_bic = score
            best_model = model
    return best_model.k, best_model.assign(points)


# ---------------------------------------------------------------------------
# full extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtractionConfig:
    seed: int = 0
    k_min: int = 1
    k_max: int = 5  # per-room bound is min(k_max, objects in room)
    door_dilation: float = DEFAULT_DOOR_DILATION


def extract(scene: AnnotatedScene, config: ExtractionConfig = ExtractionConfig()) -> SceneGraph:
    """Assemble a validated scene graph from an annotated scene.

    Nested-edge children are attached under their carrier objects rather
    than clustered into regions; carriers gain an openable (inside) or
    explorable (on-top-of) affordance.
    """
    nested_children = {child for _, child, _ in scene.nested_edges}
    nested_parents = {parent for parent, _, _ in scene.nested_edges}
    overlap = nested_children & nested_parents
    if overlap:
        raise ExtractionError(
            f"instances {sorted(overlap)} are both nested children and carriers; "
            "only one nesting level is representable")
    child_counts = {}
    for _, child, _ in scene.nested_edges:
        child_counts[child] = child_counts.get(child, 0) + 1
    doubled = sorted(i for i, c in child_counts.items() if c > 1)
    if doubled:
        raise ExtractionError(f"instances {doubled} are nested under multiple carriers")

    room_of_instance = assign_rooms(scene)
    annotations = {o.instance: o for o in scene.objects}
    relation_of_child = {child: (parent, kind) for parent, child, kind in scene.nested_edges}
    carrier_relations: dict[int, set[str]] = {}
    for parent, _, kind in scene.nested_edges:
        carrier_relations.setdefault(parent, set()).add(kind)

    nodes: dict[int, SceneNode] = {}
    edges: list[SceneEdge] = []
    next_id = 0

    def allocate() -> int:
        nonlocal next_id
        node_id = next_id
        next_id += 1
        return node_id

    root_id = allocate()
    nodes[root_id] = SceneNode(id=root_id, kind=NodeKind.ROOT)

    room_node_of: dict[int, int] = {}
    for room_id, polygon in sorted(scene.room_polygons, key=lambda rp: rp[0]):
        category = normalize_label(scene.room_categories.get(room_id, ""))
        if not category:
            raise ExtractionError(f"room {room_id} has no category")
        centroid = polygon_centroid(polygon)
        node_id = allocate()
        nodes[node_id] = SceneNode(
            id=node_id, kind=NodeKind.ROOM, label=category,
            position=np.array([centroid[0], centroid[1], 0.0]),
            parent=root_id, room_category=category)
        edges.append(SceneEdge(root_id, node_id, EdgeKind.CONTAINS))
        room_node_of[room_id] = node_id

    instance_node_of: dict[int, int] = {}
    for room_id, _ in sorted(scene.room_polygons, key=lambda rp: rp[0]):
        members = sorted(
            i for i, r in room_of_instance.items()
            if r == room_id and i not in nested_children
        )
        if not members:
            continue
        points = np.array([annotations[i].center[:2] for i in members])
        k_max = min(config.k_max, len(members))
        k_min = min(config.k_min, k_max)
        room_seed = int(np.random.SeedSequence([config.seed, room_id]).generate_state(1)[0])
        try:
            _, assignments = select_regions(points, k_min, k_max, seed=room_seed)
        except ExtractionError as err:
            raise ExtractionError(f"room {room_id}: {err}") from err

        clusters: dict[int, list[int]] = {}
        for instance, cluster in zip(members, assignments):
            clusters.setdefault(int(cluster), []).append(instance)
        ordered = sorted(
            clusters.values(),
            key=lambda ids: tuple(np.mean([annotations[i].center[:2] for i in ids], axis=0)),
        )
        for cluster_members in ordered:
            region_id = allocate()
            centroid = np.mean([annotations[i].center[:2] for i in cluster_members], axis=0)
            nodes[region_id] = SceneNode(
                id=region_id, kind=NodeKind.REGION,
                position=np.array([centroid[0], centroid[1], 0.0]),
                parent=room_node_of[room_id])
            edges.append(SceneEdge(room_node_of[room_id], region_id, EdgeKind.CONTAINS))
            for instance in sorted(cluster_members):
                annotation = annotations[instance]
                affordances = {Affordance.NAVIGABLE}
                for kind in carrier_relations.get(instance, ()):
                    affordances.add(Affordance.OPENABLE if kind == "inside" else Affordance.EXPLORABLE)
                node_id = allocate()
                nodes[node_id] = SceneNode(
                    id=node_id, kind=NodeKind.OBJECT,
                    label=normalize_label(annotation.label),
                    position=annotation.center.astype(float),
                    parent=region_id, affordances=frozenset(affordances))
                edges.append(SceneEdge(region_id, node_id, EdgeKind.CONTAINS))
                instance_node_of[instance] = node_id

    for child in sorted(nested_children):
        parent_instance, kind = relation_of_child[child]
        parent_node = instance_node_of.get(parent_instance)
        if parent_node is None:
            raise ExtractionError(f"nested edge parent {parent_instance} produced no node")
        annotation = annotations[child]
        node_id = allocate()
        nodes[node_id] = SceneNode(
            id=node_id, kind=NodeKind.NESTED_OBJECT,
            label=normalize_label(annotation.label),
            position=annotation.center.astype(float),
            parent=parent_node, affordances=frozenset({Affordance.NAVIGABLE}))
        edges.append(SceneEdge(parent_node, node_id, EdgeKind.CONTAINS))
        edges.append(SceneEdge(
            parent_node, node_id,
            EdgeKind.INSIDE if kind == "inside" else EdgeKind.ON_TOP_OF))
        instance_node_of[child] = node_id

    doors: list[Door] = []
    midpoints = {door_id: ((box[0] + box[2]) / 2.0, (box[1] + box[3]) / 2.0)
                 for door_id, box in scene.door_boxes}
    for room_a, room_b, door_id in connect_rooms(scene, config.door_dilation):
        node_a, node_b = room_node_of[room_a], room_node_of[room_b]
        doors.append(Door(id=door_id, midpoint=np.array(midpoints[door_id]),
                          rooms=(node_a, node_b)))
        edges.append(SceneEdge(node_a, node_b, EdgeKind.CONNECTS_VIA, door_id=door_id))
        edges.append(SceneEdge(node_b, node_a, EdgeKind.CONNECTS_VIA, door_id=door_id))

    graph = SceneGraph(
        scene_id=scene.scene_id, nodes=nodes, edges=edges, doors=doors,
        occupancy_ref=scene.occupancy_ref, occupancy=scene.occupancy)
    violations = graph.validate()
    if violations:
        raise ExtractionError("extracted graph is invalid: " + "; ".join(violations))
    return graph
