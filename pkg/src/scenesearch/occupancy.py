"""2D occupancy grids: dilation, nearest-free-cell queries, and grid geodesics.

Distances are shortest 8-connected paths on the dilated grid (axis steps cost
one resolution, diagonals cost sqrt(2) resolutions, no cutting through fully
blocked corners). Path costs are carried as (axis, diagonal) step counts so
that two routes with the same step counts always compare exactly equal.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SQRT2 = math.sqrt(2.0)

#: Default obstacle inflation (meters) applied before planning.
DEFAULT_DILATION_RADIUS = 0.2


class GridFormatError(ValueError):
    """An occupancy grid file could not be parsed."""


class NoFreeCell(ValueError):
    """No free cell satisfies the query constraints."""


@dataclass(frozen=True)
class OccupancyGrid:
    """Row-major boolean grid; True marks an occupied cell.

    ``origin`` is the world position of the grid's lower corner: the center
    of cell (row, col) is ``origin + (col + 0.5, row + 0.5) * resolution``.
    """

    resolution: float
    origin: tuple[float, float]
    cells: np.ndarray  # (height, width) bool

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.cells.ndim != 2:
            raise ValueError("cells must be 2-dimensional")

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def is_free(self, cell: tuple[int, int]) -> bool:
        return self.in_bounds(cell) and not self.cells[cell]

    def cell_center(self, cell: tuple[int, int]) -> np.ndarray:
        r, c = cell
        return np.array(
            [self.origin[0] + (c + 0.5) * self.resolution,
             self.origin[1] + (r + 0.5) * self.resolution]
        )

    def world_to_cell(self, point) -> tuple[int, int]:
        col = int(math.floor((point[0] - self.origin[0]) / self.resolution))
        row = int(math.floor((point[1] - self.origin[1]) / self.resolution))
        return row, col

    # -- file format -------------------------------------------------------

    def save(self, path: str | Path) -> None:
        lines = ["OCC1",
                 f"res {self.resolution!r} origin {self.origin[0]!r} {self.origin[1]!r} "
                 f"w {self.width} h {self.height}"]
        for row in self.cells:
            lines.append("".join("1" if v else "0" for v in row))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "OccupancyGrid":
        lines = Path(path).read_text().splitlines()
        if not lines or lines[0] != "OCC1":
            raise GridFormatError(f"{path}: missing OCC1 magic line")
        if len(lines) < 2:
            raise GridFormatError(f"{path}: missing header line")
        parts = lines[1].split()
        if len(parts) != 9 or parts[0] != "res" or parts[2] != "origin" or parts[5] != "w" or parts[7] != "h":
            raise GridFormatError(f"{path}: malformed header {lines[1]!r}")
        res = float(parts[1])
        origin = (float(parts[3]), float(parts[4]))
        width, height = int(parts[6]), int(parts[8])
        body = lines[2:]
        if len(body) != height:
            raise GridFormatError(f"{path}: expected {height} rows, found {len(body)}")
        cells = np.zeros((height, width), dtype=bool)
        for r, line in enumerate(body):
            if len(line) != width or set(line) - {"0", "1"}:
                raise GridFormatError(f"{path}: row {r} must be {width} characters of 0/1")
            cells[r] = np.frombuffer(line.encode(), dtype=np.uint8) == ord("1")
        return cls(resolution=res, origin=origin, cells=cells)


def disk_offsets(radius: float, resolution: float) -> list[tuple[int, int]]:
    """Cell offsets whose centers lie within ``radius`` meters of a center."""
    reach = int(math.floor(radius / resolution + 1e-9))
    limit = (radius / resolution) ** 2 + 1e-9
    return [
        (dr, dc)
        for dr in range(-reach, reach + 1)
        for dc in range(-reach, reach + 1)
        if dr * dr + dc * dc <= limit
    ]


def dilate(grid: OccupancyGrid, radius: float) -> OccupancyGrid:
    """Inflate obstacles: a cell is occupied iff an input obstacle is within ``radius``."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if radius == 0 or not grid.cells.any():
        return OccupancyGrid(grid.resolution, grid.origin, grid.cells.copy())
    out = np.zeros_like(grid.cells)
    h, w = grid.cells.shape
    for dr, dc in disk_offsets(radius, grid.resolution):
        src_r = slice(max(0, -dr), min(h, h - dr))
        src_c = slice(max(0, -dc), min(w, w - dc))
        dst_r = slice(max(0, dr), min(h, h + dr))
        dst_c = slice(max(0, dc), min(w, w + dc))
        out[dst_r, dst_c] |= grid.cells[src_r, src_c]
    return OccupancyGrid(grid.resolution, grid.origin, out)


def nearest_free(grid: OccupancyGrid, point, mask: np.ndarray | None = None) -> tuple[int, int]:
    """Free cell closest (center-to-point Euclidean) to ``point``.

    Ties break toward the lower row, then lower column. ``mask`` optionally
    restricts candidates to cells where it is True.
    """
    free = ~grid.cells
    if mask is not None:
        free = free & mask
    rows, cols = np.nonzero(free)
    if rows.size == 0:
        raise NoFreeCell("no free cell satisfies the mask")
    cx = grid.origin[0] + (cols + 0.5) * grid.resolution
    cy = grid.origin[1] + (rows + 0.5) * grid.resolution
    d2 = (cx - point[0]) ** 2 + (cy - point[1]) ** 2
    best = np.min(d2)
    tied = np.nonzero(d2 == best)[0]
    pick = tied[np.lexsort((cols[tied], rows[tied]))[0]]
    return int(rows[pick]), int(cols[pick])


@dataclass(frozen=True)
class GeodesicResult:
    distance: float  # meters; math.inf when unreachable
    path: tuple[tuple[int, int], ...]

    @property
    def reachable(self) -> bool:
        return math.isfinite(self.distance)


_STEPS = [
    (-1, 0, False), (1, 0, False), (0, -1, False), (0, 1, False),
    (-1, -1, True), (-1, 1, True), (1, -1, True), (1, 1, True),
]


def _step_cost(axis: int, diag: int) -> float:
    return axis + diag * SQRT2


def _neighbors(cells: np.ndarray, r: int, c: int):
    h, w = cells.shape
    for dr, dc, diag in _STEPS:
        nr, nc = r + dr, c + dc
        if not (0 <= nr < h and 0 <= nc < w) or cells[nr, nc]:
            continue
        if diag and cells[r + dr, c] and cells[r, c + dc]:
            continue  # both adjacent axis cells blocked: no corner squeeze
        yield nr, nc, diag


def dijkstra_field(grid: OccupancyGrid, source: tuple[int, int]):
    """Single-source shortest paths; returns (axis, diag) step-count arrays and parents.

    Unreached cells hold -1 counts.
    """
    cells = grid.cells
    if not grid.in_bounds(source) or cells[source]:
        raise ValueError(f"source cell {source} is occupied or out of bounds")
    h, w = cells.shape
    axis = np.full((h, w), -1, dtype=np.int32)
    diag = np.full((h, w), -1, dtype=np.int32)
    parent = np.full((h, w, 2), -1, dtype=np.int32)
    axis[source] = 0
    diag[source] = 0
    heap = [(0.0, source[0], source[1], 0, 0)]
    done = np.zeros((h, w), dtype=bool)
    while heap:
        cost, r, c, a, d = heapq.heappop(heap)
        if done[r, c]:
            continue
        done[r, c] = True
        for nr, nc, is_diag in _neighbors(cells, r, c):
            if done[nr, nc]:
                continue
            na, nd = a + (not is_diag), d + is_diag
            ncost = _step_cost(na, nd)
            if axis[nr, nc] < 0 or ncost < _step_cost(axis[nr, nc], diag[nr, nc]):
                axis[nr, nc] = na
                diag[nr, nc] = nd
                parent[nr, nc] = (r, c)
                heapq.heappush(heap, (ncost, nr, nc, na, nd))
    return axis, diag, parent


def geodesic(grid: OccupancyGrid, a: tuple[int, int], b: tuple[int, int]) -> GeodesicResult:
    """Shortest 8-connected path between two free cells."""
    for cell in (a, b):
        if not grid.in_bounds(cell) or grid.cells[cell]:
            raise ValueError(f"endpoint cell {cell} is occupied or out of bounds")
    a = (int(a[0]), int(a[1]))
    b = (int(b[0]), int(b[1]))
    if a == b:
        return GeodesicResult(distance=0.0, path=(a,))
    axis, diag, parent = dijkstra_field(grid, a)
    if axis[b] < 0:
        return GeodesicResult(distance=math.inf, path=())
    path = [b]
    while path[-1] != a:
        r, c = path[-1]
        path.append((int(parent[r, c, 0]), int(parent[r, c, 1])))
    path.reverse()
    distance = _step_cost(int(axis[b]), int(diag[b])) * grid.resolution
    return GeodesicResult(distance=distance, path=tuple(path))


class GeodesicEngine:
    """Geodesic distance queries on the dilated grid, with a field cache.

    The cache maps source cells to completed Dijkstra fields; hits only skip
    recomputation and never change results, so concurrent read-mostly use is
    safe. Falls back to straight-line distance when built without a grid.
    """

    def __init__(self, grid: OccupancyGrid | None, dilation_radius: float = DEFAULT_DILATION_RADIUS):
        self.grid = dilate(grid, dilation_radius) if grid is not None else None
        self._fields: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def snap(self, point) -> tuple[int, int]:
        assert self.grid is not None
        cell = self.grid.world_to_cell(point)
        if self.grid.is_free(cell):
            return cell
        return nearest_free(self.grid, point)

    def _field(self, source: tuple[int, int]):
        field = self._fields.get(source)
        if field is None:
            axis, diag, _ = dijkstra_field(self.grid, source)
            field = (axis, diag)
            self._fields[source] = field
        return field

    def distance(self, origin, target) -> float:
        """Meters from ``origin`` to ``target`` (world coordinates); inf if unreachable."""
        if self.grid is None:
            return float(math.hypot(target[0] - origin[0], target[1] - origin[1]))
        src = self.snap(origin)
        dst = self.snap(target)
        axis, diag = self._field(src)
        if axis[dst] < 0:
            return math.inf
        return _step_cost(int(axis[dst]), int(diag[dst])) * self.grid.resolution

    def distances(self, origin, targets: dict) -> dict:
        """Distances from one origin to many world points, via one shared field."""
        if self.grid is None:
            return {k: self.distance(origin, p) for k, p in targets.items()}
        src = self.snap(origin)
        axis, diag = self._field(src)
        out = {}
        for key, point in targets.items():
            dst = self.snap(point)
            if axis[dst] < 0:
                out[key] = math.inf
            else:
                out[key] = _step_cost(int(axis[dst]), int(diag[dst])) * self.grid.resolution
        return out


def geodesic_to_node(graph, origin, node_id: int,
                     dilation_radius: float = DEFAULT_DILATION_RADIUS) -> float:
    """Planning distance (meters) from a world position to a scene node.

    Both endpoints snap to their nearest free cells of the dilated grid;
    returns inf when no free path exists and straight-line distance when the
    scene carries no grid.
    """
    node = graph.node(node_id)
    target = node.xy()
    engine = GeodesicEngine(graph.occupancy, dilation_radius)
    return engine.distance(origin, target)
