"""Shortest paths on the 8-connected grid for robot motion and radio propagation.

Steps cost 1 (cardinal) or sqrt(2) (diagonal) cells; a diagonal step needs
both cardinal cells it skirts to be passable, so nothing slips through a
diagonal wall joint.  Lengths are reported in meters as
``(n_cardinal + n_diagonal * sqrt(2)) * resolution``, which makes the length of
an optimal path independent of the search that found it.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .gridworld import FREE, Cell, OccupancyGrid, Pose

SQRT2 = math.sqrt(2.0)

# (dr, dc, diagonal)
MOVES = (
    (-1, 0, False), (1, 0, False), (0, -1, False), (0, 1, False),
    (-1, -1, True), (-1, 1, True), (1, -1, True), (1, 1, True),
)


class Mask(str, Enum):
    TRAVERSAL = "traversal"
    SIGNAL = "signal"


def passability(grid: OccupancyGrid, mode: Mask | str) -> np.ndarray:
    mode = Mask(mode)
    return grid.traversable if mode is Mask.TRAVERSAL else grid.rf_transparent


def belief_passable(belief: np.ndarray) -> np.ndarray:
    """Cells the Scout knows to be free; planning never leaves known space."""
    return belief == FREE


@dataclass(frozen=True)
class PathResult:
    cells: tuple[Cell, ...]
    length_m: float
    n_cardinal: int
    n_diagonal: int


def octile(a: Cell, b: Cell) -> float:
    dr, dc = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dr, dc) + (SQRT2 - 1.0) * min(dr, dc)


def astar_cells(mask: np.ndarray, start: Cell, goal: Cell, resolution: float) -> PathResult | None:
    """A* with the octile heuristic.  Returns None when ``goal`` is unreachable."""
    H, W = mask.shape
    if not (0 <= start[0] < H and 0 <= start[1] < W) or not mask[start]:
        raise ValueError(f"start cell {start} is not passable")
    if not (0 <= goal[0] < H and 0 <= goal[1] < W):
        raise ValueError(f"goal cell {goal} out of bounds")
    if not mask[goal]:
        return None

    flat = mask.ravel().tolist()
    s = start[0] * W + start[1]
    t = goal[0] * W + goal[1]
    gr, gc = goal
    best = {s: 0.0}
    counts = {s: (0, 0)}
    parent = {s: -1}
    closed = set()
    heap = [(octile(start, goal), 0.0, s)]
    while heap:
        _, g_u, u = heapq.heappop(heap)
        if u in closed:
            continue
        if u == t:
            break
        closed.add(u)
        ur, uc = divmod(u, W)
        a, b = counts[u]
        for dr, dc, diag in MOVES:
            vr, vc = ur + dr, uc + dc
            if vr < 0 or vr >= H or vc < 0 or vc >= W:
                continue
            v = vr * W + vc
            if not flat[v] or v in closed:
                continue
            if diag:
                if not (flat[ur * W + vc] and flat[vr * W + uc]):
                    continue
                na, nb = a, b + 1
            else:
                na, nb = a + 1, b
            g_v = na + nb * SQRT2
            if g_v < best.get(v, math.inf):
                best[v] = g_v
                counts[v] = (na, nb)
                parent[v] = u
                ddr, ddc = abs(vr - gr), abs(vc - gc)
                h = max(ddr, ddc) + (SQRT2 - 1.0) * min(ddr, ddc)
                heapq.heappush(heap, (g_v + h, g_v, v))
    if t not in best:
        return None
    cells = []
    u = t
    while u != -1:
        cells.append(divmod(u, W))
        u = parent[u]
    cells.reverse()
    na, nb = counts[t]
    return PathResult(tuple(cells), (na + nb * SQRT2) * resolution, na, nb)


def astar(grid: OccupancyGrid, mode: Mask | str, start: Pose, goal: Pose) -> PathResult | None:
    """Shortest path between the cells containing two poses under a passability mask."""
    res = grid.resolution
    return astar_cells(passability(grid, mode), start.cell(res), goal.cell(res), res)


def signal_path_distance(grid: OccupancyGrid, a: Pose, b: Pose) -> float:
    """Length in meters of the shortest rf-transparent path, ``inf`` if none exists."""
    res = grid.resolution
    ca, cb = a.cell(res), b.cell(res)
    if not grid.in_bounds(ca) or not grid.in_bounds(cb):
        raise ValueError("poses must be in bounds")
    mask = grid.rf_transparent
    if not mask[ca] or not mask[cb]:
        return math.inf
    path = astar_cells(mask, ca, cb, res)
    return math.inf if path is None else path.length_m


def distance_field(mask: np.ndarray, source: Cell, resolution: float) -> np.ndarray:
    """Exact single-source shortest path lengths (meters) to every cell; ``inf`` if unreachable.

    Uses the same canonical length as :func:`astar_cells`, so both agree bit
    for bit on optimal lengths.
    """
    H, W = mask.shape
    out = np.full(mask.shape, math.inf)
    if not mask[source]:
        return out
    flat = mask.ravel().tolist()
    s = source[0] * W + source[1]
    best = {s: 0.0}
    counts = {s: (0, 0)}
    done = {}
    heap = [(0.0, s)]
    while heap:
        g_u, u = heapq.heappop(heap)
        if u in done:
            continue
        done[u] = g_u
        ur, uc = divmod(u, W)
        a, b = counts[u]
        for dr, dc, diag in MOVES:
            vr, vc = ur + dr, uc + dc
            if vr < 0 or vr >= H or vc < 0 or vc >= W:
                continue
            v = vr * W + vc
            if not flat[v] or v in done:
                continue
            if diag:
                if not (flat[ur * W + vc] and flat[vr * W + uc]):
                    continue
                na, nb = a, b + 1
            else:
                na, nb = a + 1, b
            g_v = na + nb * SQRT2
            if g_v < best.get(v, math.inf):
                best[v] = g_v
                counts[v] = (na, nb)
                heapq.heappush(heap, (g_v, v))
    idx = np.fromiter(done.keys(), dtype=np.int64, count=len(done))
    ab = np.array([counts[u] for u in done], dtype=np.float64).reshape(-1, 2)
    out.ravel()[idx] = (ab[:, 0] + ab[:, 1] * SQRT2) * resolution
    return out


class GraphField:
    """Sparse-graph shortest paths from one source, for many-target queries.

    Backed by ``scipy.sparse.csgraph``; lengths agree with :func:`astar_cells`
    up to floating-point summation order.
    """

    def __init__(self, mask: np.ndarray, source: Cell, resolution: float):
        H, W = mask.shape
        if not mask[source]:
            raise ValueError(f"source cell {source} is not passable")
        self.shape = mask.shape
        self.resolution = resolution
        self.source = source
        flat = mask.ravel()
        nodes = np.flatnonzero(flat)
        index = np.full(H * W, -1, dtype=np.int64)
        index[nodes] = np.arange(nodes.size)
        r, c = np.divmod(nodes, W)

        def passable(dr, dc):
            rr, cc = r + dr, c + dc
            ok = (rr >= 0) & (rr < H) & (cc >= 0) & (cc < W)
            ok[ok] = flat[rr[ok] * W + cc[ok]]
            return ok

        src, dst, wts = [], [], []
        east, south, west = passable(0, 1), passable(1, 0), passable(0, -1)
        # E, S, SE, SW edges; the graph is undirected
        for ok, off, w in (
            (east, 1, 1.0),
            (south, W, 1.0),
            (passable(1, 1) & east & south, W + 1, SQRT2),
            (passable(1, -1) & west & south, W - 1, SQRT2),
        ):
            k = np.flatnonzero(ok)
            src.append(k)
            dst.append(index[nodes[k] + off])
            wts.append(np.full(k.size, w * resolution))
        graph = sparse.csr_matrix(
            (np.concatenate(wts), (np.concatenate(src), np.concatenate(dst))), shape=(nodes.size, nodes.size)
        )
        dist, pred = csgraph.dijkstra(
            graph, directed=False, indices=index[source[0] * W + source[1]], return_predecessors=True
        )
        distance = np.full(H * W, math.inf)
        distance[nodes] = dist
        self.distance = distance.reshape(mask.shape)
        self._nodes = nodes
        self._index = index
        self._pred = pred

    def path_to(self, cell: Cell) -> list[Cell] | None:
        W = self.shape[1]
        k = self._index[cell[0] * W + cell[1]]
        if k < 0 or not np.isfinite(self.distance[cell]):
            return None
        out = []
        while k >= 0:
            out.append(divmod(int(self._nodes[k]), W))
            k = self._pred[k]
        out.reverse()
        return out
