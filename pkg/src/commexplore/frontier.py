"""Wavefront frontier detection and goal selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .gridworld import FREE, UNKNOWN, Cell, Pose, cell_center
from .pathing import GraphField

MIN_FRONTIER_DISTANCE_M = 0.5
MAX_CANDIDATES = 5
INITIAL_SEARCH_RADIUS_M = 10.0

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class FrontierCandidate:
    cell: Cell
    pose: Pose
    distance_m: float
    cluster_size: int


def unknown_adjacent(belief: np.ndarray) -> np.ndarray:
    """Cells with at least one 8-neighbour that is Unknown."""
    return ndimage.binary_dilation(belief == UNKNOWN, structure=_EIGHT)


def frontier_mask(belief: np.ndarray, field: GraphField) -> np.ndarray:
    """Free, Unknown-adjacent cells reached by the wave from the robot."""
    return (belief == FREE) & unknown_adjacent(belief) & np.isfinite(field.distance)


def _cluster_representatives(mask: np.ndarray) -> list[tuple[Cell, int]]:
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return []
    rows, cols = np.nonzero(labels)
    lab = labels[rows, cols]
    counts = np.bincount(lab, minlength=n + 1)
    cr = np.bincount(lab, weights=rows, minlength=n + 1) / np.maximum(counts, 1)
    cc = np.bincount(lab, weights=cols, minlength=n + 1) / np.maximum(counts, 1)
    d2 = (rows - cr[lab]) ** 2 + (cols - cc[lab]) ** 2
    order = np.lexsort((cols, rows, d2, lab))
    first = np.ones(order.size, dtype=bool)
    first[1:] = lab[order][1:] != lab[order][:-1]
    picks = order[first]
    return [((int(rows[k]), int(cols[k])), int(counts[lab[k]])) for k in picks]


def detect_frontiers(
    belief: np.ndarray,
    robot: Pose,
    resolution: float,
    search_radius_m: float = INITIAL_SEARCH_RADIUS_M,
    max_candidates: int = MAX_CANDIDATES,
    min_distance_m: float = MIN_FRONTIER_DISTANCE_M,
    field: GraphField | None = None,
) -> list[FrontierCandidate]:
    """Up to ``max_candidates`` nearest frontier clusters, sorted by path distance.

    An empty list means nothing is left to explore.  The search radius
    doubles while no candidate survives the distance filters; once it covers
    the whole map the last pass is made without an upper bound.
    """
    cell = robot.cell(resolution)
    if belief[cell] != FREE:
        raise ValueError("robot cell must be Free in the belief")
    if field is None:
        field = GraphField(belief == FREE, cell, resolution)
    reps = _cluster_representatives(frontier_mask(belief, field))
    if not reps:
        return []
    dist = field.distance
    scored = [(float(dist[c]), c, size) for c, size in reps]

    map_extent = math.hypot(*belief.shape) * resolution * 2.0
    radius = search_radius_m
    while True:
        kept = [s for s in scored if min_distance_m <= s[0] <= radius]
        if kept or math.isinf(radius):
            break
        radius = radius * 2.0 if radius * 2.0 < map_extent else math.inf
    kept.sort(key=lambda s: (s[0], s[1][0], s[1][1]))
    return [FrontierCandidate(c, cell_center(c, resolution), d, size) for d, c, size in kept[:max_candidates]]


def select_frontier(candidates: list[FrontierCandidate]) -> FrontierCandidate | None:
    return candidates[0] if candidates else None
