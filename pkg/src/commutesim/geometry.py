"""Planar polygon predicates used by sampling and metrics.

Polygons are sequences of rings; each ring is a closed list of (x, y)
vertices (first == last).  Containment uses the even-odd (crossing
parity) rule over all rings, so holes and multi-part polygons need no
special casing.
"""

from __future__ import annotations

import numpy as np

Ring = list[tuple[float, float]]


def point_in_rings(x: float, y: float, rings: list[Ring]) -> bool:
    """Even-odd point-in-polygon test over all rings."""
    inside = False
    for ring in rings:
        n = len(ring)
        x1, y1 = ring[0]
        for k in range(1, n):
            x2, y2 = ring[k]
            if (y1 > y) != (y2 > y):
                xcross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                if x < xcross:
                    inside = not inside
            x1, y1 = x2, y2
    return inside


def points_in_rings(xs: np.ndarray, ys: np.ndarray, rings: list[Ring]) -> np.ndarray:
    """Vectorized even-odd containment for many points at once."""
    inside = np.zeros(len(xs), dtype=bool)
    for ring in rings:
        v = np.asarray(ring, dtype=float)
        x1, y1 = v[:-1, 0], v[:-1, 1]
        x2, y2 = v[1:, 0], v[1:, 1]
        for ex1, ey1, ex2, ey2 in zip(x1, y1, x2, y2):
            if ey1 == ey2:
                continue
            crosses = (ey1 > ys) != (ey2 > ys)
            if not crosses.any():
                continue
            xcross = ex1 + (ys[crosses] - ey1) * (ex2 - ex1) / (ey2 - ey1)
            hits = np.zeros(len(xs), dtype=bool)
            hits[crosses] = xs[crosses] < xcross
            inside ^= hits
    return inside


def ring_area_centroid(ring: Ring) -> tuple[float, float, float]:
    """Signed shoelace area and centroid of one ring."""
    a = 0.0
    cx = 0.0
    cy = 0.0
    x1, y1 = ring[0]
    for k in range(1, len(ring)):
        x2, y2 = ring[k]
        cross = x1 * y2 - x2 * y1
        a += cross
        cx += (x1 + x2) * cross
        cy += (y1 + y2) * cross
        x1, y1 = x2, y2
    a *= 0.5
    if a == 0.0:
        return 0.0, 0.0, 0.0
    return a, cx / (6.0 * a), cy / (6.0 * a)


def polygon_centroid(rings: list[Ring]) -> tuple[float, float]:
    """Area-weighted centroid over all rings.

    Holes must be wound opposite to their shell (GeoJSON convention);
    degenerate zero-area input falls back to the vertex mean.
    """
    total = 0.0
    cx = 0.0
    cy = 0.0
    for ring in rings:
        a, rx, ry = ring_area_centroid(ring)
        total += a
        cx += a * rx
        cy += a * ry
    if abs(total) < 1e-30:
        pts = [p for ring in rings for p in ring[:-1]]
        return (sum(p[0] for p in pts) / len(pts),
                sum(p[1] for p in pts) / len(pts))
    return cx / total, cy / total


def rings_bbox(rings: list[Ring]) -> tuple[float, float, float, float]:
    xs = [p[0] for ring in rings for p in ring]
    ys = [p[1] for ring in rings for p in ring]
    return min(xs), min(ys), max(xs), max(ys)
