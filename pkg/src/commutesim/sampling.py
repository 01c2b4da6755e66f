"""Trip-count apportionment and constrained spatial point sampling.

Trips are apportioned to OD pairs by largest-remainder rounding of the
quotas n*x_ij/N, then origin/destination points are drawn inside each
zone's land-use support (raster cells with positive weight whose center
falls inside the zone polygon).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .geodata import ODMatrix, RasterMask, Zone
from .geometry import points_in_rings
from .rng import RandomStream


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class TripCountMatrix:
    counts: dict[tuple[str, str], int]     # only positive entries
    n: int

    def row_sums(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for (i, _), t in self.counts.items():
            out[i] = out.get(i, 0) + t
        return out

    def col_sums(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for (_, j), t in self.counts.items():
            out[j] = out.get(j, 0) + t
        return out


@dataclass(frozen=True)
class SpatialSupport:
    zone_id: str
    x0: np.ndarray          # cell lower-left corners
    y0: np.ndarray
    width: np.ndarray
    height: np.ndarray
    weights: np.ndarray
    cum_weights: np.ndarray  # strictly increasing prefix sums
    fallback: bool = False

    def __len__(self) -> int:
        return len(self.weights)


def largest_remainder(quotas, total: int, order=None) -> list[int]:
    """Round nonnegative quotas to integers summing exactly to `total`.

    Floors every quota, then hands the remaining units to the largest
    fractional parts; ties go to the lowest position in `order` (or
    input order).
    """
    floors = [math.floor(q) for q in quotas]
    remaining = total - sum(floors)
    if remaining < 0:
        raise SamplingError("quotas exceed total after flooring")
    if order is None:
        order = range(len(floors))
    ranked = sorted(range(len(floors)),
                    key=lambda k: (-(quotas[k] - floors[k]), order[k]))
    for k in ranked[:remaining]:
        floors[k] += 1
    return floors


def apportion_trip_counts(od: ODMatrix, n: int) -> TripCountMatrix:
    """Distribute n simulated trips over OD pairs proportionally to flows.

    Quotas are n*x_ij/N; rounding is largest-remainder with ties broken
    by (origin_id, dest_id) ascending, so when n == N the counts equal
    the observed flows exactly.
    """
    if n <= 0:
        raise SamplingError(f"n must be positive, got {n}")
    if not od.flows:
        raise SamplingError("empty OD matrix")
    total = od.total
    pairs = sorted(k for k, (c, _) in od.flows.items() if c > 0)
    quotas = [n * od.flows[k][0] / total for k in pairs]
    rounded = largest_remainder(quotas, n)
    counts = {pair: t for pair, t in zip(pairs, rounded) if t > 0}
    return TripCountMatrix(counts=counts, n=n)


def _grid_support(zone: Zone, x0s, y0s, widths, heights, weights, fallback):
    keep = weights > 0
    x0s, y0s = x0s[keep], y0s[keep]
    widths, heights, weights = widths[keep], heights[keep], weights[keep]
    cum = np.cumsum(weights)
    return SpatialSupport(zone_id=zone.zone_id, x0=x0s, y0=y0s,
                          width=widths, height=heights, weights=weights,
                          cum_weights=cum, fallback=fallback)


def build_support(zone: Zone, mask: RasterMask,
                  fallback_cellsize: float = 0.0) -> SpatialSupport:
    """Collect positive-weight mask cells whose center lies in the zone.

    If none qualify and fallback_cellsize > 0, the support degrades to a
    uniform grid of that cell size over the zone (the unconstrained
    whole-zone variant), with the fallback flag set.
    """
    xmin, ymin, xmax, ymax = zone.bbox
    cs = mask.cellsize
    # restrict the scan to cells overlapping the zone bbox
    c_lo = max(0, int(math.floor((xmin - mask.xllcorner) / cs)))
    c_hi = min(mask.ncols, int(math.ceil((xmax - mask.xllcorner) / cs)))
    r_lo = max(0, int(math.floor((ymin - mask.yllcorner) / cs)))
    r_hi = min(mask.nrows, int(math.ceil((ymax - mask.yllcorner) / cs)))

    if c_hi > c_lo and r_hi > r_lo:
        cols = np.arange(c_lo, c_hi)
        rows = np.arange(r_lo, r_hi)
        cc, rr = np.meshgrid(cols, rows)
        cc, rr = cc.ravel(), rr.ravel()
        cx = mask.xllcorner + (cc + 0.5) * cs
        cy = mask.yllcorner + (rr + 0.5) * cs
        # weights grid row 0 is the top row
        w = mask.weights[mask.nrows - 1 - rr, cc]
        candidate = w > 0
        inside = np.zeros(len(cc), dtype=bool)
        if candidate.any():
            inside[candidate] = points_in_rings(cx[candidate], cy[candidate],
                                                zone.rings)
        if inside.any():
            size = np.full(inside.sum(), cs, dtype=float)
            return _grid_support(zone, cx[inside] - 0.5 * cs,
                                 cy[inside] - 0.5 * cs,
                                 size, size.copy(), w[inside], fallback=False)

    if fallback_cellsize <= 0:
        raise SamplingError(
            f"zone {zone.zone_id}: no positive mask cell inside the zone "
            "and whole-zone fallback is disabled")
    fs = fallback_cellsize
    cols = np.arange(int(math.floor((xmax - xmin) / fs)) + 1)
    rows = np.arange(int(math.floor((ymax - ymin) / fs)) + 1)
    cc, rr = np.meshgrid(cols, rows)
    cx = xmin + (cc.ravel() + 0.5) * fs
    cy = ymin + (rr.ravel() + 0.5) * fs
    inside = points_in_rings(cx, cy, zone.rings)
    if not inside.any():
        # degenerate sliver: fall back to a single bbox-sized cell
        return _grid_support(zone, np.array([xmin]), np.array([ymin]),
                             np.array([xmax - xmin or fs]),
                             np.array([ymax - ymin or fs]),
                             np.array([1.0]), fallback=True)
    size = np.full(int(inside.sum()), fs, dtype=float)
    return _grid_support(zone, cx[inside] - 0.5 * fs, cy[inside] - 0.5 * fs,
                         size, size.copy(), np.ones(int(inside.sum())),
                         fallback=True)


def sample_points(support: SpatialSupport, count: int,
                  stream: RandomStream) -> list[tuple[float, float]]:
    """Draw `count` points, each uniform within a weight-chosen cell.

    Per point: one uniform selects the cell by binary search over the
    cumulative weights, two more place the point in the cell's box.
    """
    if count == 0:
        return []
    if len(support) == 0:
        raise SamplingError(f"zone {support.zone_id}: empty support")
    cum = support.cum_weights.tolist()
    total = cum[-1]
    x0, y0 = support.x0.tolist(), support.y0.tolist()
    w, h = support.width.tolist(), support.height.tolist()
    points = []
    for _ in range(count):
        cell = bisect_right(cum, stream.next_float() * total)
        if cell >= len(cum):           # guard against fp edge at u -> 1
            cell = len(cum) - 1
        points.append((x0[cell] + stream.next_float() * w[cell],
                       y0[cell] + stream.next_float() * h[cell]))
    return points
