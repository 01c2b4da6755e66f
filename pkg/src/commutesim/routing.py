"""Network distance measurement: snapping, batched Dijkstra, trip lengths.

The heavy path is measure_trips: trips are grouped by snapped origin
node and a single early-terminated Dijkstra serves every trip sharing
that node.  The kernels are numba-compiled; results are independent of
batching and scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geodata import RoadNetwork
from .trips import Trip, TripSet

UNREACHABLE = math.inf


@dataclass
class RoutingStats:
    dijkstra_runs: int = 0
    settled_nodes: int = 0
    unreachable_trips: int = 0


@dataclass(frozen=True)
class SnapResult:
    node_id: str
    snap_distance: float


@njit(cache=True)
def _dijkstra_kernel(indptr, indices, weights, source, target_mask, n_targets):
    """Binary-heap Dijkstra from `source`, stopping once all targets settle.

    Returns (distance array, settled-node count); unreachable nodes keep
    distance inf.  n_targets == 0 means run to completion.
    """
    n = indptr.shape[0] - 1
    dist = np.full(n, np.inf)
    settled = np.zeros(n, np.bool_)
    cap = indices.shape[0] + n + 1
    heap_d = np.empty(cap, np.float64)
    heap_v = np.empty(cap, np.int64)
    heap_d[0] = 0.0
    heap_v[0] = source
    size = 1
    dist[source] = 0.0
    remaining = n_targets
    settled_count = 0
    while size > 0:
        d = heap_d[0]
        v = heap_v[0]
        size -= 1
        heap_d[0] = heap_d[size]
        heap_v[0] = heap_v[size]
        k = 0
        while True:
            left = 2 * k + 1
            right = left + 1
            smallest = k
            if left < size and heap_d[left] < heap_d[smallest]:
                smallest = left
            if right < size and heap_d[right] < heap_d[smallest]:
                smallest = right
            if smallest == k:
                break
            heap_d[k], heap_d[smallest] = heap_d[smallest], heap_d[k]
            heap_v[k], heap_v[smallest] = heap_v[smallest], heap_v[k]
            k = smallest
        if settled[v]:
            continue
        settled[v] = True
        settled_count += 1
        if n_targets > 0 and target_mask[v]:
            remaining -= 1
            if remaining == 0:
                break
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            if settled[u]:
                continue
            nd = d + weights[e]
            if nd < dist[u]:
                dist[u] = nd
                heap_d[size] = nd
                heap_v[size] = u
                k = size
                size += 1
                while k > 0:
                    parent = (k - 1) >> 1
                    if heap_d[parent] <= heap_d[k]:
                        break
                    heap_d[k], heap_d[parent] = heap_d[parent], heap_d[k]
                    heap_v[k], heap_v[parent] = heap_v[parent], heap_v[k]
                    k = parent
    return dist, settled_count


@njit(cache=True)
def _snap_kernel(px, py, nx_arr, ny_arr, cell_start, cell_nodes,
                 gnx, gny, gx0, gy0, gcs):
    """Nearest node per point via a uniform grid with expanding ring scan.

    Ties on squared distance go to the lower node index (node ids are
    stored ascending, so this is node_id-ascending tie-breaking).
    """
    m = px.shape[0]
    out_idx = np.empty(m, np.int64)
    out_d = np.empty(m, np.float64)
    for p in range(m):
        x = px[p]
        y = py[p]
        cx = int(math.floor((x - gx0) / gcs))
        cy = int(math.floor((y - gy0) / gcs))
        ccx = min(max(cx, 0), gnx - 1)
        ccy = min(max(cy, 0), gny - 1)
        # distance from the point to its clamped home cell (0 if inside grid)
        hx0 = gx0 + ccx * gcs
        hy0 = gy0 + ccy * gcs
        dxc = max(hx0 - x, 0.0, x - (hx0 + gcs))
        dyc = max(hy0 - y, 0.0, y - (hy0 + gcs))
        d_clamp = math.sqrt(dxc * dxc + dyc * dyc)
        best = -1
        best_d2 = np.inf
        r = 0
        max_r = gnx + gny
        while r <= max_r:
            lo_bound = (r - 1) * gcs - d_clamp
            if best >= 0 and lo_bound > 0.0 and lo_bound * lo_bound >= best_d2:
                break
            for ci in range(ccx - r, ccx + r + 1):
                if ci < 0 or ci >= gnx:
                    continue
                on_edge_x = ci == ccx - r or ci == ccx + r
                for cj in range(ccy - r, ccy + r + 1):
                    if cj < 0 or cj >= gny:
                        continue
                    if not on_edge_x and cj != ccy - r and cj != ccy + r:
                        continue
                    cell = cj * gnx + ci
                    for s in range(cell_start[cell], cell_start[cell + 1]):
                        node = cell_nodes[s]
                        dx = nx_arr[node] - x
                        dy = ny_arr[node] - y
                        d2 = dx * dx + dy * dy
                        if d2 < best_d2 or (d2 == best_d2 and node < best):
                            best_d2 = d2
                            best = node
            r += 1
        out_idx[p] = best
        out_d[p] = math.sqrt(best_d2)
    return out_idx, out_d


class RoutingEngine:
    """CSR adjacency + spatial grid index over an immutable RoadNetwork."""

    def __init__(self, network: RoadNetwork):
        self.network = network
        n = len(network.node_ids)
        if n == 0:
            raise ValueError("network has no nodes")
        arcs = sorted(network.arcs)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        self.indices = np.empty(len(arcs), dtype=np.int64)
        self.arc_weights = np.empty(len(arcs), dtype=np.float64)
        for k, (u, v, w) in enumerate(arcs):
            self.indptr[u + 1] += 1
            self.indices[k] = v
            self.arc_weights[k] = w
        np.cumsum(self.indptr, out=self.indptr)

        xs = network.coords[:, 0]
        ys = network.coords[:, 1]
        extent = max(xs.max() - xs.min(), ys.max() - ys.min(), 0.0)
        self.gcs = max(extent / max(math.sqrt(n), 1.0), 1e-12) or 1.0
        self.gx0, self.gy0 = float(xs.min()), float(ys.min())
        self.gnx = max(int(math.floor((xs.max() - self.gx0) / self.gcs)) + 1, 1)
        self.gny = max(int(math.floor((ys.max() - self.gy0) / self.gcs)) + 1, 1)
        cell_x = np.minimum(((xs - self.gx0) / self.gcs).astype(np.int64), self.gnx - 1)
        cell_y = np.minimum(((ys - self.gy0) / self.gcs).astype(np.int64), self.gny - 1)
        cell_id = cell_y * self.gnx + cell_x
        order = np.argsort(cell_id, kind="stable")
        self.cell_nodes = order.astype(np.int64)
        counts = np.bincount(cell_id, minlength=self.gnx * self.gny)
        self.cell_start = np.zeros(self.gnx * self.gny + 1, dtype=np.int64)
        np.cumsum(counts, out=self.cell_start[1:])
        self.stats = RoutingStats()

    def snap_many(self, px: np.ndarray, py: np.ndarray):
        return _snap_kernel(
            np.ascontiguousarray(px, dtype=np.float64),
            np.ascontiguousarray(py, dtype=np.float64),
            np.ascontiguousarray(self.network.coords[:, 0]),
            np.ascontiguousarray(self.network.coords[:, 1]),
            self.cell_start, self.cell_nodes,
            self.gnx, self.gny, self.gx0, self.gy0, self.gcs)

    def snap(self, point) -> SnapResult:
        idx, d = self.snap_many(np.array([point[0]]), np.array([point[1]]))
        return SnapResult(node_id=self.network.node_ids[int(idx[0])],
                          snap_distance=float(d[0]))

    def distances_from(self, source_index: int,
                       target_indices=None) -> np.ndarray:
        """One Dijkstra run; early-terminates when all targets settle."""
        n = len(self.network.node_ids)
        mask = np.zeros(n, dtype=np.bool_)
        n_targets = 0
        if target_indices is not None:
            for t in target_indices:
                if not mask[t]:
                    mask[t] = True
                    n_targets += 1
        dist, settled = _dijkstra_kernel(self.indptr, self.indices,
                                         self.arc_weights, source_index,
                                         mask, n_targets)
        self.stats.dijkstra_runs += 1
        self.stats.settled_nodes += int(settled)
        return dist


def snap(point, network: RoadNetwork) -> SnapResult:
    """Nearest network node to a point (Euclidean, id-ascending ties)."""
    return RoutingEngine(network).snap(point)


def shortest_distances(network: RoadNetwork, source: str,
                       targets) -> dict[str, float]:
    """Exact shortest-path lengths from source to each target node.

    Unreachable targets map to math.inf.
    """
    engine = RoutingEngine(network)
    index = network.node_index
    target_idx = [index[t] for t in targets]
    dist = engine.distances_from(index[source], target_idx)
    return {t: float(dist[index[t]]) for t in targets}


def measure_trips(tripset: TripSet, network: RoadNetwork,
                  snap_legs: bool = True,
                  engine: RoutingEngine | None = None
                  ) -> tuple[TripSet, RoutingStats]:
    """Attach network distances to every trip.

    Trips sharing a snapped origin node share one Dijkstra run.  An
    unreachable pair falls back to the straight-line distance between
    the two endpoints and is flagged (never dropped: dropping would
    bias zone means).
    """
    if engine is None:
        engine = RoutingEngine(network)
    trips = tripset.trips
    m = len(trips)
    ox = np.fromiter((t.origin[0] for t in trips), dtype=float, count=m)
    oy = np.fromiter((t.origin[1] for t in trips), dtype=float, count=m)
    dx = np.fromiter((t.dest[0] for t in trips), dtype=float, count=m)
    dy = np.fromiter((t.dest[1] for t in trips), dtype=float, count=m)
    onode, osnap = engine.snap_many(ox, oy)
    dnode, dsnap = engine.snap_many(dx, dy)

    by_source: dict[int, list[int]] = {}
    for k in range(m):
        by_source.setdefault(int(onode[k]), []).append(k)

    stats = RoutingStats()
    measured = []
    distance = np.empty(m, dtype=float)
    unreachable = np.zeros(m, dtype=bool)
    runs_before = engine.stats.dijkstra_runs
    settled_before = engine.stats.settled_nodes
    for src in sorted(by_source):
        members = by_source[src]
        dist = engine.distances_from(src, [int(dnode[k]) for k in members])
        for k in members:
            d_net = dist[int(dnode[k])]
            if math.isinf(d_net):
                distance[k] = math.hypot(dx[k] - ox[k], dy[k] - oy[k])
                unreachable[k] = True
                stats.unreachable_trips += 1
            else:
                distance[k] = d_net
                if snap_legs:
                    distance[k] += osnap[k] + dsnap[k]
    stats.dijkstra_runs = engine.stats.dijkstra_runs - runs_before
    stats.settled_nodes = engine.stats.settled_nodes - settled_before

    for k, t in enumerate(trips):
        measured.append(Trip(trip_id=t.trip_id, origin_zone=t.origin_zone,
                             dest_zone=t.dest_zone, origin=t.origin,
                             dest=t.dest, distance=float(distance[k]),
                             unreachable=bool(unreachable[k])))
    out = TripSet(trips=measured, master_seed=tripset.master_seed,
                  n=tripset.n, N=tripset.N, snap_legs=snap_legs,
                  provenance=dict(tripset.provenance))
    return out, stats
