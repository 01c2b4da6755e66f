"""Synthetic city generator and brute-force verification oracles.

Generates fully margin-consistent datasets (zones, OD flows, grid road
network, land-use rasters, crosswalk) with controllable wage-to-commute
shape, plus slow reference implementations (Floyd-Warshall, exact
rational least squares) used to verify the fast paths.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import geodata
from .geodata import ODMatrix, RasterMask, RoadNetwork, Zone, ZoneSet
from .rng import RandomStream
from .sampling import largest_remainder

WAGE_BIN_MIDPOINTS = [7500.0, 25000.0, 42500.0, 62500.0, 90000.0]


class InfeasibleConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    zones_per_side: int = 5
    zone_size: float = 1.0            # zone edge length, in the configured unit
    nodes_per_zone_side: int = 4      # network grid density
    mask_cells_per_zone_side: int = 4
    commuters: int = 10_000
    job_clustering: float = 0.0       # 1 = all of a zone's jobs in one cell
    wage_shape: str = "none"          # none | monotone | convex
    convex_peak_group: int = 2        # wage quintile where commuting peaks
    seed: int = 1

    def validate(self) -> None:
        if min(self.zones_per_side, self.nodes_per_zone_side,
               self.mask_cells_per_zone_side, self.commuters) <= 0:
            raise InfeasibleConfigError("all size parameters must be positive")
        if self.zone_size <= 0:
            raise InfeasibleConfigError("zone_size must be positive")
        if not 0.0 <= self.job_clustering <= 1.0:
            raise InfeasibleConfigError("job_clustering must be in [0, 1]")
        if self.wage_shape not in ("none", "monotone", "convex"):
            raise InfeasibleConfigError(f"unknown wage_shape {self.wage_shape!r}")
        if not 0 <= self.convex_peak_group <= 4:
            raise InfeasibleConfigError("convex_peak_group must be in 0..4")


@dataclass
class Scenario:
    config: ScenarioConfig
    zones: ZoneSet
    od: ODMatrix
    network: RoadNetwork
    res_mask: RasterMask
    job_mask: RasterMask
    crosswalk: dict[str, str]
    paths: dict[str, str] = field(default_factory=dict)
    # analytic per-zone mean commute proxy from placed flows
    truth_mean_commute: dict[str, float] = field(default_factory=dict)


def _propensity(shape: str, q: float, peak_group: int, u: float) -> float:
    """Fraction of a zone's workers commuting out, in [0.1, 0.9]."""
    if shape == "none":
        return 0.1 + 0.8 * u
    if shape == "monotone":
        return 0.1 + 0.8 * q
    peak = (peak_group + 0.5) / 5.0
    spread = max(peak, 1.0 - peak)
    return 0.1 + 0.8 * (1.0 - abs(q - peak) / spread)


def generate_scenario(config: ScenarioConfig, out_dir=None) -> Scenario:
    """Build a synthetic city whose OD margins are consistent by construction.

    Each zone sends a (1 - s) share of its workers to itself and spreads
    the remaining s uniformly over all other zones, where s follows the
    configured wage-to-commute shape.  Jobs are the column sums, so
    strict margin validation always passes.
    """
    config.validate()
    g = config.zones_per_side
    nz = g * g
    zsize = config.zone_size
    seed = config.seed

    wage_stream = RandomStream(seed, "synth-wage")
    wages = [20_000.0 + 60_000.0 * wage_stream.next_float() for _ in range(nz)]
    prop_stream = RandomStream(seed, "synth-propensity")
    prop_u = [prop_stream.next_float() for _ in range(nz)]
    wage_rank = {idx: r for r, idx in enumerate(
        sorted(range(nz), key=lambda k: (wages[k], k)))}

    r_stream = RandomStream(seed, "synth-workers")
    r_weights = [1.0 + 0.3 * r_stream.next_float() for _ in range(nz)]
    wsum = sum(r_weights)
    workers = largest_remainder(
        [config.commuters * w / wsum for w in r_weights], config.commuters)

    zone_ids = [f"z{k:03d}" for k in range(nz)]
    centroids = {}
    for k in range(nz):
        row, col = divmod(k, g)
        centroids[zone_ids[k]] = ((col + 0.5) * zsize, (row + 0.5) * zsize)

    # flows: (1 - s_i) intrazonal, s_i spread evenly over the other zones
    flows: dict[tuple[str, str], tuple[int, float | None]] = {}
    truth: dict[str, float] = {}
    for k in range(nz):
        zid = zone_ids[k]
        if workers[k] == 0:
            continue
        q = wage_rank[k] / max(nz - 1, 1)
        s = _propensity(config.wage_shape, q, config.convex_peak_group,
                        prop_u[k])
        weights = [(1.0 - s) if j == k else s / max(nz - 1, 1)
                   for j in range(nz)]
        row_counts = largest_remainder(
            [workers[k] * w for w in weights], workers[k])
        dnum = 0.0
        for j, c in enumerate(row_counts):
            if c == 0:
                continue
            ox, oy = centroids[zid]
            dx, dy = centroids[zone_ids[j]]
            dist = abs(dx - ox) + abs(dy - oy)   # grid network ~ Manhattan
            mean_time = 5.0 + 2.0 * dist
            flows[(zid, zone_ids[j])] = (c, mean_time)
            dnum += c * dist
        truth[zid] = dnum / workers[k]

    jobs = [0] * nz
    zone_pos = {zid: k for k, zid in enumerate(zone_ids)}
    for (_, j), (c, _) in flows.items():
        jobs[zone_pos[j]] += c

    # wage-bin counts: smooth mixture centered on the zone's mean wage
    zones = []
    for k in range(nz):
        row, col = divmod(k, g)
        x0, y0 = col * zsize, row * zsize
        ring = [(x0, y0), (x0 + zsize, y0), (x0 + zsize, y0 + zsize),
                (x0, y0 + zsize), (x0, y0)]
        bin_w = [math.exp(-((m - wages[k]) / 20_000.0) ** 2)
                 for m in WAGE_BIN_MIDPOINTS]
        bw = sum(bin_w)
        wage_bins = largest_remainder(
            [workers[k] * w / bw for w in bin_w], workers[k])
        q = wage_rank[k] / max(nz - 1, 1)
        drove = 0.60 + 0.28 * q
        mode_shares = [drove, 0.55 * (1 - drove), 0.15 * (1 - drove),
                       0.30 * (1 - drove)]
        msum = sum(mode_shares)
        mode_counts = largest_remainder(
            [workers[k] * m / msum for m in mode_shares], workers[k])
        zones.append(Zone(zone_id=zone_ids[k], rings=[ring],
                          workers=workers[k], jobs=jobs[k],
                          mean_wage=wages[k],
                          wage_bins=tuple(wage_bins),
                          mode_counts=tuple(mode_counts)))
    zone_set = ZoneSet(zones=tuple(zones), unit="miles",
                       year=f"synth-{seed}")
    od = ODMatrix(flows=flows)

    network = _grid_network(g * config.nodes_per_zone_side,
                            g * zsize / (g * config.nodes_per_zone_side))
    res_mask = _residential_mask(config)
    job_mask = _job_mask(config)
    crosswalk = {zid: zid for zid in zone_ids}

    scenario = Scenario(config=config, zones=zone_set, od=od,
                        network=network, res_mask=res_mask,
                        job_mask=job_mask, crosswalk=crosswalk,
                        truth_mean_commute=truth)
    if out_dir is not None:
        scenario.paths = write_scenario(scenario, out_dir)
    return scenario


def _grid_network(k: int, spacing: float) -> RoadNetwork:
    """k x k lattice with 4-neighbor bidirectional edges."""
    node_rows = []
    for idx in range(k * k):
        row, col = divmod(idx, k)
        node_rows.append((f"n{idx:06d}",
                          (col + 0.5) * spacing, (row + 0.5) * spacing))
    arcs = []
    for idx in range(k * k):
        row, col = divmod(idx, k)
        if col + 1 < k:
            arcs.append((idx, idx + 1, spacing))
            arcs.append((idx + 1, idx, spacing))
        if row + 1 < k:
            arcs.append((idx, idx + k, spacing))
            arcs.append((idx + k, idx, spacing))
    coords = np.array([(x, y) for _, x, y in node_rows])
    return RoadNetwork(node_ids=[nid for nid, _, _ in node_rows],
                       coords=coords, arcs=arcs)


def _residential_mask(config: ScenarioConfig) -> RasterMask:
    """Population-weighted raster: every cell habitable, weights 1-9."""
    g, mu = config.zones_per_side, config.mask_cells_per_zone_side
    side = g * mu
    stream = RandomStream(config.seed, "synth-resmask")
    weights = np.empty((side, side))
    for r in range(side):
        for c in range(side):
            weights[r, c] = 1 + stream.next_below(9)
    return RasterMask(ncols=side, nrows=side, xllcorner=0.0, yllcorner=0.0,
                      cellsize=config.zone_size / mu, nodata_value=-9999.0,
                      weights=weights, nodata=np.zeros((side, side), bool))


def _job_mask(config: ScenarioConfig) -> RasterMask:
    """Binary commercial/industrial raster.

    Per zone the number of positive cells shrinks with the clustering
    factor, down to exactly one cell at clustering 1.
    """
    g, mu = config.zones_per_side, config.mask_cells_per_zone_side
    side = g * mu
    weights = np.zeros((side, side))
    n_pos = max(1, round((1.0 - config.job_clustering) * mu * mu))
    for k in range(g * g):
        zrow, zcol = divmod(k, g)
        cells = [(zrow * mu + r, zcol * mu + c)
                 for r in range(mu) for c in range(mu)]
        RandomStream(config.seed, "synth-jobmask", k).shuffle(cells)
        for r, c in cells[:n_pos]:
            # row 0 of the array is the top raster row
            weights[side - 1 - r, c] = 1.0
    return RasterMask(ncols=side, nrows=side, xllcorner=0.0, yllcorner=0.0,
                      cellsize=config.zone_size / mu, nodata_value=-9999.0,
                      weights=weights, nodata=np.zeros((side, side), bool))


def write_scenario(scenario: Scenario, out_dir) -> dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, fname) for name, fname in [
        ("zones", "zones.geojson"), ("od", "od.csv"),
        ("nodes", "nodes.csv"), ("edges", "edges.csv"),
        ("res_mask", "res_mask.asc"), ("job_mask", "job_mask.asc"),
        ("crosswalk", "crosswalk.csv")]}
    geodata.write_zones(paths["zones"], scenario.zones)
    geodata.write_od(paths["od"], scenario.od)
    net = scenario.network
    node_rows = [(nid, repr(float(net.coords[k, 0])), repr(float(net.coords[k, 1])))
                 for k, nid in enumerate(net.node_ids)]
    seen = set()
    edge_rows = []
    for (u, v, w) in net.arcs:
        key = (min(u, v), max(u, v))
        if key in seen:
            continue
        seen.add(key)
        edge_rows.append((net.node_ids[key[0]], net.node_ids[key[1]],
                          repr(float(w)), 1))
    geodata.write_network(paths["nodes"], paths["edges"], node_rows, edge_rows)
    geodata.write_mask(paths["res_mask"], scenario.res_mask)
    geodata.write_mask(paths["job_mask"], scenario.job_mask)
    geodata.write_crosswalk(paths["crosswalk"], scenario.crosswalk)
    return paths


def oracle_all_pairs(network: RoadNetwork) -> np.ndarray:
    """Floyd-Warshall all-pairs distances; refuses networks > 200 nodes."""
    n = len(network.node_ids)
    if n > 200:
        raise ValueError(f"oracle limited to 200 nodes, got {n}")
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for u, v, w in network.arcs:
        if w < dist[u, v]:
            dist[u, v] = w
    for k in range(n):
        np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :], out=dist)
    return dist


def oracle_ols(columns, y, weights=None) -> list[float]:
    """Exact-rational (weighted) least squares via normal equations.

    Builds X'WX beta = X'Wy over Fractions and solves with full-pivot
    Gaussian elimination; raises on rank deficiency.
    """
    p = len(columns)
    n = len(y)
    if weights is None:
        weights = [1] * n
    cols = [[Fraction(v) for v in col] for col in columns]
    yf = [Fraction(v) for v in y]
    wf = [Fraction(v) for v in weights]
    a = [[sum(wf[i] * cols[r][i] * cols[c][i] for i in range(n))
          for c in range(p)] for r in range(p)]
    b = [sum(wf[i] * cols[r][i] * yf[i] for i in range(n)) for r in range(p)]

    col_perm = list(range(p))
    for step in range(p):
        pr, pc, best = -1, -1, Fraction(0)
        for r in range(step, p):
            for c in range(step, p):
                if abs(a[r][c]) > best:
                    best, pr, pc = abs(a[r][c]), r, c
        if best == 0:
            raise np.linalg.LinAlgError("rank-deficient design")
        a[step], a[pr] = a[pr], a[step]
        b[step], b[pr] = b[pr], b[step]
        for row in a:
            row[step], row[pc] = row[pc], row[step]
        col_perm[step], col_perm[pc] = col_perm[pc], col_perm[step]
        for r in range(step + 1, p):
            factor = a[r][step] / a[step][step]
            for c in range(step, p):
                a[r][c] -= factor * a[step][c]
            b[r] -= factor * b[step]
    x = [Fraction(0)] * p
    for r in range(p - 1, -1, -1):
        acc = b[r] - sum(a[r][c] * x[c] for c in range(r + 1, p))
        x[r] = acc / a[r][r]
    beta = [0.0] * p
    for k in range(p):
        beta[col_perm[k]] = float(x[k])
    return beta
