"""Per-zone commute metrics: mean distance, mean time, centroid baseline.

Zone means are flow-weighted averages over the zone's outgoing trips or
flows.  Zones with nothing to average report None rather than 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .geodata import MODE_LABELS, ODMatrix, RoadNetwork, ZoneSet
from .routing import RoutingEngine
from .trips import TripSet


@dataclass
class ZoneMetrics:
    zone_id: str
    mean_distance: float | None = None
    mean_time: float | None = None
    trips_counted: int = 0
    baseline_distance: float | None = None
    time_coverage_pct: float | None = None


def mean_commute_time(od: ODMatrix, zones: ZoneSet,
                      strict_workers_denominator: bool = False
                      ) -> dict[str, ZoneMetrics]:
    """Flow-weighted mean reported commute time per origin zone.

    The denominator is the flow actually carrying a time value (lenient
    default); strict mode divides by the zone's declared worker count
    instead, which silently deflates means when flows are incomplete.
    """
    num: dict[str, float] = {}
    timed_flow: dict[str, int] = {}
    all_flow: dict[str, int] = {}
    for (i, _), (c, t) in od.flows.items():
        all_flow[i] = all_flow.get(i, 0) + c
        if t is not None and c > 0:
            num[i] = num.get(i, 0.0) + c * t
            timed_flow[i] = timed_flow.get(i, 0) + c
    out = {}
    for z in zones:
        zid = z.zone_id
        flow = all_flow.get(zid, 0)
        tflow = timed_flow.get(zid, 0)
        denom = z.workers if strict_workers_denominator else tflow
        mean = num.get(zid, 0.0) / denom if tflow > 0 and denom > 0 else None
        coverage = 100.0 * tflow / flow if flow > 0 else None
        out[zid] = ZoneMetrics(zone_id=zid, mean_time=mean,
                               time_coverage_pct=coverage)
    return out


def mean_commute_distance(trips: TripSet, zones: ZoneSet) -> dict[str, ZoneMetrics]:
    """Mean measured trip distance per origin zone (simulated metric)."""
    num: dict[str, float] = {}
    cnt: dict[str, int] = {}
    for t in trips.trips:
        if t.distance is None:
            raise ValueError(f"trip {t.trip_id} has no measured distance")
        num[t.origin_zone] = num.get(t.origin_zone, 0.0) + t.distance
        cnt[t.origin_zone] = cnt.get(t.origin_zone, 0) + 1
    out = {}
    for z in zones:
        zid = z.zone_id
        c = cnt.get(zid, 0)
        out[zid] = ZoneMetrics(zone_id=zid,
                               mean_distance=num[zid] / c if c else None,
                               trips_counted=c)
    return out


def centroid_baseline(zones: ZoneSet, od: ODMatrix, network: RoadNetwork,
                      engine: RoutingEngine | None = None) -> dict[str, float | None]:
    """Flow-weighted mean centroid-to-centroid network distance per zone.

    Intrazonal pairs contribute 0 by construction (both endpoints snap
    to the same node), which is exactly the aggregation artifact the
    simulated metric avoids.
    """
    if engine is None:
        engine = RoutingEngine(network)
    ids = zones.ids
    cx = [zones[z].centroid[0] for z in ids]
    cy = [zones[z].centroid[1] for z in ids]
    import numpy as np
    node_of, _ = engine.snap_many(np.array(cx), np.array(cy))
    node_of_zone = {zid: int(node_of[k]) for k, zid in enumerate(ids)}

    dests_by_origin: dict[str, list[str]] = {}
    for (i, j), (c, _) in od.flows.items():
        if c > 0:
            dests_by_origin.setdefault(i, []).append(j)

    out: dict[str, float | None] = {}
    for zid in ids:
        dests = dests_by_origin.get(zid)
        if not dests:
            out[zid] = None
            continue
        dist = engine.distances_from(node_of_zone[zid],
                                     [node_of_zone[j] for j in dests])
        num = 0.0
        flow = 0
        for j in dests:
            c = od.flows[(zid, j)][0]
            d = dist[node_of_zone[j]]
            if math.isinf(d):
                continue
            num += c * float(d)
            flow += c
        out[zid] = num / flow if flow > 0 else None
    return out


def modal_split(zones: ZoneSet, grouping: dict[str, str]) -> dict[str, dict[str, float]]:
    """Percent of commuters by mode per zone group, plus an 'All' row.

    Zones with all-zero mode counts are excluded from the denominators.
    """
    totals: dict[str, list[int]] = {}
    for z in zones:
        if sum(z.mode_counts) == 0:
            continue
        for label in (grouping.get(z.zone_id), "All"):
            if label is None:
                continue
            row = totals.setdefault(label, [0, 0, 0, 0])
            for k in range(4):
                row[k] += z.mode_counts[k]
    table = {}
    for label, row in totals.items():
        denom = sum(row)
        table[label] = {mode: 100.0 * row[k] / denom
                        for k, mode in enumerate(MODE_LABELS)}
    return table


def merge_metrics(distance: dict[str, ZoneMetrics],
                  time: dict[str, ZoneMetrics],
                  baseline: dict[str, float | None]) -> dict[str, ZoneMetrics]:
    out = {}
    for zid, dm in distance.items():
        tm = time.get(zid)
        out[zid] = ZoneMetrics(
            zone_id=zid,
            mean_distance=dm.mean_distance,
            mean_time=tm.mean_time if tm else None,
            trips_counted=dm.trips_counted,
            baseline_distance=baseline.get(zid),
            time_coverage_pct=tm.time_coverage_pct if tm else None)
    return out


def write_zone_metrics(path, metrics: dict[str, ZoneMetrics]) -> None:
    def fmt(v):
        return "" if v is None else repr(v)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["zone_id", "mean_distance", "mean_time", "trips",
                         "baseline_distance", "coverage_pct"])
        for zid in sorted(metrics):
            zm = metrics[zid]
            writer.writerow([zid, fmt(zm.mean_distance), fmt(zm.mean_time),
                             zm.trips_counted, fmt(zm.baseline_distance),
                             fmt(zm.time_coverage_pct)])
