"""Pair sampled origin and destination points into individual trips.

Each origin zone contributes exactly its row-sum of worker points and
each destination zone its column-sum of job points; a seeded shuffle on
each side followed by block assignment in id-ascending order realizes
uniform random matching without replacement, deterministically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .geodata import DataError, ZoneSet
from .rng import RandomStream
from .sampling import SpatialSupport, TripCountMatrix, sample_points


@dataclass
class Trip:
    trip_id: int
    origin_zone: str
    dest_zone: str
    origin: tuple[float, float]
    dest: tuple[float, float]
    distance: float | None = None
    unreachable: bool = False


@dataclass
class TripSet:
    trips: list[Trip]
    master_seed: int
    n: int
    N: int
    snap_legs: bool | None = None
    provenance: dict = field(default_factory=dict)

    def pair_counts(self) -> dict[tuple[str, str], int]:
        out: dict[tuple[str, str], int] = {}
        for t in self.trips:
            key = (t.origin_zone, t.dest_zone)
            out[key] = out.get(key, 0) + 1
        return out


def pair_trips(counts: TripCountMatrix, zones: ZoneSet,
               res_supports: dict[str, SpatialSupport],
               job_supports: dict[str, SpatialSupport],
               master_seed: int) -> TripSet:
    """Sample per-zone point pools and match them into trips.

    Origin pools are shuffled with the zone's "pair-origin" stream and
    split into consecutive blocks per destination (dest_id ascending);
    destination pools symmetrically.  Every point is used exactly once,
    so aggregating the result by zone pair reproduces `counts` exactly.
    """
    row_sums = counts.row_sums()
    col_sums = counts.col_sums()
    for zid in row_sums:
        if zid not in res_supports:
            raise DataError(f"missing residential support for zone {zid!r}")
    for zid in col_sums:
        if zid not in job_supports:
            raise DataError(f"missing job support for zone {zid!r}")

    # origin side: pool per zone, block offsets per (i, j) with j ascending
    origin_points: dict[str, list] = {}
    origin_offset: dict[tuple[str, str], int] = {}
    for zid, total in row_sums.items():
        zidx = zones.index_of(zid)
        pts = sample_points(res_supports[zid], total,
                            RandomStream(master_seed, "origin-points", zidx))
        RandomStream(master_seed, "pair-origin", zidx).shuffle(pts)
        origin_points[zid] = pts
        offset = 0
        for j in sorted(j for (i, j) in counts.counts if i == zid):
            origin_offset[(zid, j)] = offset
            offset += counts.counts[(zid, j)]

    # destination side, symmetric
    dest_points: dict[str, list] = {}
    dest_offset: dict[tuple[str, str], int] = {}
    for zid, total in col_sums.items():
        zidx = zones.index_of(zid)
        pts = sample_points(job_supports[zid], total,
                            RandomStream(master_seed, "dest-points", zidx))
        RandomStream(master_seed, "pair-dest", zidx).shuffle(pts)
        dest_points[zid] = pts
        offset = 0
        for i in sorted(i for (i, j) in counts.counts if j == zid):
            dest_offset[(i, zid)] = offset
            offset += counts.counts[(i, zid)]

    trips: list[Trip] = []
    trip_id = 0
    for (i, j) in sorted(counts.counts):
        t_ij = counts.counts[(i, j)]
        o_base = origin_offset[(i, j)]
        d_base = dest_offset[(i, j)]
        opts, dpts = origin_points[i], dest_points[j]
        for k in range(t_ij):
            trips.append(Trip(trip_id=trip_id, origin_zone=i, dest_zone=j,
                              origin=opts[o_base + k], dest=dpts[d_base + k]))
            trip_id += 1
    return TripSet(trips=trips, master_seed=master_seed,
                   n=counts.n, N=counts.n)


def write_trips(path, tripset: TripSet) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trip_id", "origin_zone", "dest_zone",
                         "ox", "oy", "dx", "dy", "distance"])
        for t in tripset.trips:
            writer.writerow([t.trip_id, t.origin_zone, t.dest_zone,
                             repr(t.origin[0]), repr(t.origin[1]),
                             repr(t.dest[0]), repr(t.dest[1]),
                             "" if t.distance is None else repr(t.distance)])


def read_trips(path) -> TripSet:
    trips = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            raw_d = (row.get("distance") or "").strip()
            trips.append(Trip(
                trip_id=int(row["trip_id"]),
                origin_zone=row["origin_zone"], dest_zone=row["dest_zone"],
                origin=(float(row["ox"]), float(row["oy"])),
                dest=(float(row["dx"]), float(row["dy"])),
                distance=float(raw_d) if raw_d else None))
    return TripSet(trips=trips, master_seed=0, n=len(trips), N=len(trips))
