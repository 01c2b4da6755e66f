"""Input datasets: zones, OD flows, road network, land-use rasters.

All loaders parse the documented toolkit formats (GeoJSON zones, CSV
flows/network, ESRI ASCII rasters), enforce schema and referential
consistency, and return immutable-by-convention containers.  Zone order
is zone_id ascending everywhere; that order is the canonical tie-break
for every downstream operation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import Ring, point_in_rings, polygon_centroid, rings_bbox

WAGE_BIN_LABELS = ["lt15k", "15_35k", "35_50k", "50_75k", "gt75k"]
MODE_LABELS = ["drove", "carpool", "transit", "other"]

_WAGE_PROPS = ["wage_lt15k", "wage_15_35k", "wage_35_50k", "wage_50_75k", "wage_gt75k"]
_MODE_PROPS = ["mode_drove", "mode_carpool", "mode_transit", "mode_other"]


class DataError(ValueError):
    """Raised for unparsable or schema-violating input files."""


@dataclass(frozen=True)
class Zone:
    zone_id: str
    rings: list[Ring]
    workers: int            # resident workers in the zone
    jobs: int
    mean_wage: float
    wage_bins: tuple[int, int, int, int, int]
    mode_counts: tuple[int, int, int, int]

    def contains(self, x: float, y: float) -> bool:
        return point_in_rings(x, y, self.rings)

    @property
    def centroid(self) -> tuple[float, float]:
        return polygon_centroid(self.rings)

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return rings_bbox(self.rings)


@dataclass(frozen=True)
class ZoneSet:
    zones: tuple[Zone, ...]   # sorted by zone_id
    unit: str = "miles"
    year: str = ""

    def __iter__(self):
        return iter(self.zones)

    def __len__(self):
        return len(self.zones)

    def __getitem__(self, zone_id: str) -> Zone:
        return self._by_id()[zone_id]

    def __contains__(self, zone_id: str) -> bool:
        return zone_id in self._by_id()

    def _by_id(self) -> dict[str, Zone]:
        cached = getattr(self, "_cache", None)
        if cached is None:
            cached = {z.zone_id: z for z in self.zones}
            object.__setattr__(self, "_cache", cached)
        return cached

    @property
    def ids(self) -> list[str]:
        return [z.zone_id for z in self.zones]

    def index_of(self, zone_id: str) -> int:
        """Canonical zone index (position in id-ascending order)."""
        return self.ids.index(zone_id)


@dataclass(frozen=True)
class ODMatrix:
    # (origin_id, dest_id) -> (commuters, mean_time_minutes or None)
    flows: dict[tuple[str, str], tuple[int, float | None]]

    @property
    def total(self) -> int:
        return sum(c for c, _ in self.flows.values())

    def commuters(self, i: str, j: str) -> int:
        entry = self.flows.get((i, j))
        return entry[0] if entry else 0

    def row_sum(self, i: str) -> int:
        return sum(c for (o, _), (c, _) in self.flows.items() if o == i)

    def col_sum(self, j: str) -> int:
        return sum(c for (_, d), (c, _) in self.flows.items() if d == j)


@dataclass(frozen=True)
class RoadNetwork:
    node_ids: list[str]                  # sorted ascending
    coords: np.ndarray                   # (n, 2) float, aligned with node_ids
    # directed arcs over node indices (bidirectional edges pre-expanded)
    arcs: list[tuple[int, int, float]]

    @property
    def node_index(self) -> dict[str, int]:
        cached = getattr(self, "_nidx", None)
        if cached is None:
            cached = {nid: k for k, nid in enumerate(self.node_ids)}
            object.__setattr__(self, "_nidx", cached)
        return cached


@dataclass(frozen=True)
class RasterMask:
    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    cellsize: float
    nodata_value: float
    weights: np.ndarray          # (nrows, ncols), row 0 = top row; nodata -> 0
    nodata: np.ndarray           # boolean flags, same shape


@dataclass(frozen=True)
class Finding:
    severity: str                # "error" | "warning"
    code: str
    message: str
    ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.findings

    @property
    def has_errors(self) -> bool:
        return any(f.severity == "error" for f in self.findings)


def _require_int(props: dict, key: str, where: str) -> int:
    if key not in props:
        raise DataError(f"{where}: missing property '{key}'")
    v = props[key]
    if not isinstance(v, (int, float)) or v != int(v):
        raise DataError(f"{where}: property '{key}' is not an integer: {v!r}")
    v = int(v)
    if v < 0:
        raise DataError(f"{where}: property '{key}' is negative: {v}")
    return v


def _parse_rings(geom: dict, where: str) -> list[Ring]:
    gtype = geom.get("type")
    if gtype == "Polygon":
        parts = [geom["coordinates"]]
    elif gtype == "MultiPolygon":
        parts = geom["coordinates"]
    else:
        raise DataError(f"{where}: unsupported geometry type {gtype!r}")
    rings: list[Ring] = []
    for part in parts:
        for raw in part:
            ring = [(float(x), float(y)) for x, y in raw]
            if len(ring) < 4:
                raise DataError(f"{where}: ring with fewer than 4 vertices")
            if ring[0] != ring[-1]:
                raise DataError(f"{where}: unclosed ring")
            rings.append(ring)
    return rings


def load_zones(path, unit: str = "miles") -> ZoneSet:
    """Load a zones FeatureCollection (see README for the schema)."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    if doc.get("type") != "FeatureCollection":
        raise DataError(f"{path}: not a FeatureCollection")

    zones = []
    seen: set[str] = set()
    for idx, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        zone_id = props.get("id")
        where = f"feature #{idx} (id={zone_id!r})"
        if not isinstance(zone_id, str) or not zone_id:
            raise DataError(f"{where}: missing or non-string 'id'")
        if zone_id in seen:
            raise DataError(f"{where}: duplicate zone_id")
        seen.add(zone_id)
        mean_wage = props.get("mean_wage")
        if not isinstance(mean_wage, (int, float)) or mean_wage < 0:
            raise DataError(f"{where}: bad 'mean_wage': {mean_wage!r}")
        zones.append(Zone(
            zone_id=zone_id,
            rings=_parse_rings(feat.get("geometry") or {}, where),
            workers=_require_int(props, "workers", where),
            jobs=_require_int(props, "jobs", where),
            mean_wage=float(mean_wage),
            wage_bins=tuple(_require_int(props, k, where) for k in _WAGE_PROPS),
            mode_counts=tuple(_require_int(props, k, where) for k in _MODE_PROPS),
        ))
    zones.sort(key=lambda z: z.zone_id)
    return ZoneSet(zones=tuple(zones), unit=unit,
                   year=str(doc.get("year", "")))


def write_zones(path, zones: ZoneSet) -> None:
    features = []
    for z in zones:
        props = {"id": z.zone_id, "workers": z.workers, "jobs": z.jobs,
                 "mean_wage": z.mean_wage}
        props.update(dict(zip(_WAGE_PROPS, z.wage_bins)))
        props.update(dict(zip(_MODE_PROPS, z.mode_counts)))
        features.append({
            "type": "Feature",
            "properties": props,
            "geometry": {"type": "Polygon",
                         "coordinates": [[list(p) for p in ring] for ring in z.rings]},
        })
    doc = {"type": "FeatureCollection", "year": zones.year, "features": features}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_od(path, zones: ZoneSet) -> ODMatrix:
    """Load origin/destination commuter flows from CSV."""
    flows: dict[tuple[str, str], tuple[int, float | None]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"origin_id", "dest_id", "commuters"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(f"{path}: header must contain {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            i, j = row["origin_id"], row["dest_id"]
            where = f"{path} line {lineno}"
            for zid in (i, j):
                if zid not in zones:
                    raise DataError(f"{where}: unknown zone_id {zid!r}")
            if (i, j) in flows:
                raise DataError(f"{where}: duplicate OD pair ({i}, {j})")
            commuters = int(row["commuters"])
            if commuters < 0:
                raise DataError(f"{where}: negative commuters")
            raw_t = (row.get("mean_time_min") or "").strip()
            mean_time = float(raw_t) if raw_t else None
            if mean_time is not None and mean_time < 0:
                raise DataError(f"{where}: negative mean_time_min")
            flows[(i, j)] = (commuters, mean_time)
    od = ODMatrix(flows=flows)
    if od.total <= 0:
        raise DataError(f"{path}: total commuters must be positive")
    return od


def write_od(path, od: ODMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["origin_id", "dest_id", "commuters", "mean_time_min"])
        for (i, j) in sorted(od.flows):
            c, t = od.flows[(i, j)]
            writer.writerow([i, j, c, "" if t is None else repr(t)])


def load_network(nodes_path, edges_path) -> RoadNetwork:
    """Load nodes.csv + edges.csv; bidirectional edges become two arcs."""
    nodes: dict[str, tuple[float, float]] = {}
    with open(nodes_path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            nid = row["node_id"]
            if nid in nodes:
                raise DataError(f"{nodes_path} line {lineno}: duplicate node {nid!r}")
            nodes[nid] = (float(row["x"]), float(row["y"]))
    node_ids = sorted(nodes)
    index = {nid: k for k, nid in enumerate(node_ids)}
    coords = np.array([nodes[nid] for nid in node_ids], dtype=float).reshape(-1, 2)

    arcs: list[tuple[int, int, float]] = []
    with open(edges_path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            where = f"{edges_path} line {lineno}"
            for nid in (row["from_node"], row["to_node"]):
                if nid not in index:
                    raise DataError(f"{where}: dangling node reference {nid!r}")
            length = float(row["length"])
            if length < 0:
                raise DataError(f"{where}: negative length")
            u, v = index[row["from_node"]], index[row["to_node"]]
            arcs.append((u, v, length))
            if int(row["bidirectional"]):
                arcs.append((v, u, length))
    return RoadNetwork(node_ids=node_ids, coords=coords, arcs=arcs)


def write_network(nodes_path, edges_path, node_rows, edge_rows) -> None:
    """Write node/edge CSVs from (id, x, y) and (u, v, length, bidi) rows."""
    with open(nodes_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node_id", "x", "y"])
        writer.writerows(node_rows)
    with open(edges_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["from_node", "to_node", "length", "bidirectional"])
        writer.writerows(edge_rows)


def load_mask(path) -> RasterMask:
    """Load an ESRI ASCII grid; nodata cells get weight 0 plus a flag."""
    header: dict[str, float] = {}
    values: list[float] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(header) < 6 and parts[0].upper() in (
                    "NCOLS", "NROWS", "XLLCORNER", "YLLCORNER",
                    "CELLSIZE", "NODATA_VALUE"):
                header[parts[0].upper()] = float(parts[1])
            else:
                values.extend(float(v) for v in parts)
    for key in ("NCOLS", "NROWS", "XLLCORNER", "YLLCORNER", "CELLSIZE", "NODATA_VALUE"):
        if key not in header:
            raise DataError(f"{path}: missing header field {key}")
    ncols, nrows = int(header["NCOLS"]), int(header["NROWS"])
    if ncols <= 0 or nrows <= 0 or header["CELLSIZE"] <= 0:
        raise DataError(f"{path}: non-positive grid dimensions")
    if len(values) != ncols * nrows:
        raise DataError(f"{path}: expected {ncols * nrows} values, got {len(values)}")
    grid = np.array(values, dtype=float).reshape(nrows, ncols)
    nodata = grid == header["NODATA_VALUE"]
    weights = np.where(nodata, 0.0, grid)
    if (weights < 0).any():
        raise DataError(f"{path}: negative cell weight")
    return RasterMask(ncols=ncols, nrows=nrows,
                      xllcorner=header["XLLCORNER"], yllcorner=header["YLLCORNER"],
                      cellsize=header["CELLSIZE"],
                      nodata_value=header["NODATA_VALUE"],
                      weights=weights, nodata=nodata)


def write_mask(path, mask: RasterMask) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"NCOLS {mask.ncols}\n")
        fh.write(f"NROWS {mask.nrows}\n")
        fh.write(f"XLLCORNER {mask.xllcorner!r}\n")
        fh.write(f"YLLCORNER {mask.yllcorner!r}\n")
        fh.write(f"CELLSIZE {mask.cellsize!r}\n")
        fh.write(f"NODATA_VALUE {mask.nodata_value!r}\n")
        out = np.where(mask.nodata, mask.nodata_value, mask.weights)
        for row in out:
            fh.write(" ".join(repr(v) if v != int(v) else str(int(v)) for v in row))
            fh.write("\n")


def validate_consistency(zones: ZoneSet, od: ODMatrix,
                         strict: bool = False) -> ValidationReport:
    """Check OD margins against zone worker/job counts.

    Mismatches are warnings by default because real journey-to-work
    margins include commuters entering or leaving the study area;
    strict mode (for synthetic, closed datasets) upgrades them to errors.
    """
    severity = "error" if strict else "warning"
    findings: list[Finding] = []
    row_sums: dict[str, int] = {}
    col_sums: dict[str, int] = {}
    for (i, j), (c, _) in od.flows.items():
        row_sums[i] = row_sums.get(i, 0) + c
        col_sums[j] = col_sums.get(j, 0) + c
    for z in zones:
        rsum = row_sums.get(z.zone_id, 0)
        csum = col_sums.get(z.zone_id, 0)
        if rsum != z.workers:
            findings.append(Finding(
                severity, "row-sum-mismatch",
                f"zone {z.zone_id}: outgoing flow {rsum} != workers "
                f"{z.workers} (delta {z.workers - rsum})", (z.zone_id,)))
        if csum != z.jobs:
            findings.append(Finding(
                severity, "col-sum-mismatch",
                f"zone {z.zone_id}: incoming flow {csum} != jobs "
                f"{z.jobs} (delta {z.jobs - csum})", (z.zone_id,)))
        if z.workers == 0 and rsum > 0:
            findings.append(Finding(
                "error", "flow-from-empty-zone",
                f"zone {z.zone_id} has no resident workers but sends "
                f"{rsum} commuters", (z.zone_id,)))
    return ValidationReport(findings=tuple(findings))


def aggregate_crosswalk(zones: ZoneSet, od: ODMatrix,
                        crosswalk: dict[str, str]) -> tuple[ZoneSet, ODMatrix]:
    """Aggregate child zones/flows to parent zones.

    Counts are summed; mean wage is the worker-weighted mean of the
    children; pairwise mean time is the flow-weighted mean; the parent
    polygon is the multipolygon of its children's rings.
    """
    for child in zones.ids:
        if child not in crosswalk:
            raise DataError(f"zone {child!r} has no crosswalk mapping")
    known_children = set(zones.ids)
    for child in crosswalk:
        if child not in known_children:
            raise DataError(f"crosswalk child {child!r} not in zone set")

    groups: dict[str, list[Zone]] = {}
    for z in zones:
        groups.setdefault(crosswalk[z.zone_id], []).append(z)

    parents = []
    for pid in sorted(groups):
        members = groups[pid]
        workers = sum(z.workers for z in members)
        wage_num = sum(z.mean_wage * z.workers for z in members)
        if workers > 0:
            mean_wage = wage_num / workers
        else:
            mean_wage = sum(z.mean_wage for z in members) / len(members)
        parents.append(Zone(
            zone_id=pid,
            rings=[ring for z in members for ring in z.rings],
            workers=workers,
            jobs=sum(z.jobs for z in members),
            mean_wage=mean_wage,
            wage_bins=tuple(sum(z.wage_bins[k] for z in members) for k in range(5)),
            mode_counts=tuple(sum(z.mode_counts[k] for z in members) for k in range(4)),
        ))
    parent_set = ZoneSet(zones=tuple(parents), unit=zones.unit, year=zones.year)

    agg: dict[tuple[str, str], list] = {}
    for (i, j), (c, t) in od.flows.items():
        key = (crosswalk[i], crosswalk[j])
        entry = agg.setdefault(key, [0, 0.0, 0])  # commuters, time_num, timed_flow
        entry[0] += c
        if t is not None:
            entry[1] += c * t
            entry[2] += c
    flows = {}
    for key, (c, tnum, tflow) in agg.items():
        flows[key] = (c, tnum / tflow if tflow > 0 else None)
    return parent_set, ODMatrix(flows=flows)


def load_crosswalk(path) -> dict[str, str]:
    table: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            child = row["child_id"]
            if child in table:
                raise DataError(f"{path} line {lineno}: duplicate child {child!r}")
            table[child] = row["parent_id"]
    return table


def write_crosswalk(path, crosswalk: dict[str, str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["child_id", "parent_id"])
        for child in sorted(crosswalk):
            writer.writerow([child, crosswalk[child]])
