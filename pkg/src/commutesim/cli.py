"""Command-line pipeline: synth -> simulate -> analyze -> report/compare.

Every run is reproducible from its config + master seed; the manifest
records input digests and routing counters so outputs are attributable.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import dataclass

from . import geodata, metrics as metrics_mod, stats as stats_mod
from .geodata import DataError
from .routing import RoutingEngine, measure_trips
from .sampling import SamplingError, apportion_trip_counts, build_support
from .stats import UntestableError
from .synth import ScenarioConfig, generate_scenario
from .trips import pair_trips, read_trips, write_trips


class PipelineError(RuntimeError):
    def __init__(self, code: str, message: str, details=None):
        super().__init__(message)
        self.code = code
        self.details = details or []


@dataclass
class RunConfig:
    zones: str = "zones.geojson"
    od: str = "od.csv"
    nodes: str = "nodes.csv"
    edges: str = "edges.csv"
    res_mask: str = "res_mask.asc"
    job_mask: str = "job_mask.asc"
    seed: int = 0
    n: int | None = None              # default: observed commuter total N
    snap_legs: bool = True
    fallback_cellsize: float | None = None   # default: mask cellsize
    flag_weight: str = "workers"      # Eq-3 style weight variable
    strict: bool = False
    unit: str = "miles"
    out: str = "out"
    threads: int = 1

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        cfg = cls()
        for key, value in raw.items():
            if not hasattr(cfg, key):
                raise PipelineError("config", f"unknown config key {key!r}")
            setattr(cfg, key, value)
        base = os.path.dirname(os.path.abspath(path))
        for key in ("zones", "od", "nodes", "edges", "res_mask", "job_mask"):
            p = getattr(cfg, key)
            if not os.path.isabs(p):
                setattr(cfg, key, os.path.join(base, p))
        return cfg


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_inputs(config: RunConfig):
    zones = geodata.load_zones(config.zones, unit=config.unit)
    od = geodata.load_od(config.od, zones)
    network = geodata.load_network(config.nodes, config.edges)
    res_mask = geodata.load_mask(config.res_mask)
    job_mask = geodata.load_mask(config.job_mask)
    return zones, od, network, res_mask, job_mask


def run_simulate(config: RunConfig) -> dict:
    """Full simulation stage: apportion, sample, pair, route, write."""
    zones, od, network, res_mask, job_mask = _load_inputs(config)
    report = geodata.validate_consistency(zones, od, strict=config.strict)
    if report.has_errors:
        raise PipelineError(
            "validation", "input datasets failed consistency validation",
            [f"{f.severity}:{f.code}: {f.message}" for f in report.findings])

    n = config.n if config.n is not None else od.total
    counts = apportion_trip_counts(od, n)
    fallback = (config.fallback_cellsize
                if config.fallback_cellsize is not None else res_mask.cellsize)

    res_supports = {}
    job_supports = {}
    row_sums = counts.row_sums()
    col_sums = counts.col_sums()
    for z in zones:
        if row_sums.get(z.zone_id, 0) > 0:
            res_supports[z.zone_id] = build_support(z, res_mask, fallback)
        if col_sums.get(z.zone_id, 0) > 0:
            job_supports[z.zone_id] = build_support(z, job_mask, fallback)

    tripset = pair_trips(counts, zones, res_supports, job_supports,
                         config.seed)
    tripset.N = od.total
    measured, rstats = measure_trips(tripset, network,
                                     snap_legs=config.snap_legs)

    os.makedirs(config.out, exist_ok=True)
    trips_path = os.path.join(config.out, "trips.csv")
    write_trips(trips_path, measured)
    manifest = {
        "seed": config.seed,
        "n": n,
        "N": od.total,
        "snap_legs": config.snap_legs,
        "fallback_cellsize": fallback,
        "strict": config.strict,
        "counters": {
            "dijkstra_runs": rstats.dijkstra_runs,
            "settled_nodes": rstats.settled_nodes,
            "unreachable_trips": rstats.unreachable_trips,
        },
        "fallback_zones": sorted(
            [zid for zid, s in res_supports.items() if s.fallback] +
            [zid for zid, s in job_supports.items() if s.fallback]),
        "validation_findings": [
            f"{f.severity}:{f.code}: {f.message}" for f in report.findings],
        "input_digests": {key: _sha256(getattr(config, key))
                          for key in ("zones", "od", "nodes", "edges",
                                      "res_mask", "job_mask")},
    }
    with open(os.path.join(config.out, "run_manifest.json"), "w",
              encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest


def _regression_entry(result) -> dict:
    return {
        "coefficients": {"intercept": result.coefficients[0],
                         "wage": result.coefficients[1],
                         "wage_sq": result.coefficients[2]},
        "std_errors": list(result.std_errors),
        "t_stats": list(result.t_stats),
        "p_values": list(result.p_values),
        "r_squared": result.r_squared,
        "f_stat": result.f_stat,
        "n_obs": result.n_obs,
    }


def run_analyze(config: RunConfig, trips_path: str | None = None) -> dict:
    """Analysis stage: metrics, regressions, flag tests, classifications."""
    zones = geodata.load_zones(config.zones, unit=config.unit)
    od = geodata.load_od(config.od, zones)
    network = geodata.load_network(config.nodes, config.edges)
    if trips_path is None:
        trips_path = os.path.join(config.out, "trips.csv")
    tripset = read_trips(trips_path)
    if any(t.distance is None for t in tripset.trips):
        raise PipelineError("trips", f"{trips_path}: unmeasured trips; "
                            "run simulate first")

    engine = RoutingEngine(network)
    dist_metrics = metrics_mod.mean_commute_distance(tripset, zones)
    time_metrics = metrics_mod.mean_commute_time(od, zones)
    baseline = metrics_mod.centroid_baseline(zones, od, network, engine=engine)
    merged = metrics_mod.merge_metrics(dist_metrics, time_metrics, baseline)

    os.makedirs(config.out, exist_ok=True)
    metrics_mod.write_zone_metrics(
        os.path.join(config.out, "zone_metrics.csv"), merged)

    wage_by_zone = {z.zone_id: z.mean_wage for z in zones}
    dist_by_zone = {zid: m.mean_distance for zid, m in merged.items()
                    if m.mean_distance is not None}
    time_by_zone = {zid: m.mean_time for zid, m in merged.items()
                    if m.mean_time is not None}

    regressions: dict = {"year": zones.year, "models": {}}
    for metric_name, values in (("distance", dist_by_zone),
                                ("time", time_by_zone)):
        try:
            fit = stats_mod.quadratic_fit(values, wage_by_zone)
            regressions["models"][metric_name] = _regression_entry(fit)
        except (UntestableError, stats_mod.DegenerateDesignError) as exc:
            regressions["models"][metric_name] = {"untestable": str(exc)}
    with open(os.path.join(config.out, "regression.json"), "w",
              encoding="utf-8", newline="\n") as fh:
        json.dump(regressions, fh, indent=1, sort_keys=True)
        fh.write("\n")

    if config.flag_weight == "workers":
        weight_by_zone = {z.zone_id: float(z.workers) for z in zones}
    elif config.flag_weight == "jobs":
        weight_by_zone = {z.zone_id: float(z.jobs) for z in zones}
    else:
        raise PipelineError("config",
                            f"unknown flag_weight {config.flag_weight!r}")

    with open(os.path.join(config.out, "flagtest.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "wage_group", "pct_below", "pct_above",
                         "difference", "t", "p", "stars", "n_obs", "status"])
        for metric_name, values in (("distance", dist_by_zone),
                                    ("time", time_by_zone)):
            for b, label in enumerate(geodata.WAGE_BIN_LABELS):
                shares = {}
                for z in zones:
                    total = sum(z.wage_bins)
                    if total > 0:
                        shares[z.zone_id] = 100.0 * z.wage_bins[b] / total
                try:
                    row = stats_mod.flag_test(values, shares, weight_by_zone,
                                              group_label=label)
                    writer.writerow([metric_name, label, repr(row.pct_below),
                                     repr(row.pct_above),
                                     repr(row.difference), repr(row.t_stat),
                                     repr(row.p_value), row.stars,
                                     row.n_obs, "ok"])
                except UntestableError as exc:
                    writer.writerow([metric_name, label, "", "", "", "", "",
                                     "", "", f"untestable: {exc}"])

    try:
        quint = stats_mod.quintile_group(zones)
        grouping = {zid: quint.label_of(zid) for zid in quint.group_of}
    except UntestableError:
        quint = None
        grouping = {}
    split = metrics_mod.modal_split(zones, grouping)
    with open(os.path.join(config.out, "modal_split.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["group", "drove", "carpool", "transit", "other"])
        order = [lbl for lbl in stats_mod.QUINTILE_LABELS if lbl in split]
        if "All" in split:
            order.append("All")
        for label in order:
            writer.writerow([label] + [repr(split[label][m])
                                       for m in geodata.MODE_LABELS])

    with open(os.path.join(config.out, "bivariate.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["zone_id", "class"])
        if quint is not None and len(dist_by_zone) >= 3:
            for zid, cls in stats_mod.bivariate_classify(
                    dist_by_zone, quint).items():
                writer.writerow([zid, cls])
    return regressions


def run_report(out_dir: str, stream=None) -> None:
    """Human-readable summary of the analyze outputs in a run directory."""
    stream = stream or sys.stdout
    zm_path = os.path.join(out_dir, "zone_metrics.csv")
    with open(zm_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    dists = [float(r["mean_distance"]) for r in rows if r["mean_distance"]]
    times = [float(r["mean_time"]) for r in rows if r["mean_time"]]
    trips = sum(int(r["trips"]) for r in rows)
    print(f"zones: {len(rows)}   trips measured: {trips}", file=stream)
    if dists:
        print(f"mean commute distance: min {min(dists):.3f}  "
              f"max {max(dists):.3f}", file=stream)
    if times:
        print(f"mean commute time:     min {min(times):.2f}  "
              f"max {max(times):.2f}", file=stream)
    reg_path = os.path.join(out_dir, "regression.json")
    if os.path.exists(reg_path):
        with open(reg_path, encoding="utf-8") as fh:
            reg = json.load(fh)
        for name, model in sorted(reg.get("models", {}).items()):
            if "untestable" in model:
                print(f"quadratic fit [{name}]: untestable "
                      f"({model['untestable']})", file=stream)
                continue
            c = model["coefficients"]
            print(f"quadratic fit [{name}]: intercept {c['intercept']:.4g}, "
                  f"wage {c['wage']:.4g}, wage^2 {c['wage_sq']:.4g}, "
                  f"R^2 {model['r_squared']:.3f}, n {model['n_obs']}",
                  file=stream)
    ft_path = os.path.join(out_dir, "flagtest.csv")
    if os.path.exists(ft_path):
        with open(ft_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                if row["status"] != "ok":
                    print(f"flag test [{row['metric']}/{row['wage_group']}]: "
                          f"{row['status']}", file=stream)
                    continue
                print(f"flag test [{row['metric']}/{row['wage_group']}]: "
                      f"below {float(row['pct_below']):.1f}%  "
                      f"above {float(row['pct_above']):.1f}%  "
                      f"diff {float(row['difference']):+.1f}{row['stars']}",
                      file=stream)


def run_compare(run_dirs: list[str], crosswalk_path: str | None,
                out_path: str) -> None:
    """Join per-run zone metrics (via an optional crosswalk) into one CSV."""
    crosswalk = (geodata.load_crosswalk(crosswalk_path)
                 if crosswalk_path else None)
    tables = []
    for run_dir in run_dirs:
        path = os.path.join(run_dir, "zone_metrics.csv")
        table: dict[str, tuple[float, int]] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                if not row["mean_distance"]:
                    continue
                zid = row["zone_id"]
                if crosswalk is not None:
                    zid = crosswalk.get(zid, zid)
                d, t = float(row["mean_distance"]), int(row["trips"])
                prev = table.get(zid, (0.0, 0))
                table[zid] = (prev[0] + d * t, prev[1] + t)
        tables.append({zid: num / cnt for zid, (num, cnt) in table.items()
                       if cnt > 0})
    all_ids = sorted(set().union(*tables)) if tables else []
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["zone_id"] + [f"mean_distance_{k}"
                                       for k in range(len(tables))])
        for zid in all_ids:
            writer.writerow([zid] + ["" if zid not in t else repr(t[zid])
                                     for t in tables])


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON run config")
    parser.add_argument("--zones"), parser.add_argument("--od")
    parser.add_argument("--nodes"), parser.add_argument("--edges")
    parser.add_argument("--res-mask"), parser.add_argument("--job-mask")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--n", type=int)
    parser.add_argument("--snap-legs", choices=["on", "off"])
    parser.add_argument("--fallback-cellsize", type=float)
    parser.add_argument("--flag-weight", choices=["workers", "jobs"])
    parser.add_argument("--strict", action="store_true")
    parser.add_argument("--threads", type=int)
    parser.add_argument("--out")


def _build_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {"zones": args.zones, "od": args.od, "nodes": args.nodes,
                 "edges": args.edges, "res_mask": args.res_mask,
                 "job_mask": args.job_mask, "seed": args.seed, "n": args.n,
                 "fallback_cellsize": args.fallback_cellsize,
                 "flag_weight": args.flag_weight, "threads": args.threads,
                 "out": args.out}
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    if args.snap_legs is not None:
        cfg.snap_legs = args.snap_legs == "on"
    if args.strict:
        cfg.strict = True
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="commutesim",
        description="Monte Carlo disaggregation of journey-to-work flows "
                    "with network routing and wage-group commute analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--config", help="JSON scenario config")
    p_synth.add_argument("--seed", type=int)
    p_synth.add_argument("--out", required=True)

    p_sim = sub.add_parser("simulate", help="simulate and measure trips")
    _add_run_flags(p_sim)

    p_ana = sub.add_parser("analyze", help="compute metrics and statistics")
    _add_run_flags(p_ana)
    p_ana.add_argument("--trips", help="trips.csv from simulate "
                                       "(default: <out>/trips.csv)")

    p_rep = sub.add_parser("report", help="summarize analyze outputs")
    p_rep.add_argument("out_dir")

    p_cmp = sub.add_parser("compare", help="join metrics across runs")
    p_cmp.add_argument("run_dirs", nargs="+")
    p_cmp.add_argument("--crosswalk")
    p_cmp.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            raw = {}
            if args.config:
                with open(args.config, encoding="utf-8") as fh:
                    raw = json.load(fh)
            if args.seed is not None:
                raw["seed"] = args.seed
            generate_scenario(ScenarioConfig(**raw), out_dir=args.out)
        elif args.command == "simulate":
            run_simulate(_build_config(args))
        elif args.command == "analyze":
            run_analyze(_build_config(args), trips_path=args.trips)
        elif args.command == "report":
            run_report(args.out_dir)
        elif args.command == "compare":
            run_compare(args.run_dirs, args.crosswalk, args.out)
    except (PipelineError, DataError, SamplingError, OSError,
            ValueError) as exc:
        error = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, PipelineError):
            error["code"] = exc.code
            error["details"] = exc.details
        print(json.dumps(error), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
