import csv
import json

import pytest

from commutesim.cli import RunConfig, main, run_analyze, run_simulate


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    """A small synthetic dataset written to disk via the CLI."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    cfg = {"zones_per_side": 2, "commuters": 400, "seed": 42,
           "wage_shape": "monotone"}
    cfg_path = root / "scenario.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["synth", "--config", str(cfg_path), "--out", str(data)]) == 0
    return root, data


def _run_cfg(data, out, **kw):
    cfg = RunConfig(zones=str(data / "zones.geojson"),
                    od=str(data / "od.csv"),
                    nodes=str(data / "nodes.csv"),
                    edges=str(data / "edges.csv"),
                    res_mask=str(data / "res_mask.asc"),
                    job_mask=str(data / "job_mask.asc"),
                    seed=7, out=str(out))
    for key, value in kw.items():
        setattr(cfg, key, value)
    return cfg


def test_synth_writes_expected_files(dataset):
    _, data = dataset
    for name in ("zones.geojson", "od.csv", "nodes.csv", "edges.csv",
                 "res_mask.asc", "job_mask.asc"):
        assert (data / name).exists(), name


def test_simulate_then_analyze_end_to_end(dataset):
    root, data = dataset
    out = root / "run1"
    args = ["--zones", str(data / "zones.geojson"),
            "--od", str(data / "od.csv"),
            "--nodes", str(data / "nodes.csv"),
            "--edges", str(data / "edges.csv"),
            "--res-mask", str(data / "res_mask.asc"),
            "--job-mask", str(data / "job_mask.asc"),
            "--seed", "7", "--out", str(out)]
    assert main(["simulate"] + args) == 0
    assert (out / "trips.csv").exists()
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["n"] == 400 and manifest["N"] == 400
    assert manifest["counters"]["dijkstra_runs"] > 0
    assert len(manifest["input_digests"]) == 6

    assert main(["analyze"] + args) == 0
    for name in ("zone_metrics.csv", "regression.json", "flagtest.csv",
                 "modal_split.csv", "bivariate.csv"):
        assert (out / name).exists(), name
    with open(out / "zone_metrics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert sum(int(r["trips"]) for r in rows) == 400
    for r in rows:
        assert float(r["baseline_distance"]) >= 0.0

    assert main(["report", str(out)]) == 0


def test_analyze_outputs_are_deterministic(dataset):
    root, data = dataset
    out_a, out_b = root / "det_a", root / "det_b"
    run_simulate(_run_cfg(data, out_a))
    run_analyze(_run_cfg(data, out_a))
    run_simulate(_run_cfg(data, out_b))
    run_analyze(_run_cfg(data, out_b))
    for name in ("trips.csv", "zone_metrics.csv", "regression.json",
                 "flagtest.csv", "modal_split.csv", "bivariate.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_snap_legs_off_never_longer(dataset):
    root, data = dataset
    out_on, out_off = root / "snap_on", root / "snap_off"
    run_simulate(_run_cfg(data, out_on, snap_legs=True))
    run_simulate(_run_cfg(data, out_off, snap_legs=False))

    def read(out):
        with open(out / "trips.csv", newline="") as fh:
            return {r["trip_id"]: float(r["distance"])
                    for r in csv.DictReader(fh)}

    on, off = read(out_on), read(out_off)
    assert on.keys() == off.keys()
    assert all(off[k] <= on[k] + 1e-9 for k in on)
    assert any(off[k] < on[k] - 1e-9 for k in on)


def test_n_override_scales_trip_count(dataset):
    root, data = dataset
    out = root / "small_n"
    run_simulate(_run_cfg(data, out, n=100))
    with open(out / "trips.csv", newline="") as fh:
        assert sum(1 for _ in csv.DictReader(fh)) == 100


def test_missing_input_is_clean_error(dataset, capsys, tmp_path):
    rc = main(["simulate", "--zones", str(tmp_path / "nope.geojson"),
               "--out", str(tmp_path / "o")])
    assert rc == 1
    err = json.loads(capsys.readouterr().err)
    assert "message" in err and "error" in err


def test_analyze_without_trips_fails(dataset, capsys, tmp_path):
    _, data = dataset
    cfg_args = ["--zones", str(data / "zones.geojson"),
                "--od", str(data / "od.csv"),
                "--nodes", str(data / "nodes.csv"),
                "--edges", str(data / "edges.csv"),
                "--res-mask", str(data / "res_mask.asc"),
                "--job-mask", str(data / "job_mask.asc"),
                "--out", str(tmp_path / "empty")]
    rc = main(["analyze"] + cfg_args)
    assert rc == 1
    assert json.loads(capsys.readouterr().err)["error"]


def test_config_file_with_relative_paths(dataset, tmp_path):
    _, data = dataset
    cfg = {"zones": "zones.geojson", "od": "od.csv", "nodes": "nodes.csv",
           "edges": "edges.csv", "res_mask": "res_mask.asc",
           "job_mask": "job_mask.asc", "seed": 3,
           "out": str(tmp_path / "cfg_run")}
    cfg_path = data / "run.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(cfg_path)]) == 0
    assert (tmp_path / "cfg_run" / "trips.csv").exists()


def test_compare_joins_runs(dataset, tmp_path):
    root, data = dataset
    out_a, out_b = root / "det_a", root / "det_b"
    if not (out_a / "zone_metrics.csv").exists():
        run_simulate(_run_cfg(data, out_a))
        run_analyze(_run_cfg(data, out_a))
        run_simulate(_run_cfg(data, out_b))
        run_analyze(_run_cfg(data, out_b))
    joined = tmp_path / "joined.csv"
    assert main(["compare", str(out_a), str(out_b),
                 "--out", str(joined)]) == 0
    with open(joined, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    for r in rows:
        assert r["mean_distance_0"] == r["mean_distance_1"]


def test_report_prints_summary(dataset, capsys):
    root, data = dataset
    out = root / "det_a"
    if not (out / "zone_metrics.csv").exists():
        run_simulate(_run_cfg(data, out))
        run_analyze(_run_cfg(data, out))
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "zones: 4" in text
    assert "mean commute distance" in text
