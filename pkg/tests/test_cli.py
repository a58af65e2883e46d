import json

import pytest

from slicer.cli import EXIT_BAD_INPUT, EXIT_INFEASIBLE, EXIT_OK, OUTPUT_ENV, main
from slicer.scenario import Scenario, SliceSpec, generate_random_scenario


def _read(path):
    return json.loads(path.read_text())


def test_run_all_methods_writes_artifacts(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--users", "5", "--seed", "1", "--out", str(out)]) == EXIT_OK
    for m in ("slicer", "geometric_center", "kmeans"):
        for kind in ("solution", "plan", "report"):
            assert (out / f"{kind}.{m}.json").exists()
    assert (out / "scenario.json").exists() and (out / "deployment.json").exists()
    lines = (out / "comparison.csv").read_text().splitlines()
    assert lines[0] == "method,metric,n,mean,ci_low,ci_high" and len(lines) == 1 + 3 * 3
    rep = _read(out / "report.slicer.json")
    assert rep["sla_violation_count"] == 0 and rep["distributions"] == {}


def test_slicer_only_no_sim(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--users", "5", "--methods", "slicer", "--no-sim", "--out", str(out)]) == EXIT_OK
    assert sorted(p.name for p in out.glob("report.*")) == ["report.slicer.json"]
    assert not (out / "comparison.csv").exists()


def test_run_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["run", "--users", "20", "--seed", "4", "--sim", "--duration", "2", "--runs", "1",
                     "--out", str(tmp_path / d)]) == EXIT_OK
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_step_by_step(tmp_path):
    out = str(tmp_path)
    slices = tmp_path / "slices.json"
    slices.write_text(json.dumps([SliceSpec("video", "eMBB", 10e6, 5e-3, 1e-5).to_dict()]))
    assert main(["generate", "--users", "8", "--seed", "2", "--slices", str(slices), "--out", out]) == EXIT_OK
    sc = Scenario.load(tmp_path / "scenario.json")
    assert len(sc.subareas) == 8 and {a.slice_id for a in sc.subareas} == {"video"}
    assert main(["solve", "--method", "slicer,geometric_center", "--lp", "--out", out]) == EXIT_OK
    assert (tmp_path / "problem.lp").read_text().startswith("\\")
    assert main(["evaluate", "--method", "slicer,geometric_center", "--sim", "--duration", "2", "--runs", "1",
                 "--out", out]) == EXIT_OK
    assert (tmp_path / "dist.slicer.delay.csv").exists()
    assert main(["compare", "--out", out]) == EXIT_OK
    assert (tmp_path / "comparison.csv").exists()


def test_infeasible_exit_and_witness(tmp_path):
    sc = generate_random_scenario(occupancy_fraction=0.45, rng_seed=0)
    import dataclasses
    weak = dataclasses.replace(sc, radio=dataclasses.replace(sc.radio, tx_power=-30.0))
    weak.save(tmp_path / "scenario.json")
    assert main(["solve", "--method", "slicer", "--out", str(tmp_path)]) == EXIT_INFEASIBLE
    sol = _read(tmp_path / "solution.slicer.json")
    assert sol["status"] == "infeasible" and sol["witness"]
    assert main(["run", "--scenario", str(tmp_path / "scenario.json"), "--out", str(tmp_path / "r")]) == EXIT_INFEASIBLE


def test_sequence(tmp_path):
    out = tmp_path / "seq"
    assert main(["sequence", "--k-max", "3", "--users", "20", "--seed", "5", "--dt", "60",
                 "--method", "slicer", "--out", str(out)]) == EXIT_OK
    timing = _read(out / "sequence_timing.json")
    assert [s["seed"] for s in timing["snapshots"]] == [5, 4, 7]
    assert [s["t_k"] for s in timing["snapshots"]] == [0.0, 60.0, 120.0]
    assert all(s["within_period"] for s in timing["snapshots"])
    scenarios = [(out / f"snapshot_{k}" / "scenario.json").read_text() for k in range(3)]
    assert len(set(scenarios)) == 3
    assert all((out / f"snapshot_{k}" / "solution.slicer.json").exists() for k in range(3))


def test_env_default_output(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["generate", "--users", "5"]) == EXIT_OK
    assert (tmp_path / "env" / "scenario.json").exists()


def test_bad_inputs(tmp_path):
    assert main(["generate", "--users", "0", "--out", str(tmp_path)]) == EXIT_BAD_INPUT
    assert main(["solve", "--out", str(tmp_path / "missing")]) == EXIT_BAD_INPUT
    assert main(["compare", "--out", str(tmp_path)]) == EXIT_BAD_INPUT
    with pytest.raises(SystemExit):
        main(["solve", "--method", "nope"])
