import csv
import json
import math

import numpy as np
import pytest

from softpulse import cli
from softpulse.matcore import haar_unitary, matrix_to_json

CONFIG = {
    "system": {"j": 1.0, "omega1": 20.0, "omega2": 30.0, "b1": 1.0, "b2": 1.0, "c_bound": 2.0, "d_bound": 2.0},
    "tolerances": {"rot_tol": 1e-8, "lab_tol": 1e-5, "recon_tol": 1e-8},
    "step": 4e-4,
    "seed": 7,
}


@pytest.fixture
def work(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(CONFIG))
    rng = np.random.default_rng(11)
    for name in ("a", "b"):
        (tmp_path / f"{name}.json").write_text(json.dumps(matrix_to_json(haar_unitary(4, rng))))
    (tmp_path / "eye.json").write_text(json.dumps(matrix_to_json(np.eye(4))))
    return tmp_path


def run(*argv):
    return cli.main([str(a) for a in argv])


def compile_one(work, name="a"):
    code = run("compile", "--target", work / f"{name}.json", "--config", work / "cfg.json", "--out-dir", work / "out")
    assert code == 0
    return work / "out" / f"{name}.schedule.json"


def test_random_command(tmp_path):
    out = tmp_path / "r.json"
    assert run("random", "--out", out, "--seed", 3) == 0
    m = json.loads(out.read_text())
    assert len(m["rows"]) == 4


def test_decompose_identity(work):
    assert run("decompose", "--target", work / "eye.json", "--out-dir", work / "out") == 0
    rep = json.loads((work / "out" / "eye.decomposition.json").read_text())
    assert rep["ok"] and len(rep["factors"]) == 6 and rep["word_residual"] < 1e-12


def test_decompose_random(work):
    assert run("decompose", "--target", work / "a.json", "--out-dir", work / "out") == 0
    rep = json.loads((work / "out" / "a.decomposition.json").read_text())
    assert rep["word_residual"] < 1e-9
    assert all(f["residual"] < 1e-8 for f in rep["factors"])


def test_batch_with_jobs(work):
    code = run("decompose", "--target", work / "a.json", "--target", work / "b.json", "--jobs", 2, "--out-dir", work / "out")
    assert code == 0
    assert (work / "out" / "b.decomposition.json").exists()


def test_parse_and_unitarity_errors(work):
    (work / "bad.json").write_text("{not json")
    (work / "nonu.json").write_text(json.dumps(matrix_to_json(2 * np.eye(4))))
    (work / "shape.json").write_text(json.dumps(matrix_to_json(np.eye(3))))
    for name in ("bad", "nonu", "shape", "missing"):
        assert run("decompose", "--target", work / f"{name}.json", "--out-dir", work / "out") == 2
    (work / "badcfg.json").write_text(json.dumps({"tolerances": {"rot_tol": -1}}))
    assert run("compile", "--target", work / "a.json", "--config", work / "badcfg.json", "--out-dir", work) == 2
    assert run("compile", "--target", work / "a.json", "--max-area", 0, "--out-dir", work) == 2


def test_reconstruction_failure_exit(work, monkeypatch):
    real = cli.decompose

    def broken(s):
        dec = real(s)
        dec.factor_residuals[2] = 1e-3
        return dec

    monkeypatch.setattr(cli, "decompose", broken)
    assert run("decompose", "--target", work / "a.json", "--out-dir", work / "out") == 3
    rep = json.loads((work / "out" / "a.decomposition.json").read_text())
    assert not rep["ok"] and rep["factors"][2]["residual"] == 1e-3

    from softpulse.su4givens import ReductionFailure

    def raising(*args):
        raise ReductionFailure("forced")

    monkeypatch.setattr(cli, "compile_target", raising)
    assert run("compile", "--target", work / "a.json", "--out-dir", work / "out") == 3


def test_bound_violation_exit(work, monkeypatch):
    from softpulse.pulsec import RotSchedule

    monkeypatch.setattr(RotSchedule, "constraint_flags", lambda self, slack=0: {"o2_area": False})
    assert run("compile", "--target", work / "a.json", "--config", work / "cfg.json", "--out-dir", work / "out") == 4


def test_compile_outputs_and_determinism(work):
    sched = compile_one(work)
    first = sched.read_bytes()
    rot_first = (work / "out" / "a.rot.json").read_bytes()
    compile_one(work)
    assert sched.read_bytes() == first
    assert (work / "out" / "a.rot.json").read_bytes() == rot_first
    data = json.loads(first)
    assert set(data) == {"segments", "total_time", "frame"}
    assert data["frame"] == {"omega1": 20.0, "omega2": 30.0, "j": 1.0}
    seg = data["segments"][0]
    assert set(seg) == {"t_start", "duration", "amplitude", "spin", "phase"}
    assert all(s["phase"] in ("0", "pi/2") and s["spin"] in (1, 2) for s in data["segments"])
    assert math.isclose(math.fsum(s["duration"] for s in data["segments"]), data["total_time"], rel_tol=1e-12)
    summary = json.loads(rot_first)["summary"]
    assert summary["max_abs_b"] <= 2.0 and summary["max_ratio"] <= 2.0
    assert all(summary["constraints"].values())


def test_compile_identity(work):
    compile_one(work, "eye")


def test_compile_with_preset(work):
    code = run("compile", "--target", work / "a.json", "--config", work / "cfg.json", "--out-dir", work / "out",
               "--preset-remark2")
    assert code == 0
    fc = json.loads((work / "out" / "a.rot.json").read_text())["summary"]["frame_correction"]
    assert abs(fc["residual"]) < 1e-9


def test_verify_matched_pair(work):
    sched = compile_one(work)
    code = run("verify", "--target", work / "a.json", "--schedule", sched, "--config", work / "cfg.json",
               "--out-dir", work / "out", "--plot-samples", 50)
    assert code == 0
    rep = json.loads((work / "out" / "a.schedule.report.json").read_text())
    assert rep["passed"] and rep["rot_error"] < 1e-8 and rep["lab_error"] < 1e-5
    assert "removed_global_phase" in rep
    with open(work / "out" / "a.schedule.controls.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "spin", "u1", "u2"] and len(rows) == 1 + 2 * 50


def test_verify_mismatched_target(work):
    sched = compile_one(work)
    code = run("verify", "--target", work / "b.json", "--schedule", sched, "--config", work / "cfg.json",
               "--out-dir", work / "out", "--skip-lab")
    assert code == 5


def test_verify_corrupted_schedule(work):
    sched = compile_one(work)
    data = json.loads(sched.read_text())
    k = next(i for i, s in enumerate(data["segments"]) if s["amplitude"] != 0)
    data["segments"][k]["amplitude"] *= -1
    bad = work / "bad.schedule.json"
    bad.write_text(json.dumps(data))
    assert run("verify", "--target", work / "a.json", "--schedule", bad, "--config", work / "cfg.json",
               "--out-dir", work / "out", "--skip-lab") == 5


def test_verify_lab_tolerance(work):
    sched = compile_one(work)
    code = run("verify", "--target", work / "a.json", "--schedule", sched, "--config", work / "cfg.json",
               "--out-dir", work / "out", "--tol-lab", 1e-14, "--plot-samples", 2)
    assert code == 5


def test_verify_bad_schedule_inputs(work):
    sched = compile_one(work)
    (work / "junk.json").write_text(json.dumps({"segments": [{"t_start": 0}]}))
    assert run("verify", "--target", work / "a.json", "--schedule", work / "junk.json", "--out-dir", work) == 2
    gap = json.loads(sched.read_text())
    gap["segments"][3]["t_start"] += 0.5
    (work / "gap.json").write_text(json.dumps(gap))
    assert run("verify", "--target", work / "a.json", "--schedule", work / "gap.json", "--config", work / "cfg.json",
               "--out-dir", work, "--skip-lab") == 2
    # frame of the schedule disagrees with the configuration
    other = dict(CONFIG, system=dict(CONFIG["system"], omega1=21.0))
    (work / "other.json").write_text(json.dumps(other))
    assert run("verify", "--target", work / "a.json", "--schedule", sched, "--config", work / "other.json",
               "--out-dir", work, "--skip-lab") == 2
    # integrator step above the guard
    assert run("verify", "--target", work / "a.json", "--schedule", sched, "--config", work / "cfg.json",
               "--out-dir", work, "--step", 0.1) == 2


def test_rot_schedule_json_round_trip(work):
    compile_one(work)
    obj = json.loads((work / "out" / "a.rot.json").read_text())
    rs = cli.rot_from_json(obj)
    assert cli.rot_to_json(rs)["segments"] == obj["segments"]
