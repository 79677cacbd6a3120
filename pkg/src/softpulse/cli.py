"""
Command-line front end.

    softpulse random    --out target.json [--seed N]
    softpulse decompose --target T.json [--target ...] --out-dir DIR
    softpulse compile   --target T.json --config cfg.json --out-dir DIR
    softpulse verify    --target T.json --schedule S.json --config cfg.json --out-dir DIR

Exit codes: 0 ok, 2 bad input, 3 reconstruction failure, 4 bound violation,
5 verification outside tolerance.
"""

from __future__ import annotations

import argparse
import bisect
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import frame
from .frame import LabSchedule, LabSegment, SystemParams
from .matcore import Generator, haar_unitary, matrix_to_json, read_target
from .pipeline import compile_target, decompose
from .pulsec import RotSchedule, Segment
from .simkit import StepTooLarge, verify
from .su4cartan import CartanFailure, NoRoot
from .su4givens import ReductionFailure

log = logging.getLogger("softpulse")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RECON = 3
EXIT_BOUND = 4
EXIT_VERIFY = 5

WORD_TOL = 1e-9
DEFAULT_STEP = 1e-4 * 2 * math.pi / 30


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    system: SystemParams = field(default_factory=SystemParams)
    rot_tol: float = 1e-8
    lab_tol: float = 1e-5
    recon_tol: float = 1e-8
    step: float = DEFAULT_STEP
    seed: int = 0

    def __post_init__(self):
        for name in ("rot_tol", "lab_tol", "recon_tol", "step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        raw = json.loads(Path(path).read_text())
        system = SystemParams(**raw.get("system", {}))
        tol = raw.get("tolerances", {})
        return RunConfig(
            system=system,
            rot_tol=float(tol.get("rot_tol", 1e-8)),
            lab_tol=float(tol.get("lab_tol", 1e-5)),
            recon_tol=float(tol.get("recon_tol", 1e-8)),
            step=float(raw.get("step", DEFAULT_STEP)),
            seed=int(raw.get("seed", 0)),
        )
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(EXIT_INPUT, f"bad config {path}: {exc}") from exc


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    system = cfg.system
    try:
        if getattr(args, "max_area", None) is not None:
            system = replace(system, c_bound=args.max_area)
        if getattr(args, "max_amp", None) is not None:
            system = replace(system, d_bound=args.max_amp)
        updates = {"system": system}
        for flag, name in (("tol_rot", "rot_tol"), ("tol_lab", "lab_tol"), ("step", "step"), ("seed", "seed")):
            if getattr(args, flag, None) is not None:
                updates[name] = getattr(args, flag)
        return replace(cfg, **updates)
    except ValueError as exc:
        raise CliError(EXIT_INPUT, str(exc)) from exc


# serialization


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def load_target(path: str):
    try:
        obj = json.loads(Path(path).read_text())
        return read_target(obj)
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_INPUT, f"cannot use target {path}: {exc}") from exc


def rot_to_json(rs: RotSchedule) -> dict:
    return {
        "segments": [{"a": s.a, "b": s.b, "gen": None if s.gen is None else s.gen.value} for s in rs.segments],
        "c_bound": rs.c_bound,
        "d_bound": rs.d_bound,
    }


def rot_from_json(obj: dict) -> RotSchedule:
    segs = [
        Segment(float(s["a"]), float(s.get("b", 0.0)), None if s.get("gen") is None else Generator(s["gen"]))
        for s in obj["segments"]
    ]
    return RotSchedule(segs, float(obj.get("c_bound", math.inf)), float(obj.get("d_bound", math.inf)))


def lab_to_json(ls: LabSchedule, p: SystemParams) -> dict:
    return {
        "segments": [
            {
                "t_start": s.t_start,
                "duration": s.duration,
                "amplitude": s.amplitude,
                "spin": s.spin,
                "phase": "0" if s.phase == 0.0 else "pi/2",
            }
            for s in ls.segments
        ],
        "total_time": ls.total_time,
        "frame": {"omega1": p.omega1, "omega2": p.omega2, "j": p.j},
    }


def lab_from_json(obj: dict) -> LabSchedule:
    phases = {"0": 0.0, "pi/2": math.pi / 2}
    try:
        segs = [
            LabSegment(float(s["t_start"]), float(s["duration"]), float(s["amplitude"]),
                       int(s["spin"]), phases[s["phase"]])
            for s in obj["segments"]
        ]
        ls = LabSchedule(segs, float(obj["total_time"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed schedule: {exc}") from exc
    slack = 1e-9 * max(1.0, ls.total_time)
    for seg, start in zip(ls.segments, ls.exact_starts()):
        if not seg.duration > 0 or abs(seg.t_start - float(start)) > slack:
            raise ValueError(f"schedule is not contiguous at t_start={seg.t_start!r}")
    if abs(float(ls.exact_total()) - ls.total_time) > slack:
        raise ValueError("total_time does not match the segment durations")
    return ls


def params_to_json(p) -> dict:
    return {
        "k1": matrix_to_json(p.k1), "k2": matrix_to_json(p.k2),
        "k3": matrix_to_json(p.k3), "k4": matrix_to_json(p.k4),
        "theta": [p.theta1, p.theta2, p.theta3],
        "branch": p.branch,
        "fallback_used": p.fallback_used,
    }


def sample_controls(ls: LabSchedule, p: SystemParams, samples: int):
    """Rows (t, spin, u1, u2) on a uniform grid over [0, T_S]."""
    starts = [s.t_start for s in ls.segments]
    grid = np.linspace(0.0, ls.total_time, samples) if samples > 1 else np.zeros(1)
    for t in grid:
        k = max(0, bisect.bisect_right(starts, t) - 1)
        seg = ls.segments[k] if ls.segments else None
        for spin in (1, 2):
            u1 = u2 = 0.0
            if seg is not None and not seg.is_free and seg.spin == spin:
                ph = p.omega(spin) * t + seg.phase
                u1, u2 = seg.amplitude * math.cos(ph), seg.amplitude * math.sin(ph)
            yield float(t), spin, u1, u2


# commands


def _stem(path: str) -> str:
    return Path(path).stem


def run_decompose(target_path: str, cfg: RunConfig, out_dir: Path) -> int:
    s, phase = load_target(target_path)
    try:
        dec = decompose(s)
    except (ReductionFailure, CartanFailure, NoRoot) as exc:
        raise CliError(EXIT_RECON, f"{target_path}: {exc}") from exc
    ok = max(dec.factor_residuals) < cfg.recon_tol and dec.word_residual < WORD_TOL
    report = {
        "target": target_path,
        "removed_global_phase": phase,
        "factors": [
            {"kind": f.kind.value, "core": matrix_to_json(f.core), "residual": r, "cartan": params_to_json(p)}
            for f, p, r in zip(dec.factors, dec.params, dec.factor_residuals)
        ],
        "word": [{"gen": f.gen.value, "t": f.t} for f in dec.word],
        "word_residual": dec.word_residual,
        "ok": ok,
    }
    write_json(out_dir / f"{_stem(target_path)}.decomposition.json", report)
    if not ok:
        raise CliError(EXIT_RECON, f"{target_path}: reconstruction residuals {dec.factor_residuals}, "
                                   f"word {dec.word_residual:.3e}")
    return EXIT_OK


def _correction(total_time: float, p: SystemParams) -> dict:
    t0 = frame.frame_correction_time(total_time, p, frame.preset_time_of(total_time, p))
    return {"t0": t0, "residual": frame.preset_residual(t0, total_time, p)}


def run_compile(target_path: str, cfg: RunConfig, out_dir: Path, preset: bool = False) -> int:
    s, phase = load_target(target_path)
    try:
        comp = compile_target(s, cfg.system)
    except (ReductionFailure, CartanFailure, NoRoot) as exc:
        raise CliError(EXIT_RECON, f"{target_path}: {exc}") from exc
    dec = comp.decomposition
    if max(dec.factor_residuals) >= cfg.recon_tol or dec.word_residual >= WORD_TOL:
        raise CliError(EXIT_RECON, f"{target_path}: reconstruction residual too large")
    stem = _stem(target_path)
    summary = comp.rot.summary()
    summary["total_time"] = comp.lab.total_time
    summary["constraints"] = comp.rot.constraint_flags()
    summary["removed_global_phase"] = phase
    if preset:
        summary["frame_correction"] = _correction(comp.lab.total_time, cfg.system)
    rot = rot_to_json(comp.rot)
    rot["summary"] = summary
    write_json(out_dir / f"{stem}.rot.json", rot)
    write_json(out_dir / f"{stem}.schedule.json", lab_to_json(comp.lab, cfg.system))
    if not all(summary["constraints"].values()):
        raise CliError(EXIT_BOUND, f"{target_path}: emitted schedule violates its bounds {summary['constraints']}")
    return EXIT_OK


def run_verify(target_path: str, schedule_path: str, cfg: RunConfig, out_dir: Path,
               skip_lab: bool = False, samples: int = 2000) -> int:
    s, phase = load_target(target_path)
    p = cfg.system
    try:
        raw = json.loads(Path(schedule_path).read_text())
        ls = lab_from_json(raw)
        fr = raw.get("frame", {})
        mismatch = {k: v for k, v in fr.items() if not math.isclose(v, getattr(p, k), rel_tol=1e-15)}
        if mismatch:
            raise ValueError(f"schedule frame {mismatch} disagrees with config")
        rs = frame.rot_schedule_from_lab(ls, p)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(EXIT_INPUT, f"cannot use schedule {schedule_path}: {exc}") from exc
    try:
        report = verify(s, rs, ls, p, None if skip_lab else cfg.step, removed_global_phase=phase)
    except StepTooLarge as exc:
        raise CliError(EXIT_INPUT, str(exc)) from exc
    stem = _stem(schedule_path)
    out = report.to_dict()
    out["rot_tol"], out["lab_tol"] = cfg.rot_tol, cfg.lab_tol
    passed = report.rot_error <= cfg.rot_tol and (skip_lab or report.lab_error <= cfg.lab_tol)
    out["passed"] = passed
    if skip_lab:
        out["lab_error"] = None
    write_json(out_dir / f"{stem}.report.json", out)
    with open(out_dir / f"{stem}.controls.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "spin", "u1", "u2"])
        for row in sample_controls(ls, p, samples):
            w.writerow([repr(x) for x in row])
    if not passed:
        raise CliError(EXIT_VERIFY, f"verification failed: rot_error={report.rot_error:.3e}, "
                                    f"lab_error={report.lab_error:.3e}")
    return EXIT_OK


def cmd_random(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    u = haar_unitary(4, rng)
    write_json(Path(args.out), matrix_to_json(u))
    return EXIT_OK


def _guarded(fn, *a, **kw) -> int:
    try:
        return fn(*a, **kw)
    except CliError as exc:
        log.error("%s", exc)
        return exc.code


def _batch(fn, targets, jobs: int, *rest, **kw) -> int:
    if jobs > 1 and len(targets) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(_guarded, [fn] * len(targets), targets, *[[r] * len(targets) for r in rest]))
    else:
        codes = [_guarded(fn, t, *rest, **kw) for t in targets]
    return max(codes, default=EXIT_OK)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="softpulse", description="Compile SU(4) targets into bounded soft pulses.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, multi=True):
        if multi:
            p.add_argument("--target", action="append", required=True, help="target matrix JSON (repeatable)")
        else:
            p.add_argument("--target", required=True)
        p.add_argument("--config")
        p.add_argument("--out-dir", default=".")
        p.add_argument("--tol-rot", type=float)
        p.add_argument("--tol-lab", type=float)
        p.add_argument("--max-area", type=float, help="bound C on each control area")
        p.add_argument("--max-amp", type=float, help="bound D on each amplitude ratio")
        p.add_argument("--step", type=float, help="lab integrator step, seconds")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("decompose", help="Givens + Cartan + factor word")
    common(p)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("compile", help="rotating-frame and lab schedules")
    common(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--preset-remark2", action="store_true",
                   help="also solve the published frame-correction equation for T0")

    p = sub.add_parser("verify", help="propagate a lab schedule and compare with the target")
    common(p, multi=False)
    p.add_argument("--schedule", required=True)
    p.add_argument("--skip-lab", action="store_true", help="rotating-frame check only")
    p.add_argument("--plot-samples", type=int, default=2000)

    p = sub.add_parser("random", help="write a Haar-random U(4) target")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "random":
        return cmd_random(args)
    try:
        cfg = apply_overrides(load_config(args.config), args)
    except CliError as exc:
        log.error("%s", exc)
        return exc.code
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.command == "decompose":
        return _batch(run_decompose, args.target, args.jobs, cfg, out_dir)
    if args.command == "compile":
        return _batch(run_compile, args.target, args.jobs, cfg, out_dir, args.preset_remark2)
    return _guarded(run_verify, args.target, args.schedule, cfg, out_dir, args.skip_lab, args.plot_samples)


if __name__ == "__main__":
    sys.exit(main())
