"""Command line entry point: ``dampedns {run,verify,sweep,resume}``.

Exit codes: 0 success, 2 user or config error, 3 numerical failure or a
failed check.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunSpec, apply_point, load_config, with_seed
from .diagnostics import (
    BAlpha,
    EnergyLedger,
    check_dz_inequality,
    check_energy_inequality,
    decay_function_check,
    dz_candidates_report,
)
from .dynamics import (
    BlowUpError,
    ConfigError,
    SimulationState,
    read_checkpoint,
    run,
    write_checkpoint,
)

EXIT_OK, EXIT_USER, EXIT_NUMERIC = 0, 2, 3
WORKERS_ENV = "DAMPEDNS_WORKERS"
MANIFEST = "manifest.json"
SUMMARY = "sweep_summary.csv"
SUMMARY_COLUMNS = (
    "kind", "alpha", "beta", "status", "exit_code", "final_kinetic_L2sq",
    "two_alpha_int_damping_L1", "energy_max_defect", "dz_min_margin", "directory",
)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _checkpoint_name(step: int) -> str:
    return f"checkpoint_{step:08d}.bin"


# checks


def _checks(spec: RunSpec, ledger: EnergyLedger):
    """Run the checks enabled in ``[checks]``; returns (reports, extra)."""
    ch = spec.checks
    cfg = spec.solver
    reports, extra = [], {}
    scale = ledger.rows[0]["kinetic_L2sq"]
    if ch.energy:
        mode = "theorem1.1" if cfg.damping.kind == "power" else "theorem1.2"
        tol = ch.energy_tolerance
        if ch.energy_rel_tolerance is not None:
            tol = ch.energy_rel_tolerance * scale
        reports.append(check_energy_inequality(ledger, mode, tol))
    if cfg.damping.kind == "log" and (ch.dz or ch.decay):
        b = BAlpha(cfg.damping.alpha)
        dz0 = ledger.rows[0]["dz_u_L2sq"]
        tol = None if ch.dz_rel_tolerance is None else ch.dz_rel_tolerance * dz0
        if ch.dz:
            reports.append(check_dz_inequality(ledger, b, ch.b_alpha, tol))
        if ch.decay:
            reports.append(decay_function_check(ledger, b, ch.b_alpha, tol))
    elif cfg.damping.kind == "power" and ch.dz:
        extra["dz_candidate_margins"] = dz_candidates_report(ledger)
    return reports, extra


def _write_outputs(out: Path, spec: RunSpec, ledger: EnergyLedger, started: str, status: str,
                   reports, extra, checkpoints, error=None) -> dict:
    cfg = spec.solver
    ledger_path = out / spec.output.ledger
    ledger.to_csv(ledger_path)
    report_path = out / "report.txt"
    text = "".join(r.to_text() + "\n" for r in reports)
    if error:
        text += f"error: {error}\n"
    report_path.write_text(text)
    files = [ledger_path, report_path] + [out / c for c in checkpoints]
    last = ledger.rows[-1]
    energy = next((r for r in reports if r.name.startswith("energy")), None)
    dz = next((r for r in reports if r.name.startswith("dz_envelope")), None)
    manifest = {
        "code_version": __version__,
        "seed": cfg.seed,
        "config": spec.raw,
        "solver": cfg.to_dict(),
        "config_hash": cfg.physics_hash(),
        "start_time": started,
        "end_time": _now(),
        "status": status,
        "checks": {r.name: "pass" if r.passed else "fail" for r in reports},
        "summary": {
            "kind": cfg.damping.kind,
            "alpha": cfg.damping.alpha,
            "beta": cfg.damping.beta,
            "t_final": last["t"],
            "final_kinetic_L2sq": last["kinetic_L2sq"],
            "two_alpha_int_damping_L1": last["two_alpha_int_damping_L1"],
            "energy_max_defect": energy.max_defect if energy else None,
            "dz_min_margin": dz.details["min_margin"] if dz else None,
            **extra,
        },
        "files": {p.name: _sha256(p) for p in files},
    }
    if error:
        manifest["error"] = error
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return manifest


def execute(spec: RunSpec, out: Path, state: SimulationState | None = None,
            ledger: EnergyLedger | None = None, checkpoints=()) -> int:
    """Integrate, persist and check one run; returns the exit code."""
    cfg = spec.solver
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    ledger = EnergyLedger.for_config(cfg) if ledger is None else ledger
    checkpoints = list(checkpoints)
    every = spec.output.checkpoint_every
    n_total = cfg.n_steps
    n = 0 if state is None else state.step_index
    try:
        while True:
            target = n_total if every == 0 else min(n_total, (n // every + 1) * every)
            if state is not None and target <= n:
                target = n_total
            chunk = replace(cfg, t_end=target * cfg.dt, check_cfl=False)
            state, ledger = run(chunk, state=state, ledger=ledger)
            n = state.step_index
            if spec.output.checkpoint and (n == n_total or every):
                name = _checkpoint_name(n)
                write_checkpoint(out / name, state, cfg, ledger)
                if name not in checkpoints:
                    checkpoints.append(name)
            if n >= n_total:
                break
    except BlowUpError as exc:
        report = (f"blow-up at step {exc.step}, t={exc.t:g}, first non-finite mode {exc.mode}")
        print(report, file=sys.stderr)
        _write_outputs(out, spec, ledger, started, "blow-up", [], {}, checkpoints, error=report)
        return EXIT_NUMERIC
    reports, extra = _checks(spec, ledger)
    passed = all(r.passed for r in reports)
    _write_outputs(out, spec, ledger, started, "ok" if passed else "check failed", reports, extra, checkpoints)
    for r in reports:
        print(f"{r.name}: {'pass' if r.passed else 'FAIL'} (max defect {r.max_defect:.3e}, "
              f"tolerance {r.tolerance:.3e}, worst t={r.worst_time:g})")
    return EXIT_OK if passed else EXIT_NUMERIC


# subcommands


def cmd_run(args) -> int:
    spec = with_seed(load_config(args.config), args.seed)
    if spec.sweep and any(len(v) > 1 for v in spec.sweep.values()):
        raise ConfigError(f"{args.config}: [sweep] has several points; use 'sweep'")
    spec = apply_point(spec, spec.sweep_points()[0])
    return execute(spec, Path(args.out))


def cmd_verify(args) -> int:
    from .suites import SUITES, format_table, run_suite

    name = args.suite
    if name not in SUITES and name != "all":
        raise ConfigError(f"unknown suite {name!r}; expected one of {sorted(SUITES) + ['all']}")
    rows = run_suite(name, seed=0 if args.seed is None else args.seed)
    print(format_table(rows))
    return EXIT_OK if all(r.passed for r in rows) else EXIT_NUMERIC


def _point_label(point: dict) -> str:
    if not point:
        return "point"
    return "_".join(f"{k}-{point[k]:g}" if isinstance(point[k], float) else f"{k}-{point[k]}"
                    for k in sorted(point))


def _sweep_child(spec, out: str) -> int:
    if isinstance(spec, str):
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "error.txt").write_text(spec + "\n")
        return EXIT_USER
    try:
        return execute(spec, Path(out))
    except ConfigError as exc:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "error.txt").write_text(f"{exc}\n")
        return EXIT_USER
    except Exception:  # child failures are recorded, the sweep goes on
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "error.txt").write_text(traceback.format_exc())
        return EXIT_NUMERIC


def _summary_key(row: dict):
    def num(v):
        return float("-inf") if v in ("", None) else float(v)
    return (row["kind"], num(row["alpha"]), num(row["beta"]), row["directory"])


def write_sweep_summary(out: Path) -> Path:
    """Assemble the summary CSV from child manifests, sorted by parameters."""
    plan = json.loads((out / "sweep.json").read_text())
    rows = []
    for child in plan["children"]:
        d = out / child["directory"]
        m = d / MANIFEST
        row = {c: "" for c in SUMMARY_COLUMNS}
        row.update(kind=child["kind"], alpha=child["alpha"], beta=child["beta"] if child["beta"] is not None else "",
                   directory=child["directory"])
        if m.exists():
            man = json.loads(m.read_text())
            s = man["summary"]
            row.update(status=man["status"],
                       exit_code=EXIT_OK if man["status"] == "ok" else EXIT_NUMERIC,
                       final_kinetic_L2sq=repr(s["final_kinetic_L2sq"]),
                       two_alpha_int_damping_L1=repr(s["two_alpha_int_damping_L1"]),
                       energy_max_defect="" if s["energy_max_defect"] is None else repr(s["energy_max_defect"]),
                       dz_min_margin="" if s["dz_min_margin"] is None else repr(s["dz_min_margin"]))
        else:
            row.update(status="failed", exit_code=EXIT_USER if (d / "error.txt").exists() else EXIT_NUMERIC)
        rows.append(row)
    rows.sort(key=_summary_key)
    path = out / SUMMARY
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path


def _workers(arg) -> int:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}={env!r} is not an integer") from None
    return os.cpu_count() or 1


def cmd_sweep(args) -> int:
    base = with_seed(load_config(args.config), args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    children = []
    for point in base.sweep_points():
        d = base.solver.damping
        meta = {"directory": _point_label(point), "kind": point.get("kind", d.kind),
                "alpha": point.get("alpha", d.alpha), "beta": point.get("beta", d.beta), "point": point}
        try:
            spec = apply_point(base, point)
        except (ConfigError, ValueError) as exc:
            # invalid point: recorded as a failed child, the rest still run
            spec = f"damping: {exc}"
        else:
            meta["beta"] = spec.solver.damping.beta
        children.append((spec, meta))
    (out / "sweep.json").write_text(json.dumps({"children": [c for _, c in children]}, indent=2) + "\n")
    workers = min(_workers(args.workers), len(children))
    codes = {}
    if workers == 1:
        for spec, meta in children:
            codes[meta["directory"]] = _sweep_child(spec, str(out / meta["directory"]))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_sweep_child, spec, str(out / meta["directory"])): meta["directory"]
                       for spec, meta in children}
            for fut in as_completed(futures):
                codes[futures[fut]] = fut.result()
    path = write_sweep_summary(out)
    print(f"summary: {path}")
    failed = sorted(k for k, v in codes.items() if v != EXIT_OK)
    for k in failed:
        print(f"child {k} failed with exit code {codes[k]}", file=sys.stderr)
    if not failed:
        return EXIT_OK
    return EXIT_USER if all(codes[k] == EXIT_USER for k in failed) else EXIT_NUMERIC


def cmd_resume(args) -> int:
    spec = with_seed(load_config(args.config), args.seed)
    spec = apply_point(spec, spec.sweep_points()[0]) if len(spec.sweep_points()) == 1 else spec
    ckpt = Path(args.checkpoint)
    state, header = read_checkpoint(ckpt)
    cfg = spec.solver
    if tuple(header["modes"]) != cfg.grid.modes or tuple(header["box"]) != cfg.grid.box:
        raise ConfigError(f"{ckpt}: grid {header['modes']} does not match config grid {list(cfg.grid.modes)}")
    if header.get("config_hash") != cfg.physics_hash():
        raise ConfigError(f"{ckpt}: config hash {header.get('config_hash')} does not match {cfg.physics_hash()}")
    if not header.get("ledger"):
        raise ConfigError(f"{ckpt}: checkpoint carries no ledger state")
    out = Path(args.out) if args.out else ckpt.parent
    resumed = EnergyLedger.from_resume_state(header["ledger"])
    previous = out / spec.output.ledger
    checkpoints = []
    if previous.exists():
        old = EnergyLedger.read_csv(previous)
        resumed.rows = [r for r in old.rows if r["t"] < state.t] + resumed.rows[-1:]
        man = out / MANIFEST
        if man.exists():
            files = json.loads(man.read_text()).get("files", {})
            checkpoints = [f for f in files if f.startswith("checkpoint_") and (out / f).exists()
                           and int(f[11:19]) <= state.step_index]
    code = execute(spec, out, state=state, ledger=resumed, checkpoints=checkpoints)
    if (out.parent / "sweep.json").exists():
        write_sweep_summary(out.parent)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dampedns", description="Damped anisotropic Navier-Stokes simulator and checks.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate one configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default="out")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run a property/oracle suite")
    v.add_argument("--suite", default="all")
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="run every point of the [sweep] grid")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="sweep")
    s.add_argument("--workers", type=int, help=f"parallel children (default ${WORKERS_ENV} or CPU count)")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("resume", help="continue a run from a checkpoint")
    c.add_argument("checkpoint", nargs="?")
    c.add_argument("--checkpoint", dest="checkpoint_flag")
    c.add_argument("--config", required=True)
    c.add_argument("--out")
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_resume)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors are user errors
        return EXIT_USER if exc.code else EXIT_OK
    if args.command == "resume":
        args.checkpoint = args.checkpoint_flag or args.checkpoint
        if not args.checkpoint:
            print("dampedns resume: a checkpoint path is required", file=sys.stderr)
            return EXIT_USER
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USER
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
