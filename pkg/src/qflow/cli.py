"""``qflow`` command line: run, check, extremal, sweep.

Exit codes: 0 ok, 2 horizon reached without convergence, 3 blow-up, 4 I/O
error, 5 invalid initial data, 64 usage or configuration error.
"""

from __future__ import annotations

import argparse
import glob
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .checks import TARGETS, format_report, run_checks
from .config import InitialDataError, RunConfig, build_initial, parse_config
from .curvature import arc_length, scalar_curvature
from .errors import ConfigError, InsufficientDecayError, OrthogonalityError, PositivityError
from .flow import fit_decay_rate, prepare_initial, run
from .identities import ExtremalParams, extremal_metric, predicted_rate, steady_state_report
from .output import export_series, write_manifest, write_snapshot

EXIT_OK = 0
EXIT_HORIZON = 2
EXIT_BLOWUP = 3
EXIT_IO = 4
EXIT_INITIAL = 5
EXIT_USAGE = 64

# rate windows the acceptance runs use; a choice of this implementation
RATE_WINDOWS = {4.0: (15.0, 25.0), 1.0: (10.0, 30.0)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _err(msg: str) -> None:
    print(f"qflow: {msg}", file=sys.stderr)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _output_dir(cfg: RunConfig, config_path: Path, override: str | None) -> Path:
    if override:
        return Path(override)
    if cfg.output:
        return Path(cfg.base_dir) / cfg.output
    return config_path.with_name(config_path.stem + "_out")


def _decay_report(traj, alpha: float) -> dict:
    lo, hi = RATE_WINDOWS[alpha]
    base = {
        "predicted_rate": predicted_rate(alpha),
        "acceptance_window": [lo, hi],
        "window_note": "acceptance window is an implementation choice around the mode prediction",
    }
    try:
        fit = fit_decay_rate(traj)
    except InsufficientDecayError as exc:
        return {**base, "error": str(exc)}
    return {
        **base,
        "C": fit.C,
        "a": fit.a,
        "residual": fit.residual,
        "samples": fit.samples,
        "in_window": bool(lo <= fit.a <= hi),
    }


def cmd_run(config_path, out: str | None = None, quiet: bool = False) -> int:
    config_path = Path(config_path)
    try:
        text = config_path.read_text()
    except OSError as exc:
        _err(f"cannot read {config_path}: {exc}")
        return EXIT_IO
    try:
        cfg = parse_config(text, base_dir=str(config_path.parent))
    except ConfigError as exc:
        _err(f"{config_path}: {exc}")
        return EXIT_INITIAL if isinstance(exc, InitialDataError) else EXIT_USAGE
    start = _now()
    try:
        m0 = prepare_initial(build_initial(cfg), cfg.flow)
    except OSError as exc:
        _err(f"cannot read initial snapshot: {exc}")
        return EXIT_IO
    except OrthogonalityError as exc:
        _err(f"invalid initial data: {exc}")
        print(f"MomentVector: {json.dumps(list(exc.moments))}", file=sys.stderr)
        return EXIT_INITIAL
    except (InitialDataError, PositivityError, ValueError) as exc:
        _err(f"invalid initial data: {exc}")
        return EXIT_INITIAL

    traj = run(cfg.flow, m0, raise_on_blowup=False)
    code = {"converged": EXIT_OK, "horizon": EXIT_HORIZON}.get(traj.status, EXIT_BLOWUP)

    try:
        outdir = _output_dir(cfg, config_path, out)
        outdir.mkdir(parents=True, exist_ok=True)
        export_series(traj, outdir / "series.csv")
        final = traj.final
        write_snapshot(outdir / "final.json", final.v, cfg.flow.alpha, final.t)
        if traj.snapshots:
            snapdir = outdir / "snapshots"
            snapdir.mkdir(exist_ok=True)
            for i, (t, v) in enumerate(traj.snapshots):
                write_snapshot(snapdir / f"snap_{i:05d}.json", v, cfg.flow.alpha, t)
        manifest = {
            "version": __version__,
            "config": cfg.echo(),
            "N": cfg.flow.n,
            "alpha": cfg.flow.alpha,
            "initial": cfg.initial,
            "seed": cfg.seed,
            "start_time": start,
            "end_time": _now(),
            "status": traj.status,
            "exit_code": code,
            "message": traj.message,
            "t_final": final.t,
            "steps": len(traj.step_dt),
            "rejected_steps": traj.rejected,
            "max_length_drift": max(traj.step_drift, default=0.0),
            "max_moment_drift": max(traj.step_moment_drift, default=0.0),
            "final": {
                "Qbar": final.bundle.Qbar,
                "L": final.bundle.L,
                "G2": final.g2,
                "max_abs_Q_minus_1": float(np.max(np.abs(final.bundle.Q - 1.0))),
                "max_abs_R_minus_1": float(np.max(np.abs(scalar_curvature(final.m) - 1.0))),
            },
            "decay_fit": _decay_report(traj, cfg.flow.alpha),
        }
        write_manifest(outdir / "manifest.json", manifest)
    except OSError as exc:
        _err(f"cannot write outputs: {exc}")
        return EXIT_IO
    if not quiet:
        print(f"{config_path}: {traj.status} at t={final.t:.6g}, G2={final.g2:.3e} -> {outdir}")
    return code


def cmd_check(target: str, seed: int = 0, grid: int = 256, report: str | None = None) -> int:
    try:
        results = run_checks(target, seed, grid)
    except KeyError:
        _err(f"unknown check target {target!r}; choose from {', '.join(TARGETS + ('all',))}")
        return EXIT_USAGE
    text = format_report(target, seed, grid, results)
    sys.stdout.write(text)
    if report:
        try:
            Path(report).write_text(text)
        except OSError as exc:
            _err(f"cannot write report: {exc}")
            return EXIT_IO
    return EXIT_OK if all(r.passed for r in results) else 1


def cmd_extremal(alpha, lam, beta, c=1.0, normalize=False, grid=256, out=None) -> int:
    try:
        params = ExtremalParams(c=c, lam=lam, beta=beta, alpha=alpha)
        m = extremal_metric(params, grid)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    if normalize:
        scale = (arc_length(m) / (2 * np.pi)) ** 1.5
        m, c = m.scaled(scale), c * scale
    rep = steady_state_report(m)
    summary = {
        "alpha": m.alpha,
        "lambda": lam,
        "beta": beta,
        "c": c,
        "N": grid,
        "L": arc_length(m),
        "q_constancy": rep.q_constancy,
        "el_residual": rep.el_residual,
        "tau": rep.tau,
        "symm_residual": rep.symm_residual,
    }
    if out:
        try:
            write_snapshot(out, m.v, m.alpha, 0.0)
        except OSError as exc:
            _err(f"cannot write snapshot: {exc}")
            return EXIT_IO
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_sweep(pattern: str, out_root: str | None = None) -> int:
    paths = sorted(glob.glob(pattern))
    if not paths:
        _err(f"no configuration matches {pattern!r}")
        return EXIT_USAGE
    worst = EXIT_OK
    for p in paths:
        out = str(Path(out_root) / Path(p).stem) if out_root else None
        code = cmd_run(p, out=out, quiet=True)
        print(f"{p}\texit={code}")
        worst = max(worst, code)
    return worst


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qflow", description="Q-curvature flows on the circle.")
    ap.add_argument("--version", action="version", version=f"qflow {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="integrate one configuration")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: <config>_out)")

    p = sub.add_parser("check", help="run an identity suite")
    p.add_argument("target", help=" | ".join(TARGETS + ("all",)))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--report", help="also write the report to this file")

    p = sub.add_parser("extremal", help="generate and check an extremal metric")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--normalize-length", action="store_true")
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--out", help="write the factor as a snapshot file")

    p = sub.add_parser("sweep", help="run every configuration matching a glob")
    p.add_argument("pattern")
    p.add_argument("--out-root", help="put each run's outputs under this directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "run":
        return cmd_run(args.config, args.out)
    if args.cmd == "check":
        if args.grid < 16 or args.grid % 2:
            _err("--grid must be even and >= 16")
            return EXIT_USAGE
        return cmd_check(args.target, args.seed, args.grid, args.report)
    if args.cmd == "extremal":
        return cmd_extremal(
            args.alpha, args.lam, args.beta, args.c, args.normalize_length, args.grid, args.out
        )
    return cmd_sweep(args.pattern, args.out_root)


if __name__ == "__main__":
    sys.exit(main())
