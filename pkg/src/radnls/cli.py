"""Command-line entry point: ``radnls <subcommand> ...``.

Exit codes: 0 scattering-consistent (or success), 2 blow-up, 3 inconclusive,
4 data not below threshold (``classify``), 1 error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import serialize
from .config import PRESETS, ExperimentConfig, load_config, preset, save_config
from .diagnostics import EXIT_CODES, prepare, run_safely
from .errors import RadNLSError
from .evolve import conservation_report, evolve
from .grid import make_grid
from .groundstate import default_grid, pohozaev_residuals, shoot_ground_state, threshold_identity_error
from .morawetz import spacetime_estimate

log = logging.getLogger("radnls")

EXIT_ERROR = 1
EXIT_NOT_BELOW = 4


def _emit(data: dict):
    print(json.dumps(serialize._clean(data), indent=2))


def _config(args) -> ExperimentConfig:
    if args.preset:
        cfg = preset(args.preset)
    elif args.config:
        cfg = load_config(args.config)
    else:
        raise RadNLSError("give --config PATH or --preset NAME")
    if getattr(args, "out", None):
        cfg = cfg.replace(outputs=args.out)
    return cfg


def _out_dir(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.outputs)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_ground_state(args) -> int:
    grid = make_grid(args.r_max, args.n) if args.r_max else default_grid()
    g = shoot_ground_state(args.p, args.tol, grid)
    rho1, rho2 = pohozaev_residuals(g)
    record = g.as_dict()
    _emit({**record, "pohozaev": [rho1, rho2], "identity_error": threshold_identity_error(g)})
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        serialize.write_json(out / "ground_state.json", record)
        serialize.write_profile_csv(out / "ground_state.csv", g.field)
    return 0


def cmd_classify(args) -> int:
    cfg = _config(args)
    _, _, _, report, lam = prepare(cfg)
    _emit({**report.as_dict(), "scale_lambda": lam})
    return 0 if report.below else EXIT_NOT_BELOW


def _evolved(cfg):
    _, _, u0, report, lam = prepare(cfg)
    return evolve(u0, cfg.evolve_config), report


def cmd_evolve(args) -> int:
    cfg = _config(args)
    traj, _ = _evolved(cfg)
    out = _out_dir(cfg)
    serialize.write_monitors_csv(out / "monitors.csv", traj)
    if cfg.trajectory_format == "csv":
        serialize.write_trajectory_csv(out / "trajectory.csv", traj)
    elif cfg.trajectory_format == "binary":
        serialize.write_trajectory_binary(out / "trajectory.bin", traj)
    rep = conservation_report(traj, cfg.boundary_threshold)
    summary = {
        **rep.as_dict(),
        "snapshots": len(traj),
        "blowup": traj.blowup,
        "halt_time": traj.halt_time,
    }
    serialize.write_json(out / "conservation.json", summary)
    _emit(summary)
    return EXIT_CODES["blow-up"] if traj.blowup else 0


def cmd_morawetz(args) -> int:
    cfg = _config(args)
    traj, _ = _evolved(cfg)
    series = spacetime_estimate(traj, cfg.R_policy, cfg.p, cfg.R, cfg.fit_window)
    out = _out_dir(cfg)
    serialize.write_table(out / "morawetz.csv", *series.rows())
    serialize.write_json(out / "morawetz.json", series.summary())
    _emit(series.summary())
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    code, verdict, err = run_safely(cfg)
    if verdict is None:
        print(err, file=sys.stderr)
        return code
    _emit(verdict.as_dict())
    return code


def _sweep_one(path_and_out):
    path, out = path_and_out
    try:
        cfg = load_config(path)
    except RadNLSError as exc:
        return str(path), EXIT_ERROR, "", str(exc)
    target = Path(out or cfg.outputs) / cfg.name
    code, verdict, err = run_safely(cfg.replace(outputs=str(target)))
    return str(path), code, verdict.outcome if verdict else "error", err


def cmd_sweep(args) -> int:
    folder = Path(args.config_dir)
    paths = sorted(p for p in folder.iterdir() if p.suffix in (".cfg", ".json", ".txt"))
    if not paths:
        print(f"no config files in {folder}", file=sys.stderr)
        return EXIT_ERROR
    jobs = [(p, args.out) for p in paths]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    worst = 0
    for path, code, outcome, err in results:
        print(f"{path}\t{outcome}\t{code}" + (f"\t{err}" if err else ""))
        if code == EXIT_ERROR:
            worst = EXIT_ERROR
    return worst


def cmd_presets(args) -> int:
    if args.write:
        out = Path(args.write)
        out.mkdir(parents=True, exist_ok=True)
        for name in PRESETS:
            print(save_config(preset(name), out / f"{name}.cfg"))
    else:
        for name in PRESETS:
            print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radnls",
        description="Ground states, threshold classification and scattering diagnostics "
        "for the 2D radial focusing NLS.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gs = sub.add_parser("ground-state", help="compute Q and its constants")
    gs.add_argument("--p", type=float, required=True)
    gs.add_argument("--tol", type=float, default=1e-12)
    gs.add_argument("--r-max", type=float, default=None)
    gs.add_argument("--n", type=int, default=3000)
    gs.add_argument("--out", default=None, help="directory for ground_state.{json,csv}")
    gs.set_defaults(func=cmd_ground_state)

    for name, func, text in (
        ("classify", cmd_classify, "threshold report for the configured data"),
        ("evolve", cmd_evolve, "evolve and write monitors and snapshots"),
        ("morawetz", cmd_morawetz, "evolve and write the Morawetz series"),
        ("run", cmd_run, "full pipeline with verdict"),
    ):
        p = sub.add_parser(name, help=text)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="key = value or JSON config file")
        src.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--out", default=None, help="override the outputs directory")
        p.set_defaults(func=func)

    sw = sub.add_parser("sweep", help="run every config in a directory")
    sw.add_argument("--config-dir", required=True)
    sw.add_argument("--out", default=None, help="base directory; each run uses <out>/<name>")
    sw.add_argument("--jobs", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)

    pr = sub.add_parser("presets", help="list presets or write them as config files")
    pr.add_argument("--write", default=None, metavar="DIR")
    pr.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (RadNLSError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
