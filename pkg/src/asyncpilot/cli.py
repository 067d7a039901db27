"""``asyncpilot`` command line: matrices, mse, sweep, delay-search, verify."""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .delays import SearchSpaceTooLarge, exhaustive_search, total_mse_closed_form
from .estimators import (
    ChannelProfile,
    SingularPilotSystem,
    analytic_mse_lmmse,
    analytic_mse_zf,
    zf_mse_upper_bound,
)
from .model import PilotKind, min_eigenvalue, training_matrices, write_matrix_csv
from .montecarlo import ResultRow, jobs_from_env, run_sweep, scenario_id
from .results import write_dat_files, write_rows
from .verify import run_verification

EXIT_OK, EXIT_CONFIG, EXIT_SINGULAR, EXIT_VERIFY = 0, 2, 3, 4


def _out_dir(args, cfg: ExperimentConfig | None = None) -> str:
    path = args.out or (cfg.output_path if cfg else ".")
    os.makedirs(path, exist_ok=True)
    return path


def _load(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("--config is required")
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed, schedule_seed=args.seed)
    return cfg


def cmd_matrices(args) -> int:
    cfg = _load(args)
    tm = training_matrices(cfg.schedule(), cfg.system)
    out = _out_dir(args, cfg)
    for name, M in (("R", tm.R), ("R_P", tm.R_P), ("A", tm.A)):
        write_matrix_csv(os.path.join(out, f"{name}.csv"), M)
    lam = np.linalg.eigvalsh(tm.A)
    print(f"R {tm.R.shape[0]}x{tm.R.shape[1]}, R_P {tm.R_P.shape[0]}x{tm.R_P.shape[1]}, "
          f"A {tm.A.shape[0]}x{tm.A.shape[1]} written to {out}")
    print(f"lambda_min(A) = {min_eigenvalue(tm.A):.17g}")
    if lam[0] <= 1e-10 * max(lam[-1], 0.0):
        print("warning: singular: pilot contamination")
    return EXIT_OK


def cmd_mse(args) -> int:
    cfg = _load(args)
    sysc = cfg.system
    sched = cfg.schedule()
    tm = training_matrices(sched, sysc)
    sid = scenario_id(sysc, sched.label or cfg.schedule_kind)
    seed = cfg.seed

    def row(metric, value):
        return ResultRow(sid, "analytic", "none", "", metric, value, math.nan, 0, seed)

    rows = []
    lmmse = analytic_mse_lmmse(tm.pilots, tm.R_P, ChannelProfile.uniform(cfg.K, cfg.N).R_HH, sysc.gamma)
    rows.append(row("mse_lmmse", lmmse))
    print(f"lmmse {lmmse!r}")
    code = EXIT_OK
    try:
        zf = analytic_mse_zf(tm.pilots, tm.R_P, sysc.gamma)
        bound = zf_mse_upper_bound(tm.A, sysc.gamma)
        rows += [row("mse_zf", zf), row("zf_bound", bound)]
        print(f"zf {zf!r} bound {bound!r}")
    except SingularPilotSystem as exc:
        rows.append(row("error:SingularPilotSystem", math.nan))
        print(f"zf error: {exc}", file=sys.stderr)
        code = EXIT_SINGULAR
    if cfg.schedule_kind == "equally_divided" and cfg.pilot is PilotKind.IDENTITY and cfg.T == 1.0:
        cf = total_mse_closed_form(cfg.K, cfg.N, sysc.gamma)
        rows.append(row("mse_closed_form", cf))
        print(f"closed_form {cf!r}")
    write_rows(os.path.join(_out_dir(args, cfg), "mse.csv"), rows, append=True)
    return code


def cmd_sweep(args) -> int:
    cfg = _load(args)
    spec = cfg.sweep_spec()
    rows = run_sweep(spec, cfg.seed, jobs_from_env(args.jobs))
    out = _out_dir(args, cfg)
    path = os.path.join(out, "sweep.csv")
    write_rows(path, rows)
    print(f"{len(rows)} rows written to {path}")
    if cfg.output_format == "csv+dat":
        for p in write_dat_files(out, rows):
            print(f"wrote {p}")
    return EXIT_OK


def cmd_delay_search(args) -> int:
    cfg = _load(args)
    res = exhaustive_search(cfg.system, cfg.search, jobs_from_env(args.jobs))
    path = os.path.join(_out_dir(args, cfg), "delay_search.csv")
    with open(path, "w") as fh:
        names = [f"tau_{k}_{n}" for k in range(1, cfg.K + 1) for n in range(1, cfg.N + 1)]
        fh.write(",".join(names + ["objective", "singular"]) + "\n")
        for *tau, value, singular in res.table_rows():
            cells = [f"{t:.17g}" for t in tau] + [f"{value:.17g}", str(singular).lower()]
            fh.write(",".join(cells) + "\n")
    best = ", ".join(f"{t:.17g}" for t in res.best.flat())
    print(f"{res.size} grid points written to {path}")
    print(f"best delays: {best}")
    print(f"objective {res.objective!r}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_verification(args.level, args.perturb_mu, jobs_from_env(args.jobs))
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--seed", type=int, metavar="U64")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--jobs", type=int, metavar="N",
                        help="worker processes (default: $ASYNCPILOT_JOBS or 1)")

    parser = argparse.ArgumentParser(prog="asyncpilot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("matrices", parents=[common], help="write R, R_P and A as CSV").set_defaults(fn=cmd_matrices)
    sub.add_parser("mse", parents=[common], help="analytic estimator MSEs").set_defaults(fn=cmd_mse)
    sub.add_parser("sweep", parents=[common], help="Monte Carlo rate sweep").set_defaults(fn=cmd_sweep)
    sub.add_parser("delay-search", parents=[common], help="exhaustive delay grid search").set_defaults(
        fn=cmd_delay_search)
    v = sub.add_parser("verify", parents=[common], help="numerical checks of the closed forms and optimality results")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    v.add_argument("--perturb-mu", type=float, default=0.0, help=argparse.SUPPRESS)
    v.set_defaults(fn=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, SearchSpaceTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularPilotSystem as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR


if __name__ == "__main__":
    sys.exit(main())
