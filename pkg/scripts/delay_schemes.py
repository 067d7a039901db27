"""Delay schemes compared: equally divided, grid-searched, uniform random and synchronous.

Also prints the analytic ZF MSE of each deterministic schedule.
"""
from _common import parser, print_table, run_and_save

from asyncpilot.delays import SearchSpaceTooLarge, SearchSpec, equally_divided_schedule, exhaustive_search
from asyncpilot.estimators import SingularPilotSystem, analytic_mse_zf
from asyncpilot.model import DelaySchedule, SystemConfig, training_matrices
from asyncpilot.montecarlo import SweepSpec

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--snr-db", type=float, default=20.0)
    args = p.parse_args()
    cfg = SystemConfig(K=args.K, N=args.N, M=64, gamma=10 ** (args.snr_db / 10))

    schedules = {"equally_divided": equally_divided_schedule(cfg.K, cfg.N),
                 "synchronous": DelaySchedule.synchronous(cfg.K, cfg.N)}
    schemes = ["equally_divided", "random", "synchronous"]
    try:
        schedules["exhaustive"] = exhaustive_search(cfg, SearchSpec(), args.jobs).best
        schemes.append("exhaustive")
    except SearchSpaceTooLarge as exc:
        print(f"grid search skipped: {exc}")
    for name, sched in schedules.items():
        tm = training_matrices(sched, cfg)
        try:
            mse = f"{analytic_mse_zf(tm.pilots, tm.R_P, cfg.gamma):.6g}"
        except SingularPilotSystem:
            mse = "singular"
        print(f"{name:<16} delays {sched.flat().round(4).tolist()}  zf mse {mse}")

    spec = SweepSpec("delay_scheme", tuple(schemes), cfg, args.trials)
    print()
    print_table(run_and_save(spec, args, f"delay_schemes_K{cfg.K}_N{cfg.N}"), "scheme")
