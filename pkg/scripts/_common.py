import argparse
import os

from asyncpilot.montecarlo import run_sweep
from asyncpilot.results import write_dat_files, write_rows


def parser(description, trials=1000):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", default="results")
    return p


def run_and_save(spec, args, stem):
    rows = run_sweep(spec, args.seed, args.jobs)
    os.makedirs(args.out, exist_ok=True)
    write_rows(os.path.join(args.out, f"{stem}.csv"), rows)
    write_dat_files(args.out, rows, stem)
    return rows


def print_table(rows, label):
    print(f"{label:>16} {'arm':<24} {'rate':>8} {'ci95':>8}")
    for r in rows:
        print(f"{str(r.sweep_value):>16} {r.arm:<24} {r.value:8.4f} {r.ci_halfwidth:8.4f}")
