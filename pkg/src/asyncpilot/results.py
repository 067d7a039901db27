"""Result CSV emission."""
from __future__ import annotations

import math
import os
from collections import defaultdict

from .montecarlo import ResultRow, sort_rows

HEADER = "scenario_id,arm,sweep_var,sweep_value,metric,value,ci_halfwidth,trials,seed"


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.17g}"
    return "" if v is None else str(v)


def format_row(row: ResultRow) -> str:
    return ",".join(_cell(getattr(row, name)) for name in HEADER.split(","))


def write_rows(path, rows, append: bool = False) -> None:
    """Write rows sorted by (sweep_value, arm, metric); ``append`` keeps earlier rows."""
    fresh = not append or not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "w" if fresh else "a", newline="") as fh:
        if fresh:
            fh.write(HEADER + "\n")
        for row in sort_rows(list(rows)):
            fh.write(format_row(row) + "\n")


def read_rows(path) -> list[dict]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != HEADER:
        raise ValueError(f"{path}: unexpected header")
    names = HEADER.split(",")
    return [dict(zip(names, line.split(","))) for line in lines[1:] if line]


def write_dat_files(directory, rows, stem: str = "sweep") -> list[str]:
    """Two-column ``sweep_value value`` files, one per arm, for plotting tools."""
    by_arm = defaultdict(list)
    for row in sort_rows(list(rows)):
        if row.metric == "average_rate":
            by_arm[row.arm].append(row)
    paths = []
    for arm, arm_rows in sorted(by_arm.items()):
        path = os.path.join(directory, f"{stem}_{arm}.dat")
        with open(path, "w") as fh:
            fh.write(f"# {arm_rows[0].sweep_var} {arm_rows[0].metric}\n")
            for row in arm_rows:
                fh.write(f"{_cell(row.sweep_value)} {_cell(row.value)}\n")
        paths.append(path)
    return paths
