"""Delay schedules: the equally-divided layout, closed forms, grid search and
numerical checks of the optimality argument for it."""
from __future__ import annotations

import enum
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import DelaySchedule, PilotKind, SystemConfig, pilot_gram, pilot_rows

SEARCH_CAP = 10**7
SINGULAR_RTOL = 1e-10
_CHUNK = 20000


class SearchSpaceTooLarge(ValueError):
    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"search space has {size} points, cap is {cap}")


class Objective(str, enum.Enum):
    TRACE_INV_A = "trace_inv_a"
    AVERAGE_RATE = "average_rate"


@dataclass(frozen=True)
class SearchSpec:
    grid_step: float = 0.05
    fixed_reference: bool = True
    objective: Objective = Objective.TRACE_INV_A
    cap: int = SEARCH_CAP
    # only used by the AverageRate objective
    trials: int = 50
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "objective", Objective(self.objective))
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")


@dataclass(frozen=True, eq=False)
class SearchResult:
    best: DelaySchedule
    objective: float
    size: int
    grid: np.ndarray  # (points, NK) delays
    values: np.ndarray  # objective per point (+inf where singular)
    singular: np.ndarray

    def table_rows(self):
        for tau, v, s in zip(self.grid, self.values, self.singular):
            yield (*tau.tolist(), float(v), bool(s))


@dataclass(frozen=True)
class GroupLayout:
    """Boundaries ``0 = theta_0 <= ... <= theta_N = T`` of the pilot groups."""

    theta: tuple[float, ...]

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        if th[0] != 0 or np.any(np.diff(th) < 0):
            raise ValueError("boundaries must start at 0 and be non-decreasing")

    @classmethod
    def equal(cls, N: int, T: float = 1.0) -> "GroupLayout":
        return cls(tuple(i * T / N for i in range(N + 1)))

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.theta)


def equally_divided_schedule(K: int, N: int, T: float = 1.0) -> DelaySchedule:
    """Group ``n`` spans ``[(n-1)T/N, nT/N]``; cell ``k`` sits ``(k-1)/(K-1)`` of the way in."""
    if K < 1 or N < 1:
        raise ValueError("K and N must be positive")
    k = np.arange(K)[:, None]
    n = np.arange(N)[None, :]
    if K == 1:
        return DelaySchedule(n * T / N + 0.0 * k, T, "equally_divided")
    label = "equally_divided"
    if K > 7:
        warnings.warn(f"optimality of the equally-divided schedule is unproven for K={K} > 7")
        label = "equally_divided (optimality unproven)"
    tau = (n + k / (K - 1)) * T / N
    return DelaySchedule(np.clip(tau, 0.0, T), T, label)


def schedule_from_layout(K: int, layout: GroupLayout, T: float = 1.0) -> DelaySchedule:
    """Equal intra-group spacing inside arbitrary group boundaries."""
    th = np.asarray(layout.theta)
    N = len(th) - 1
    frac = np.arange(K)[:, None] / max(K - 1, 1)
    tau = th[None, :-1] + frac * np.diff(th)[None, :]
    return DelaySchedule(np.clip(tau, 0.0, T), T, "layout")


@dataclass(frozen=True)
class InterferenceReport:
    ok: bool
    violations: list = field(default_factory=list)  # ((k1, n1), (k2, n2), |A entry|)
    ordering_ok: bool = True


def check_interference_free(schedule: DelaySchedule, config: SystemConfig, tol: float = 1e-12) -> InterferenceReport:
    """Cross-pilot entries of ``A`` for identity pilots; all must vanish."""
    if PilotKind(config.pilot_kind) is not PilotKind.IDENTITY:
        raise ValueError("interference-free ordering is only defined for identity pilots")
    A = pilot_gram(schedule.flat(), pilot_rows(config.N, PilotKind.IDENTITY), schedule.T)
    violations = []
    for r in range(config.NK):
        for t in range(r + 1, config.NK):
            if config.pilot_of(r) == config.pilot_of(t):
                continue
            if abs(A[r, t]) > tol:
                violations.append((config.ue(r), config.ue(t), float(abs(A[r, t]))))
    ordering_ok = all(
        schedule[k1, n] <= schedule[k2, n + 1]
        for n in range(1, config.N)
        for k1 in range(1, config.K + 1)
        for k2 in range(1, config.K + 1)
    )
    return InterferenceReport(not violations, violations, ordering_ok)


def group_A(deltas) -> np.ndarray:
    """Same-pilot Gram matrix for consecutive normalised gaps ``deltas``."""
    d = np.asarray(deltas, dtype=float)
    if np.any(d < 0) or d.sum() > 1 + 1e-12:
        raise ValueError("gaps must be non-negative and sum to at most 1")
    pos = np.concatenate([[0.0], np.cumsum(d)])
    return 1.0 - np.abs(pos[:, None] - pos[None, :])


def exchange(K: int) -> np.ndarray:
    return np.eye(K)[::-1]


def inverse_A_closed_form(K: int, delta_prime: float, mu_offset: float = 0.0) -> np.ndarray:
    """Inverse of the equal-gap group matrix: tridiagonal plus corner corrections.

    ``mu_offset`` perturbs the corner coefficient; it exists so the verification
    suite can exercise its own failure path.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    if not delta_prime > 0:
        raise ValueError("delta_prime must be positive (delta_prime = 0 makes A singular)")
    if delta_prime > 1.0 / (K - 1) + 1e-12:
        raise ValueError(f"delta_prime must be at most 1/(K-1) = {1 / (K - 1)}")
    mu = delta_prime / ((K - 1) * delta_prime - 2) + mu_offset
    Ainv = 2 * np.eye(K) - np.eye(K, k=1) - np.eye(K, k=-1)
    Ainv[0, 0] = Ainv[-1, -1] = 1 - mu
    Ainv[0, -1] -= mu
    Ainv[-1, 0] -= mu
    return Ainv / (2 * delta_prime)


def group_mse_closed_form(K: int, Delta: float, gamma: float, T: float = 1.0) -> float:
    if not 0 < Delta <= T:
        raise ValueError("group width must lie in (0, T]")
    return T / (K * gamma) * ((K - 1) ** 2 / Delta + 1 / (2 * T - Delta))


def mean_group_mse(K: int, widths, gamma: float, T: float = 1.0) -> float:
    return float(np.mean([group_mse_closed_form(K, w, gamma, T) for w in widths]))


def total_mse_closed_form(K: int, N: int, gamma: float) -> float:
    return N / (K * gamma) * ((K - 1) ** 2 + 1 / (2 * N - 1))


def _grid(step: float, T: float) -> np.ndarray:
    n = round(T / step)
    if abs(n * step - T) > 1e-12:
        raise ValueError(f"grid step {step} does not divide T={T}")
    return np.linspace(0.0, T, n + 1)


def search_size(config: SystemConfig, spec: SearchSpec) -> int:
    points = len(_grid(spec.grid_step, config.T))
    free = config.NK - (1 if spec.fixed_reference else 0)
    return points**free


def _grid_chunk(args):
    start, stop, free, axis, fixed, rows, T, gamma = args
    idx = np.stack(np.unravel_index(np.arange(start, stop), (len(axis),) * free), axis=-1)
    tau = axis[idx]
    if fixed:
        tau = np.concatenate([np.zeros((len(tau), 1)), tau], axis=1)
    A = pilot_gram(tau, rows, T)
    lam = np.linalg.eigvalsh(A)
    singular = lam[:, 0] <= SINGULAR_RTOL * np.maximum(lam[:, -1], 0.0)
    with np.errstate(divide="ignore"):
        values = np.sum(1.0 / lam, axis=1) / (tau.shape[1] * gamma)
    values[singular] = np.inf
    return tau, values, singular


def _jobs(jobs: int | None) -> int:
    if jobs is None:
        jobs = int(os.environ.get("ASYNCPILOT_JOBS", "1"))
    return max(1, int(jobs))


def exhaustive_search(config: SystemConfig, spec: SearchSpec = SearchSpec(), jobs: int | None = None) -> SearchResult:
    """Enumerate every grid schedule and keep the best one.

    TraceInvA minimises the ZF MSE ``tr(A^-1) / (NK gamma)``; AverageRate maximises
    the Monte Carlo uplink rate.  Ties go to the lexicographically smallest delay
    vector, which is also the enumeration order.
    """
    axis = _grid(spec.grid_step, config.T)
    size = search_size(config, spec)
    if size > spec.cap:
        raise SearchSpaceTooLarge(size, spec.cap)
    free = config.NK - (1 if spec.fixed_reference else 0)
    rows = pilot_rows(config.N, config.pilot_kind)

    if spec.objective is Objective.TRACE_INV_A:
        tasks = [
            (s, min(s + _CHUNK, size), free, axis, spec.fixed_reference, rows, config.T, config.gamma)
            for s in range(0, size, _CHUNK)
        ]
        n_jobs = _jobs(jobs)
        if n_jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(n_jobs) as ex:
                parts = list(ex.map(_grid_chunk, tasks))
        else:
            parts = [_grid_chunk(t) for t in tasks]
        grid = np.concatenate([p[0] for p in parts])
        values = np.concatenate([p[1] for p in parts])
        singular = np.concatenate([p[2] for p in parts])
        score = values
    else:
        from .montecarlo import average_rate

        idx = np.stack(np.unravel_index(np.arange(size), (len(axis),) * free), axis=-1)
        grid = axis[idx]
        if spec.fixed_reference:
            grid = np.concatenate([np.zeros((size, 1)), grid], axis=1)
        values = np.empty(size)
        for i, tau in enumerate(grid):
            sched = DelaySchedule.from_flat(tau, config.K, config.N, config.T)
            values[i] = average_rate(config, sched, "lmmse", spec.trials, spec.seed, jobs=1).average
        singular = np.zeros(size, dtype=bool)
        score = -values

    best_score = np.min(score)
    if not math.isfinite(best_score):
        raise ValueError("every grid point is singular")
    tol = 1e-12 * max(abs(best_score), 1.0)
    i = int(np.flatnonzero(score <= best_score + tol)[0])
    best = DelaySchedule.from_flat(grid[i], config.K, config.N, config.T, "exhaustive")
    return SearchResult(best, float(values[i]), size, grid, values, singular)


@dataclass(frozen=True)
class ConvexityReport:
    min_second_diff: float
    f0: float
    f1: float
    f_half: float
    centrosymmetric: bool


def blend_trace(A: np.ndarray, s: float) -> float:
    """``tr(((1-s) A + s JAJ)^-1)``."""
    J = exchange(A.shape[0])
    B = (1 - s) * A + s * (J @ A @ J)
    lam = np.linalg.eigvalsh(B)
    if lam[0] <= 0:
        raise np.linalg.LinAlgError(f"blend matrix singular at s={s}")
    return float(np.sum(1.0 / lam))


def verify_convexity(A: np.ndarray, num_points: int = 49) -> ConvexityReport:
    """Sample the blend trace on a uniform grid and report its smallest second difference."""
    s = np.linspace(0.0, 1.0, num_points + 2)
    f = np.array([blend_trace(A, si) for si in s])
    second = f[:-2] - 2 * f[1:-1] + f[2:]
    J = exchange(A.shape[0])
    return ConvexityReport(
        float(second.min()), float(f[0]), float(f[-1]), blend_trace(A, 0.5),
        bool(np.allclose(J @ A @ J, A, rtol=0, atol=1e-12)),
    )


@dataclass(frozen=True, eq=False)
class SymmetryReport:
    K: int
    deltas: np.ndarray  # (trials, K-1)
    trace_A: np.ndarray
    trace_sym: np.ndarray

    @property
    def max_violation(self) -> float:
        """Largest ``tr(sym^-1) - tr(A^-1)``; must be <= 0."""
        return float(np.max(self.trace_sym - self.trace_A))

    @property
    def holds(self) -> bool:
        return self.max_violation <= 1e-12


def symmetrized_trace(deltas) -> tuple[float, float]:
    """``(tr(A^-1), tr(((A + JAJ)/2)^-1))`` for the group matrix with ``deltas``."""
    A = group_A(deltas)
    J = exchange(A.shape[0])
    S = (A + J @ A @ J) / 2
    return float(np.trace(np.linalg.inv(A))), float(np.trace(np.linalg.inv(S)))


def verify_symmetric_delays(K: int, trials: int, rng_seed: int, total: float = 1.0) -> SymmetryReport:
    if K < 2:
        raise ValueError("K must be at least 2")
    rng = np.random.default_rng(rng_seed)
    deltas = rng.dirichlet(np.ones(K - 1), size=trials) * total
    pairs = np.array([symmetrized_trace(d) for d in deltas])
    return SymmetryReport(K, deltas, pairs[:, 0], pairs[:, 1])


def centrosymmetric_eigensplit(A: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Split the spectrum of a symmetric centrosymmetric matrix into two halves.

    Returns the eigenvalues of ``B - JC`` and of ``B + JC`` (bordered by the
    centre row/column scaled by sqrt(2) when the dimension is odd).
    """
    A = np.asarray(A, dtype=float)
    K = A.shape[0]
    J = exchange(K)
    if np.max(np.abs(J @ A @ J - A)) > tol or np.max(np.abs(A - A.T)) > tol:
        raise ValueError("matrix is not symmetric centrosymmetric")
    m = K // 2
    Jm = exchange(m)
    B = A[:m, :m]
    C = A[K - m:, :m]
    A1 = B - Jm @ C
    if K % 2:
        x = A[:m, m]
        A2 = np.block([[B + Jm @ C, np.sqrt(2) * x[:, None]], [np.sqrt(2) * x[None, :], A[m:m + 1, m:m + 1]]])
    else:
        A2 = B + Jm @ C
    return np.linalg.eigvalsh(A1), np.linalg.eigvalsh(A2)
