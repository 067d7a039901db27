"""Numerical checks of the closed forms, bounds and optimality results."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .delays import (
    SearchSpec,
    centrosymmetric_eigensplit,
    check_interference_free,
    equally_divided_schedule,
    exhaustive_search,
    group_A,
    group_mse_closed_form,
    inverse_A_closed_form,
    mean_group_mse,
    symmetrized_trace,
    total_mse_closed_form,
    verify_convexity,
    verify_symmetric_delays,
)
from .estimators import analytic_mse_zf, zf_mse_upper_bound
from .model import DelaySchedule, SystemConfig, build_R_NN, build_R_P, training_matrices


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name:<28} residual={self.residual:.3e} {self.detail} ({self.seconds:.2f}s)".rstrip()


def distinct_random_schedule(K: int, N: int, rng: np.random.Generator, min_gap: float = 1e-6) -> DelaySchedule:
    while True:
        tau = rng.uniform(0.0, 1.0, size=(K, N))
        flat = np.sort(tau.ravel())
        if flat.size < 2 or np.min(np.diff(flat)) > min_gap:
            return DelaySchedule(tau)


def check_total_mse_closed_form(Ks=range(2, 8), Ns=range(1, 5), gammas=(1.0, 100.0)) -> CheckResult:
    worst = 0.0
    for K in Ks:
        for N in Ns:
            sched = equally_divided_schedule(K, N)
            for g in gammas:
                cfg = SystemConfig(K=K, N=N, gamma=g)
                tm = training_matrices(sched, cfg)
                num = analytic_mse_zf(tm.pilots, tm.R_P, g)
                worst = max(worst, abs(num / total_mse_closed_form(K, N, g) - 1))
    return CheckResult("closed_form_total_mse", worst < 1e-9, worst, "max relative error")


def check_inverse_closed_form(Ks=range(2, 8), points: int = 50, mu_offset: float = 0.0) -> CheckResult:
    worst = 0.0
    for K in Ks:
        for dp in np.linspace(1.0 / (K - 1), 0, points, endpoint=False)[::-1]:
            A = group_A([dp] * (K - 1))
            worst = max(worst, np.max(np.abs(inverse_A_closed_form(K, dp, mu_offset) - np.linalg.inv(A))))
    return CheckResult("closed_form_inverse", worst < 1e-9, float(worst), "max abs error vs numeric inverse")


def check_rnn_equals_rp(count: int = 100, seed: int = 3) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        K, N = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        cfg = SystemConfig(K=K, N=N)
        sched = distinct_random_schedule(K, N, rng)
        worst = max(worst, np.max(np.abs(build_R_NN(sched, cfg) - build_R_P(sched, cfg))))
    return CheckResult("noise_cov_equals_R_P", worst < 1e-12, float(worst), "max abs entry difference")


def check_pd_and_zf_bound(count: int = 200, seed: int = 7) -> CheckResult:
    rng = np.random.default_rng(seed)
    min_lam, worst_gap = np.inf, -np.inf
    for _ in range(count):
        K, N = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        gamma = float(10 ** rng.uniform(-1, 3))
        cfg = SystemConfig(K=K, N=N, gamma=gamma, pilot_kind=rng.choice(["identity", "dft"]))
        tm = training_matrices(distinct_random_schedule(K, N, rng), cfg)
        lam = np.linalg.eigvalsh(tm.A)[0]
        min_lam = min(min_lam, lam)
        mse = analytic_mse_zf(tm.pilots, tm.R_P, gamma)
        worst_gap = max(worst_gap, (mse - zf_mse_upper_bound(tm.A, gamma)) / mse)
    ok = min_lam > 0 and worst_gap <= 1e-12
    return CheckResult("pd_and_zf_bound", ok, float(worst_gap),
                       f"min eigenvalue {min_lam:.3e}; residual = max (mse - bound)/mse")


def check_no_cross_pilot(Ks=range(2, 8), Ns=range(2, 5)) -> CheckResult:
    worst = 0.0
    for K in Ks:
        for N in Ns:
            rep = check_interference_free(equally_divided_schedule(K, N), SystemConfig(K=K, N=N))
            if rep.violations:
                worst = max(worst, max(v[2] for v in rep.violations))
    # group-2 user placed before a group-1 user
    bad = DelaySchedule(np.array([[0.6, 0.2], [0.7, 0.9]]))
    rep = check_interference_free(bad, SystemConfig(K=2, N=2))
    violation = max((v[2] for v in rep.violations), default=0.0)
    ok = worst < 1e-12 and violation > 0.01 and not rep.ordering_ok
    return CheckResult("no_cross_pilot", ok, worst,
                       f"ordering violation gives entry {violation:.3f}")


def check_equal_spacing_grid(Ks=(2, 3), step: float = 0.05, jobs=None) -> CheckResult:
    worst = 0.0
    details = []
    for K in Ks:
        res = exhaustive_search(SystemConfig(K=K, N=1, gamma=1.0), SearchSpec(grid_step=step), jobs=jobs)
        tau = np.sort(res.best.flat())
        target = np.linspace(0.0, 1.0, K)
        dev = float(np.max(np.abs(tau - target)))
        worst = max(worst, dev)
        details.append(f"K={K}:{np.round(tau, 4).tolist()}")
    return CheckResult("equal_spacing_grid_optimum", worst <= step + 1e-12, worst,
                       "max |tau - equal| (" + "; ".join(details) + ")")


def random_group_deltas(K: int, rng: np.random.Generator, total: float | None = None) -> np.ndarray:
    total = rng.uniform(0.3, 1.0) if total is None else total
    return rng.dirichlet(np.ones(K - 1)) * total


def check_blend_convex(count: int = 50, seed: int = 11, num_points: int = 49) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_convex, worst_ends = np.inf, 0.0
    for _ in range(count):
        K = int(rng.integers(3, 8))
        while True:
            d = random_group_deltas(K, rng)
            if np.max(np.abs(d - d[::-1])) > 1e-3:
                break
        rep = verify_convexity(group_A(d), num_points)
        worst_convex = min(worst_convex, rep.min_second_diff)
        worst_ends = max(worst_ends, abs(rep.f0 - rep.f1) / rep.f0, (rep.f_half - rep.f0) / rep.f0)
    ok = worst_convex > 0 and worst_ends <= 1e-10
    return CheckResult("blend_convex", ok, worst_ends,
                       f"min second difference {worst_convex:.3e}; residual = endpoint mismatch, relative")


def check_symmetric_gaps(trials: int = 100, seed: int = 13) -> CheckResult:
    worst = -np.inf
    min_gap = np.inf
    for K in range(3, 8):
        rep = verify_symmetric_delays(K, trials // 5, seed + K)
        worst = max(worst, rep.max_violation)
        sym = np.max(np.abs(rep.deltas - rep.deltas[:, ::-1]), axis=1) < 1e-12
        if np.any(~sym):
            min_gap = min(min_gap, float(np.min((rep.trace_A - rep.trace_sym)[~sym])))
    eq_residual = 0.0
    for K in range(3, 8):
        d = np.linspace(1, 2, K - 1)
        d = (d + d[::-1]) / d.sum() / 2
        a, s = symmetrized_trace(d)
        eq_residual = max(eq_residual, abs(a - s))
    ok = worst <= 1e-12 and min_gap > 1e-12 and eq_residual < 1e-12
    return CheckResult("symmetric_gaps", ok, eq_residual,
                       f"max violation {worst:.3e}, min strict gap {min_gap:.3e}")


def check_eigensplit(Ks=(3, 5, 7)) -> CheckResult:
    worst = 0.0
    for K in Ks:
        A = group_A([1.0 / (K - 1)] * (K - 1))
        l1, l2 = centrosymmetric_eigensplit(A)
        worst = max(worst, np.max(np.abs(np.sort(np.concatenate([l1, l2])) - np.linalg.eigvalsh(A))))
    return CheckResult("centrosymmetric_eigensplit", worst < 1e-9, float(worst), "max |eigenvalue difference|")


def check_group_balance(Ks=range(2, 8), points: int = 99) -> CheckResult:
    """Mean group MSE over two groups is smallest with equal widths, and each
    group MSE falls as its width grows."""
    worst = 0.0
    mono = True
    for K in Ks:
        widths = np.linspace(0.01, 0.99, points)
        vals = np.array([mean_group_mse(K, [w, 1 - w], 1.0) for w in widths])
        worst = max(worst, abs(widths[np.argmin(vals)] - 0.5))
        g = np.array([group_mse_closed_form(K, w, 1.0) for w in np.linspace(0.01, 1.0, points)])
        mono &= bool(np.all(np.diff(g) < 0))
    return CheckResult("group_width_balance", worst < 1e-9 and mono, worst, "argmin width offset from T/2")


def run_verification(level: str = "fast", mu_offset: float = 0.0, jobs=None) -> list[CheckResult]:
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    checks = [
        ("closed_form_total_mse", check_total_mse_closed_form),
        ("closed_form_inverse", lambda: check_inverse_closed_form(mu_offset=mu_offset)),
        ("noise_cov_equals_R_P", check_rnn_equals_rp),
        ("pd_bound", check_pd_and_zf_bound),
        ("cross_pilot", check_no_cross_pilot),
        ("grid", lambda: check_equal_spacing_grid((2, 3, 4) if level == "full" else (2, 3), jobs=jobs)),
        ("blend", check_blend_convex),
        ("gaps", check_symmetric_gaps),
        ("eigensplit", check_eigensplit),
        ("balance", check_group_balance),
    ]
    out = []
    for _, fn in checks:
        t0 = time.perf_counter()
        res = fn()
        out.append(CheckResult(res.name, res.passed, res.residual, res.detail, time.perf_counter() - t0))
    if level == "full":
        t0 = time.perf_counter()
        res = check_estimator_monte_carlo()
        out.append(CheckResult(res.name, res.passed, res.residual, res.detail, time.perf_counter() - t0))
    return out


def check_estimator_monte_carlo(M: int = 64, trials: int = 1000, seed: int = 5) -> CheckResult:
    from .estimators import ChannelProfile, analytic_mse_lmmse, empirical_mse
    from .montecarlo import Purpose, estimation_trial, rng_stream

    worst = 0.0
    for gamma in (1.0, 10.0):
        cfg = SystemConfig(K=2, N=2, M=M, gamma=gamma)
        sched = equally_divided_schedule(2, 2)
        tm = training_matrices(sched, cfg)
        prof = ChannelProfile.uniform(2, 2)
        for kind, analytic in (("zf", analytic_mse_zf(tm.pilots, tm.R_P, gamma)),
                               ("lmmse", analytic_mse_lmmse(tm.pilots, tm.R_P, prof.R_HH, gamma))):
            errs = [empirical_mse(*estimation_trial(cfg, sched, kind, prof,
                                                    rng_stream(seed, t, Purpose.CHANNEL),
                                                    rng_stream(seed, t, Purpose.NOISE))[::-1])
                    for t in range(trials)]
            worst = max(worst, abs(np.mean(errs) / analytic - 1))
    return CheckResult("estimator_monte_carlo", worst < 0.05, worst, "max relative MSE deviation")
