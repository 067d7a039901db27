"""Acceptance criteria 1-13, one test each; every test prints a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``.
"""
import time

import numpy as np
import pytest

from asyncpilot.cli import main
from asyncpilot.delays import (
    SearchSpec,
    centrosymmetric_eigensplit,
    check_interference_free,
    equally_divided_schedule,
    exhaustive_search,
    group_A,
    inverse_A_closed_form,
    symmetrized_trace,
    total_mse_closed_form,
    verify_convexity,
)
from asyncpilot.estimators import (
    ChannelProfile,
    analytic_mse_lmmse,
    analytic_mse_zf,
    empirical_mse,
    zf_mse_upper_bound,
)
from asyncpilot.model import DelaySchedule, SystemConfig, build_R_NN, build_R_P, training_matrices
from asyncpilot.montecarlo import Purpose, estimation_trial, rng_stream, run_trials, summarize_rates
from asyncpilot.rate import Arm


@pytest.fixture
def report(capsys):
    def emit(number, passed, text):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if passed else 'FAIL'}: {text}")
        assert passed, text
    return emit


def db(x):
    return 10 ** (x / 10)


def random_distinct(K, N, rng):
    while True:
        tau = rng.uniform(0, 1, (K, N))
        if K * N == 1 or np.min(np.diff(np.sort(tau.ravel()))) > 1e-6:
            return DelaySchedule(tau)


def test_01_closed_form_total_mse(report):
    t0 = time.perf_counter()
    worst = 0.0
    for K in range(2, 8):
        for N in range(1, 5):
            for gamma in (1.0, 100.0):
                tm = training_matrices(equally_divided_schedule(K, N), SystemConfig(K=K, N=N, gamma=gamma))
                numeric = np.trace(np.linalg.inv(tm.A)).real / (K * N * gamma)
                worst = max(worst, abs(total_mse_closed_form(K, N, gamma) / numeric - 1))
    dt = time.perf_counter() - t0
    report(1, worst < 1e-9 and dt < 5, f"max relative error {worst:.2e} (< 1e-9), {dt:.2f} s (< 5 s)")


def test_02_closed_form_inverse(report):
    t0 = time.perf_counter()
    worst = 0.0
    for K in range(2, 8):
        for dp in np.linspace(0, 1 / (K - 1), 51)[1:]:
            worst = max(worst, np.max(np.abs(inverse_A_closed_form(K, dp) - np.linalg.inv(group_A([dp] * (K - 1))))))
    dt = time.perf_counter() - t0
    report(2, worst < 1e-9 and dt < 5, f"max abs error {worst:.2e} (< 1e-9), {dt:.2f} s (< 5 s)")


def test_03_noise_covariance_equals_R_P(report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        K, N = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        cfg = SystemConfig(K=K, N=N)
        s = random_distinct(K, N, rng)
        worst = max(worst, np.max(np.abs(build_R_NN(s, cfg) - build_R_P(s, cfg))))
    report(3, worst < 1e-12, f"max |R_NN - R_P| {worst:.2e} over 100 schedules (< 1e-12)")


def test_04_positive_definite_and_zf_bound(report):
    rng = np.random.default_rng(4)
    min_lam, violations = np.inf, 0
    for _ in range(200):
        K, N = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        gamma = float(10 ** rng.uniform(-1, 3))
        cfg = SystemConfig(K=K, N=N, gamma=gamma)
        tm = training_matrices(random_distinct(K, N, rng), cfg)
        lam = np.linalg.eigvalsh(tm.A)[0]
        min_lam = min(min_lam, lam)
        if analytic_mse_zf(tm.pilots, tm.R_P, gamma) > zf_mse_upper_bound(tm.A, gamma) * (1 + 1e-12):
            violations += 1
    report(4, min_lam > 0 and violations == 0,
           f"min lambda_min(A) {min_lam:.3e} (> 0), bound violations {violations}/200")


def test_05_interference_free_ordering(report):
    worst = 0.0
    for K in range(2, 8):
        for N in range(2, 5):
            rep = check_interference_free(equally_divided_schedule(K, N), SystemConfig(K=K, N=N))
            worst = max([worst] + [v[2] for v in rep.violations])
    # UE12 (pilot 2) arrives before UE11 (pilot 1)
    bad = check_interference_free(DelaySchedule(np.array([[0.6, 0.2], [0.7, 0.9]])), SystemConfig(K=2, N=2))
    entry = max(v[2] for v in bad.violations)
    report(5, worst < 1e-12 and entry > 0.01,
           f"max cross-pilot entry {worst:.2e} (< 1e-12); ordering violation entry {entry:.3f} (> 0.01)")


def test_06_grid_search_equal_gaps(report):
    t0 = time.perf_counter()
    devs, found = [], []
    for K in (3, 4):
        res = exhaustive_search(SystemConfig(K=K, N=1, gamma=1.0), SearchSpec(grid_step=0.05))
        tau = np.sort(res.best.flat())
        devs.append(float(np.max(np.abs(tau - np.linspace(0, 1, K)))))
        found.append(tau.round(4).tolist())
    dt = time.perf_counter() - t0
    ok = max(devs) <= 0.05 + 1e-12 and dt < 120
    report(6, ok, f"optima {found}, max deviation from equal gaps {max(devs):.3f} (<= 0.05), {dt:.1f} s (< 120 s)")


def test_07_blend_convexity_and_symmetric_gaps(report):
    rng = np.random.default_rng(7)
    min_second = np.inf
    for _ in range(50):
        K = int(rng.integers(3, 8))
        while True:
            d = rng.dirichlet(np.ones(K - 1)) * rng.uniform(0.3, 1.0)
            if np.max(np.abs(d - d[::-1])) > 1e-3:
                break
        min_second = min(min_second, verify_convexity(group_A(d), 49).min_second_diff)
    worst_gap, strict = -np.inf, True
    for _ in range(100):
        K = int(rng.integers(3, 8))
        d = rng.dirichlet(np.ones(K - 1))
        a, s = symmetrized_trace(d)
        worst_gap = max(worst_gap, s - a)
        strict &= s < a
    eq = max(abs(np.subtract(*symmetrized_trace(d))) for d in ([0.4, 0.4], [0.2, 0.3, 0.2], [0.1, 0.4, 0.4, 0.1]))
    ok = min_second > 0 and worst_gap <= 1e-12 and strict and eq < 1e-12
    report(7, ok, f"min second difference {min_second:.3e} (> 0); max tr(sym^-1) - tr(A^-1) {worst_gap:.3e} "
                  f"(< 0, strict); symmetric-gap equality residual {eq:.1e} (< 1e-12)")


def test_08_centrosymmetric_eigensplit(report):
    worst = 0.0
    for K in (3, 5, 7):
        A = group_A([1 / (K - 1)] * (K - 1))
        l1, l2 = centrosymmetric_eigensplit(A)
        worst = max(worst, np.max(np.abs(np.sort(np.r_[l1, l2]) - np.linalg.eigvalsh(A))))
    report(8, worst < 1e-9, f"max |eigenvalue difference| {worst:.2e} (< 1e-9)")


def test_09_estimator_monte_carlo(report):
    t0 = time.perf_counter()
    prof = ChannelProfile.uniform(2, 2)
    results = []
    for sched in (equally_divided_schedule(2, 2), DelaySchedule(np.array([[0.0, 0.3], [0.55, 0.85]]))):
        for gamma in (1.0, 10.0):
            cfg = SystemConfig(K=2, N=2, M=64, gamma=gamma)
            tm = training_matrices(sched, cfg)
            analytic = {"zf": analytic_mse_zf(tm.pilots, tm.R_P, gamma),
                        "lmmse": analytic_mse_lmmse(tm.pilots, tm.R_P, prof.R_HH, gamma)}
            for kind, value in analytic.items():
                errs = []
                for t in range(1000):
                    H, H_hat = estimation_trial(cfg, sched, kind, prof, rng_stream(9, t, Purpose.CHANNEL),
                                                rng_stream(9, t, Purpose.NOISE))
                    errs.append(empirical_mse(H_hat, H))
                results.append(abs(np.mean(errs) / value - 1))
    dt = time.perf_counter() - t0
    worst = max(results)
    report(9, worst < 0.05 and dt < 60, f"max relative deviation {worst:.4f} (< 0.05) over 8 cases, {dt:.1f} s (< 60 s)")


def rates(cfg, seed, arms=tuple(Arm), trials=1000):
    out = run_trials(cfg, "equally_divided", "lmmse", trials, seed, arms)
    return {arm: summarize_rates(out, arm, seed).average for arm in arms}


def test_10_rate_vs_snr(report):
    t0 = time.perf_counter()
    base = SystemConfig(K=4, N=2, M=64)
    r20 = rates(base.replace(gamma=db(20)), seed=10, arms=(Arm.ASYNC_OVERSAMPLED, Arm.SYNC_BASELINE))
    r30 = rates(base.replace(gamma=db(30)), seed=10, arms=(Arm.ASYNC_OVERSAMPLED, Arm.SYNC_BASELINE))
    d_async = r30[Arm.ASYNC_OVERSAMPLED] - r20[Arm.ASYNC_OVERSAMPLED]
    d_sync = r30[Arm.SYNC_BASELINE] - r20[Arm.SYNC_BASELINE]
    dt = time.perf_counter() - t0
    report(10, d_async > 0.5 and d_sync < 0.2 and dt < 300,
           f"async gain 20->30 dB {d_async:.4f} bits (> 0.5); sync gain {d_sync:.4f} bits (< 0.2); {dt:.1f} s")


def test_11_rate_vs_antennas(report):
    t0 = time.perf_counter()
    base = SystemConfig(K=4, N=3, gamma=db(20))
    arms = (Arm.ASYNC_OVERSAMPLED, Arm.SYNC_BASELINE)
    r64 = rates(base.replace(M=64), seed=11, arms=arms)
    r256 = rates(base.replace(M=256), seed=11, arms=arms)
    d_sync = abs(r256[Arm.SYNC_BASELINE] - r64[Arm.SYNC_BASELINE])
    d_async = r256[Arm.ASYNC_OVERSAMPLED] - r64[Arm.ASYNC_OVERSAMPLED]
    dt = time.perf_counter() - t0
    report(11, d_sync < 0.1 and d_async > 0 and dt < 600,
           f"sync change M=64->256 {d_sync:.4f} bits (< 0.1); async change {d_async:+.4f} bits (> 0); {dt:.1f} s")


def test_12_identity_vs_dft_pilots(report):
    base = SystemConfig(K=4, N=3, M=100, gamma=db(20))
    arm = (Arm.ASYNC_OVERSAMPLED,)
    ident = rates(base, seed=12, arms=arm)[Arm.ASYNC_OVERSAMPLED]
    dft = rates(base.replace(pilot_kind="dft"), seed=12, arms=arm)[Arm.ASYNC_OVERSAMPLED]
    report(12, ident >= dft, f"identity {ident:.4f} bits >= DFT {dft:.4f} bits")


SWEEPS = {
    "snr": """[system]
K = 4
N = 2
M = 64

[sweep]
variable = snr_db
values = 0, 10, 20, 30
trials = 200
seed = 13
""",
    "schemes": """[system]
K = 3
N = 2
M = 32
snr_db = 20

[sweep]
variable = delay_scheme
values = equally_divided, random, synchronous
trials = 200
seed = 14
""",
}


def test_13_parallel_determinism(report, tmp_path):
    same = []
    for name, text in SWEEPS.items():
        cfg = tmp_path / f"{name}.ini"
        cfg.write_text(text)
        outputs = []
        for label, jobs in (("serial", "1"), ("serial_again", "1"), ("parallel", "8")):
            out = tmp_path / f"{name}_{label}"
            assert main(["sweep", "--config", str(cfg), "--out", str(out), "--jobs", jobs]) == 0
            outputs.append((out / "sweep.csv").read_bytes())
        same.append(outputs[0] == outputs[1] == outputs[2])
    report(13, all(same), f"byte-identical CSV serial vs rerun vs 8 jobs: {dict(zip(SWEEPS, same))}")
