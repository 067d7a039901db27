"""Random channels and training noise, trial execution and parameter sweeps.

Every random draw comes from a Philox stream keyed by
``(seed, trial, purpose, base station)``, so a trial's numbers do not depend on
which process ran it or in what order.  Complex Gaussians are circular with
total variance sigma^2 (sigma^2 / 2 per real component).
"""
from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .estimators import (
    ChannelProfile,
    EstimatorKind,
    SingularPilotSystem,
    empirical_mse,
    estimator_matrix,
    lmmse_matrix_general,
)
from .model import DelaySchedule, PilotKind, SystemConfig, build_pilots, build_R, build_R_P
from .rate import Arm, RateResult, baseline_synchronous_training, interference_power, sinr_all

EIG_CLAMP = 1e-12
SERVING_VARIANCE = 1.0
OTHER_VARIANCE = 0.5


class Purpose(enum.IntEnum):
    CHANNEL = 0
    NOISE = 1
    DELAY = 2


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for stream ``key`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def sample_channel(profile: ChannelProfile, M: int, rng: np.random.Generator) -> np.ndarray:
    """M x NK channel matrix; column r has i.i.d. CN(0, sigma2_r) entries."""
    s = profile.flat()
    return complex_normal(rng, (M, s.size)) * np.sqrt(s)[None, :]


def noise_factor(R_NN: np.ndarray, clamp: float = EIG_CLAMP) -> np.ndarray:
    """``F`` with ``F F^H = R_NN`` via a clamped eigendecomposition.

    Exactly repeated rows of ``R_NN`` (samplers with identical timing) share one
    factor row, so their noise comes out identical rather than merely close.
    """
    R_NN = np.asarray(R_NN)
    _, first, inverse = np.unique(R_NN, axis=0, return_index=True, return_inverse=True)
    keep = np.sort(first)
    remap = np.searchsorted(keep, first[inverse.reshape(-1)])
    sub = R_NN[np.ix_(keep, keep)]
    lam, V = np.linalg.eigh((sub + sub.conj().T) / 2)
    lam = np.where(lam < clamp, 0.0, lam)
    F = V * np.sqrt(lam)[None, :]
    return F[remap]


def sample_training_noise(R_NN: np.ndarray, M: int, rng: np.random.Generator, factor: np.ndarray | None = None) -> np.ndarray:
    F = noise_factor(R_NN) if factor is None else factor
    G = complex_normal(rng, (M, F.shape[1]))
    return G @ F.conj().T


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything about one (config, schedule, estimator) that trials only read."""

    config: SystemConfig
    schedule: DelaySchedule
    estimator: EstimatorKind
    R: np.ndarray
    F: np.ndarray
    R_syn: np.ndarray
    X_async: tuple  # per BS, NKL x NK
    X_sync: tuple  # per BS, L x NK
    weights: np.ndarray
    profiles: tuple

    @classmethod
    def build(cls, config: SystemConfig, schedule: DelaySchedule, estimator="lmmse", arms=tuple(Arm)) -> "Scenario":
        estimator = EstimatorKind(estimator)
        arms = {Arm(a) for a in arms}
        pilots = build_pilots(config)
        R_P = build_R_P(schedule, config)
        R = build_R(schedule, pilots, config)
        R_syn, I_L = baseline_synchronous_training(config)
        profiles = tuple(ChannelProfile.serving(config.K, config.N, b, SERVING_VARIANCE, OTHER_VARIANCE)
                         for b in range(1, config.K + 1))
        X_async = ()
        if Arm.ASYNC_OVERSAMPLED in arms:
            X_async = tuple(estimator_matrix(estimator, pilots, R_P, p.R_HH, config.gamma).X for p in profiles)
        X_sync = tuple(lmmse_matrix_general(R_syn, I_L, p.R_HH, config.gamma).X for p in profiles)
        return cls(config, schedule, estimator, R, noise_factor(R_P), R_syn, X_async, X_sync,
                   interference_power(schedule.flat(), schedule.T), profiles)


@dataclass(frozen=True, eq=False)
class TrialOutput:
    sq_error: float  # mean over BS views of ||H_hat - H||_F^2 / (KNM), oversampled arm
    rates: dict = field(default_factory=dict)  # Arm -> (K, N) rates of serving UEs


def run_trial(scenario: Scenario, seed: int, trial: int, arms=tuple(Arm), noise_scale: float = 1.0) -> TrialOutput:
    """One channel/noise realization at every base station, all arms on the same draws."""
    cfg = scenario.config
    K, N, L, M, gamma = cfg.K, cfg.N, cfg.L, cfg.M, cfg.gamma
    arms = [Arm(a) for a in arms]
    sq = []
    rates = {a: np.zeros((K, N)) for a in arms}
    ones = np.ones((cfg.NK, cfg.NK))
    for b in range(1, K + 1):
        H = sample_channel(scenario.profiles[b - 1], M, rng_stream(seed, trial, Purpose.CHANNEL, b))
        G = complex_normal(rng_stream(seed, trial, Purpose.NOISE, b), (M, cfg.NK * L))
        targets = [cfg.index(b, n) for n in range(1, N + 1)]
        Y = None
        if Arm.ASYNC_OVERSAMPLED in arms or Arm.ASYNC_NO_OVERSAMPLING in arms:
            noise = G[:, :scenario.F.shape[1]] @ scenario.F.conj().T
            Y = np.sqrt(gamma) * H @ scenario.R + noise_scale * noise
        if Arm.ASYNC_OVERSAMPLED in arms:
            H_hat = Y @ scenario.X_async[b - 1]
            sq.append(empirical_mse(H_hat, H))
            rates[Arm.ASYNC_OVERSAMPLED][b - 1] = np.log2(1 + sinr_all(H, H_hat, scenario.weights, gamma, targets))
        if Arm.SYNC_BASELINE in arms:
            Y_syn = np.sqrt(gamma) * H @ scenario.R_syn + noise_scale * G[:, :L]
            H_hat = Y_syn @ scenario.X_sync[b - 1]
            rates[Arm.SYNC_BASELINE][b - 1] = np.log2(1 + sinr_all(H, H_hat, ones, gamma, targets))
        if Arm.ASYNC_NO_OVERSAMPLING in arms:
            H_hat = np.zeros_like(H)
            for t in targets:
                H_hat[:, t] = Y[:, t * L:(t + 1) * L] @ scenario.X_sync[b - 1][:, t]
            rates[Arm.ASYNC_NO_OVERSAMPLING][b - 1] = np.log2(1 + sinr_all(H, H_hat, scenario.weights, gamma, targets))
    return TrialOutput(float(np.mean(sq)) if sq else math.nan, rates)


def estimation_trial(config: SystemConfig, schedule: DelaySchedule, estimator, profile: ChannelProfile,
                     rng_channel: np.random.Generator, rng_noise: np.random.Generator,
                     noise_scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Single-BS training: returns ``(H, H_hat)``."""
    pilots = build_pilots(config)
    R_P = build_R_P(schedule, config)
    R = build_R(schedule, pilots, config)
    X = estimator_matrix(estimator, pilots, R_P, profile.R_HH, config.gamma)
    H = sample_channel(profile, config.M, rng_channel)
    N = sample_training_noise(R_P, config.M, rng_noise)
    Y = np.sqrt(config.gamma) * H @ R + noise_scale * N
    return H, Y @ X.X


def jobs_from_env(jobs: int | None = None) -> int:
    if jobs is None:
        jobs = int(os.environ.get("ASYNCPILOT_JOBS", "1"))
    return max(1, int(jobs))


DELAY_SCHEMES = ("equally_divided", "random", "synchronous", "exhaustive")


def resolve_schedule(config: SystemConfig, scheme, seed: int = 0, trial: int | None = None) -> DelaySchedule:
    """Schedule for a named scheme; ``random`` draws from the trial's delay stream."""
    if isinstance(scheme, DelaySchedule):
        return scheme
    from .delays import SearchSpec, equally_divided_schedule, exhaustive_search

    if scheme == "equally_divided":
        return equally_divided_schedule(config.K, config.N, config.T)
    if scheme == "synchronous":
        return DelaySchedule.synchronous(config.K, config.N, config.T)
    if scheme == "random":
        return DelaySchedule.random(config.K, config.N, rng_stream(seed, trial or 0, Purpose.DELAY), config.T)
    if scheme == "exhaustive":
        return exhaustive_search(config, SearchSpec()).best
    raise ValueError(f"unknown delay scheme {scheme!r}")


def _trial_block(args):
    config, scheme, estimator, seed, trials, arms, noise_scale = args
    scenario = None
    if scheme != "random":
        scenario = Scenario.build(config, resolve_schedule(config, scheme, seed), estimator, arms)
    out = []
    for trial in trials:
        sc = scenario
        if sc is None:
            sc = Scenario.build(config, resolve_schedule(config, scheme, seed, trial), estimator, arms)
        out.append(run_trial(sc, seed, trial, arms, noise_scale))
    return out


def run_trials(config: SystemConfig, scheme, estimator, trials: int, seed: int, arms=tuple(Arm),
               jobs: int | None = None, noise_scale: float = 1.0) -> list[TrialOutput]:
    """Run ``trials`` trials, in parallel if ``jobs > 1``; output order is trial order."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    arms = tuple(Arm(a) for a in arms)
    if scheme == "exhaustive":
        scheme = resolve_schedule(config, scheme, seed)
    n_jobs = min(jobs_from_env(jobs), trials)
    blocks = [list(b) for b in np.array_split(np.arange(trials), n_jobs) if len(b)]
    tasks = [(config, scheme, estimator, seed, blk, arms, noise_scale) for blk in blocks]
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as ex:
            parts = list(ex.map(_trial_block, tasks))
    else:
        parts = [_trial_block(t) for t in tasks]
    return [o for part in parts for o in part]


def summarize_rates(outputs: list[TrialOutput], arm: Arm, seed: int) -> RateResult:
    per_trial = np.stack([o.rates[arm] for o in outputs])  # (trials, K, N)
    means = per_trial.reshape(len(outputs), -1).mean(axis=1)
    ci = 1.96 * means.std(ddof=1) / math.sqrt(len(means)) if len(means) > 1 else 0.0
    return RateResult(per_trial.mean(axis=0), float(means.mean()), float(ci), len(outputs), seed, arm)


def average_rate(config: SystemConfig, schedule, estimator_kind="lmmse", trials: int = 1000, seed: int = 0,
                 arm: Arm = Arm.ASYNC_OVERSAMPLED, jobs: int | None = None) -> RateResult:
    """Trial-averaged per-UE uplink rate of one arm.

    ``schedule`` is a :class:`DelaySchedule` or a scheme name (``random``
    redraws delays every trial).  The synchronous and no-oversampling arms
    always use the LMMSE estimator.
    """
    outputs = run_trials(config, schedule, estimator_kind, trials, seed, (Arm(arm),), jobs)
    return summarize_rates(outputs, Arm(arm), seed)


class SweepVariable(str, enum.Enum):
    SNR_DB = "snr_db"
    M = "M"
    K = "K"
    N = "N"
    PILOT_KIND = "pilot_kind"
    DELAY_SCHEME = "delay_scheme"


@dataclass(frozen=True)
class SweepSpec:
    variable: SweepVariable
    values: tuple
    base: SystemConfig = SystemConfig(K=7, N=2, M=100, gamma=100.0)
    trials: int = 1000
    arms: tuple = tuple(Arm)
    estimator: EstimatorKind = EstimatorKind.LMMSE
    delay_scheme: str = "equally_divided"

    def __post_init__(self):
        object.__setattr__(self, "variable", SweepVariable(self.variable))
        object.__setattr__(self, "estimator", EstimatorKind(self.estimator))
        object.__setattr__(self, "arms", tuple(Arm(a) for a in self.arms))
        if not self.values:
            raise ValueError("sweep values must be non-empty")
        if not self.arms:
            raise ValueError("at least one arm is required")
        object.__setattr__(self, "values", tuple(self.values))

    def point(self, value) -> tuple[SystemConfig, str]:
        var, cfg, scheme = self.variable, self.base, self.delay_scheme
        if var is SweepVariable.SNR_DB:
            cfg = replace(cfg, gamma=10 ** (float(value) / 10))
        elif var is SweepVariable.PILOT_KIND:
            cfg = replace(cfg, pilot_kind=PilotKind(value))
        elif var is SweepVariable.DELAY_SCHEME:
            scheme = str(value)
        else:
            cfg = replace(cfg, **{var.value: int(value)})
        return cfg, scheme


@dataclass(frozen=True)
class ResultRow:
    scenario_id: str
    arm: str
    sweep_var: str
    sweep_value: object
    metric: str
    value: float
    ci_halfwidth: float
    trials: int
    seed: int


def scenario_id(config: SystemConfig, scheme: str) -> str:
    return f"K{config.K}_N{config.N}_M{config.M}_g{config.gamma:.6g}_{config.pilot_kind.value}_{scheme}"


def run_sweep(spec: SweepSpec, base_seed: int = 0, jobs: int | None = None) -> list[ResultRow]:
    """One row per (sweep value, arm).  Every point reuses ``base_seed`` so arms and
    neighbouring points are compared on common random numbers."""
    rows = []
    for value in spec.values:
        try:
            cfg, scheme = spec.point(value)
            outputs = run_trials(cfg, scheme, spec.estimator, spec.trials, base_seed, spec.arms, jobs)
            sid = scenario_id(cfg, scheme)
            for arm in spec.arms:
                res = summarize_rates(outputs, arm, base_seed)
                rows.append(ResultRow(sid, arm.value, spec.variable.value, value, "average_rate",
                                      res.average, res.ci_halfwidth, spec.trials, base_seed))
        except (SingularPilotSystem, ValueError) as exc:
            for arm in spec.arms:
                rows.append(ResultRow(f"{spec.variable.value}={value}", arm.value, spec.variable.value, value,
                                      f"error:{type(exc).__name__}", math.nan, math.nan, spec.trials, base_seed))
    return sort_rows(rows)


def sort_rows(rows: list[ResultRow]) -> list[ResultRow]:
    def key(row):
        v = row.sweep_value
        num = isinstance(v, (int, float)) and not isinstance(v, bool)
        return (0 if num else 1, float(v) if num else 0.0, str(v), row.arm, row.metric)

    return sorted(rows, key=key)
