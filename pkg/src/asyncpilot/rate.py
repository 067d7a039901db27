"""Uplink SINR and achievable rate under MRC, without data-phase oversampling."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import DelaySchedule, SystemConfig, overlap_coeffs, pilot_rows


class Arm(str, enum.Enum):
    ASYNC_OVERSAMPLED = "async_oversampled"
    SYNC_BASELINE = "sync_baseline"
    ASYNC_NO_OVERSAMPLING = "async_no_oversampling"


def interference_vector(i: int, tau_target: float, tau_interferer: float, L: int, T: float = 1.0) -> np.ndarray:
    """Coefficients of an interferer's ``L`` data symbols in interior sample ``i`` (1-based)."""
    if not 1 < i < L:
        raise ValueError(f"symbol index must be interior (1 < i < {L}), got {i}")
    direct, shift = overlap_coeffs(tau_target, tau_interferer, T)
    r = np.zeros(L)
    if tau_target > tau_interferer:
        r[i - 2], r[i - 1] = direct, shift
    elif tau_target < tau_interferer:
        r[i - 1], r[i] = direct, shift
    else:
        r[i - 1] = 1.0
    return r


def interference_power(tau: np.ndarray, T: float = 1.0) -> np.ndarray:
    """``||r||^2`` for every (target, interferer) pair of flattened delays."""
    tau = np.asarray(tau, dtype=float).reshape(-1)
    shift = np.abs(tau[:, None] - tau[None, :]) / T
    return (1 - shift) ** 2 + shift**2


def sinr_all(H: np.ndarray, H_hat: np.ndarray, weights: np.ndarray, gamma: float, targets) -> np.ndarray:
    """SINR of each flattened UE in ``targets`` given true and estimated channels.

    ``weights[r, j]`` is the interference power ``||r||^2`` of UE ``j`` at the
    sampler of UE ``r``.  Only the target columns of ``H_hat`` are read.
    """
    targets = list(targets)
    out = np.zeros(len(targets))
    for a, r in enumerate(targets):
        h_hat = H_hat[:, r]
        g = np.vdot(h_hat, h_hat).real
        if g == 0:
            continue
        err = abs(np.vdot(h_hat, H[:, r] - h_hat)) ** 2
        cross = np.abs(h_hat.conj() @ H) ** 2
        w = weights[r].copy()
        w[r] = 0.0
        out[a] = gamma * g**2 / (gamma * err + gamma * float(cross @ w) + g)
    return out


def sinr(H: np.ndarray, H_hat: np.ndarray, schedule: DelaySchedule, gamma: float, k: int, n: int) -> float:
    r = (k - 1) * schedule.N + (n - 1)
    return float(sinr_all(H, H_hat, interference_power(schedule.flat(), schedule.T), gamma, [r])[0])


@dataclass(frozen=True, eq=False)
class RateResult:
    per_ue: np.ndarray  # (K, N) trial-averaged rate of each UE at its serving BS
    average: float
    ci_halfwidth: float
    trials: int
    seed: int
    arm: Arm = Arm.ASYNC_OVERSAMPLED

    def __eq__(self, other):
        if not isinstance(other, RateResult):
            return NotImplemented
        return (
            np.array_equal(self.per_ue, other.per_ue)
            and self.average == other.average
            and self.ci_halfwidth == other.ci_halfwidth
            and (self.trials, self.seed, self.arm) == (other.trials, other.seed, other.arm)
        )


def baseline_synchronous_training(config: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Single-sample signal matrix (pilots stacked per cell) and white noise covariance."""
    rows = pilot_rows(config.N, config.pilot_kind)
    R = np.vstack([rows] * config.K)
    return R, np.eye(config.L)
