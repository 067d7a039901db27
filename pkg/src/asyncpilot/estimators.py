"""LMMSE and ZF channel estimators for ``Y = sqrt(gamma) H P R_P + N``."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import PilotMatrix, build_A

SINGULAR_RTOL = 1e-10


class SingularPilotSystem(ValueError):
    """The pilot Gram matrix is singular: same-pilot UEs are not separable."""

    def __init__(self, lam_min: float, lam_max: float):
        self.lam_min = lam_min
        self.lam_max = lam_max
        super().__init__(
            f"singular pilot system (pilot contamination): lambda_min={lam_min:.3e}, lambda_max={lam_max:.3e}"
        )


class EstimatorKind(str, enum.Enum):
    LMMSE = "lmmse"
    ZF = "zf"


@dataclass(frozen=True, eq=False)
class ChannelProfile:
    """Per-UE channel variances ``sigma2[k-1, n-1]`` as seen by one base station."""

    sigma2: np.ndarray

    def __post_init__(self):
        s = np.array(self.sigma2, dtype=float)
        if s.ndim != 2:
            raise ValueError("sigma2 must be a K x N array")
        if np.any(s < 0):
            raise ValueError("variances must be non-negative")
        s.setflags(write=False)
        object.__setattr__(self, "sigma2", s)

    @classmethod
    def uniform(cls, K: int, N: int, sigma2: float = 1.0) -> "ChannelProfile":
        return cls(np.full((K, N), float(sigma2)))

    @classmethod
    def serving(cls, K: int, N: int, bs: int, serving: float = 1.0, other: float = 0.5) -> "ChannelProfile":
        """Profile seen by base station ``bs`` (1-based)."""
        s = np.full((K, N), float(other))
        s[bs - 1, :] = serving
        return cls(s)

    def flat(self) -> np.ndarray:
        return self.sigma2.reshape(-1)

    @property
    def R_HH(self) -> np.ndarray:
        return np.diag(self.flat())


@dataclass(frozen=True, eq=False)
class EstimatorMatrix:
    X: np.ndarray
    kind: EstimatorKind


def _hermitian_inverse(S: np.ndarray) -> np.ndarray:
    S = (S + S.conj().T) / 2
    inv = cho_solve(cho_factor(S, lower=True), np.eye(S.shape[0], dtype=S.dtype))
    return (inv + inv.conj().T) / 2


def _trace_inverse(S: np.ndarray) -> float:
    # LU solve: for the small well-conditioned systems here it lands on exact
    # rationals more often than the Cholesky route
    return float(np.real(np.trace(np.linalg.solve(S, np.eye(S.shape[0], dtype=S.dtype)))))


def _check_invertible(A: np.ndarray) -> None:
    lam = np.linalg.eigvalsh(A)
    if lam[0] <= SINGULAR_RTOL * max(lam[-1], 0.0):
        raise SingularPilotSystem(float(lam[0]), float(lam[-1]))


def _inv_diag(R_HH: np.ndarray) -> np.ndarray:
    d = np.real(np.diag(R_HH))
    if np.any(d <= 0):
        raise ValueError("R_HH must have positive diagonal")
    return np.diag(1.0 / d)


def lmmse_matrix(pilots: PilotMatrix, R_P: np.ndarray, R_HH: np.ndarray, gamma: float) -> EstimatorMatrix:
    A = build_A(pilots, R_P)
    inner = gamma * A + _inv_diag(R_HH)
    X = np.sqrt(gamma) * pilots.P.conj().T @ _hermitian_inverse(inner)
    return EstimatorMatrix(X, EstimatorKind.LMMSE)


def lmmse_matrix_general(R: np.ndarray, R_NN: np.ndarray, R_HH: np.ndarray, gamma: float) -> EstimatorMatrix:
    """LMMSE for an arbitrary signal matrix ``R`` and invertible noise covariance.

    Used for the single-sample (synchronous-design) receivers where ``R`` has no
    block-diagonal pilot factor.
    """
    W = np.linalg.solve(R_NN, R.conj().T)  # R_NN^{-1} R^H
    inner = gamma * (R @ W) + _inv_diag(R_HH)
    X = np.sqrt(gamma) * W @ _hermitian_inverse(inner)
    return EstimatorMatrix(X, EstimatorKind.LMMSE)


def zf_matrix(pilots: PilotMatrix, R_P: np.ndarray, gamma: float) -> EstimatorMatrix:
    A = build_A(pilots, R_P)
    _check_invertible(A)
    X = np.sqrt(gamma) * pilots.P.conj().T @ _hermitian_inverse(gamma * A)
    return EstimatorMatrix(X, EstimatorKind.ZF)


def estimator_matrix(kind, pilots: PilotMatrix, R_P: np.ndarray, R_HH: np.ndarray, gamma: float) -> EstimatorMatrix:
    if EstimatorKind(kind) is EstimatorKind.ZF:
        return zf_matrix(pilots, R_P, gamma)
    return lmmse_matrix(pilots, R_P, R_HH, gamma)


def estimate(Y: np.ndarray, X: EstimatorMatrix | np.ndarray) -> np.ndarray:
    Xm = X.X if isinstance(X, EstimatorMatrix) else X
    if Y.shape[1] != Xm.shape[0]:
        raise ValueError(f"dimension mismatch: Y has {Y.shape[1]} columns, X has {Xm.shape[0]} rows")
    return Y @ Xm


def analytic_mse_lmmse(pilots: PilotMatrix, R_P: np.ndarray, R_HH: np.ndarray, gamma: float) -> float:
    A = build_A(pilots, R_P)
    KN = A.shape[0]
    S = A + _inv_diag(R_HH) / gamma
    return _trace_inverse(S) / (KN * gamma)


def analytic_mse_zf(pilots: PilotMatrix, R_P: np.ndarray, gamma: float) -> float:
    A = build_A(pilots, R_P)
    _check_invertible(A)
    return _trace_inverse(A) / (A.shape[0] * gamma)


def zf_mse_upper_bound(A: np.ndarray, gamma: float) -> float:
    lam = np.linalg.eigvalsh(A)
    if lam[0] <= SINGULAR_RTOL * max(lam[-1], 0.0):
        raise SingularPilotSystem(float(lam[0]), float(lam[-1]))
    return 1.0 / (gamma * float(lam[0]))


def empirical_mse(H_hat: np.ndarray, H: np.ndarray) -> float:
    """``||H_hat - H||_F^2 / (M * NK)`` for one realization."""
    return float(np.sum(np.abs(H_hat - H) ** 2)) / H.size
