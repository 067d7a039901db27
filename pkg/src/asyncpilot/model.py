"""Training algebra for asynchronous, oversampled uplink pilots.

Flattened UE index convention (0-based here): ``r = (k - 1) * N + (n - 1)`` for
cell ``k`` in 1..K and pilot/user ``n`` in 1..N.  Row ``r`` of ``R`` belongs to the
transmitting UE, column block ``t`` to the matched-filter sampler synchronised
with UE ``t``.  Block ``(r, t)`` of ``R_P`` is the L x L matrix whose entry
``(j, i)`` is the weight of pilot symbol ``j`` of UE ``r`` in sample ``i`` of
sampler ``t``.

The pulse is rectangular with unit energy; :func:`overlap_coeffs` is the one
place that knows this.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

DUPLICATE_TOL = 1e-9


class PilotKind(str, enum.Enum):
    IDENTITY = "identity"
    DFT = "dft"


@dataclass(frozen=True)
class SystemConfig:
    """Scenario scalars.  ``gamma`` is linear SNR; pilot length equals ``N``."""

    K: int
    N: int
    M: int = 100
    T: float = 1.0
    gamma: float = 100.0
    pilot_kind: PilotKind = PilotKind.IDENTITY

    def __post_init__(self):
        for name in ("K", "N", "M"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        object.__setattr__(self, "pilot_kind", PilotKind(self.pilot_kind))

    @property
    def L(self) -> int:
        return self.N

    @property
    def NK(self) -> int:
        return self.N * self.K

    def index(self, k: int, n: int) -> int:
        """Flattened 0-based index of UE (k, n), both 1-based."""
        return (k - 1) * self.N + (n - 1)

    def ue(self, r: int) -> tuple[int, int]:
        """Inverse of :meth:`index`."""
        return r // self.N + 1, r % self.N + 1

    def pilot_of(self, r: int) -> int:
        """0-based pilot row used by flattened UE ``r``."""
        return r % self.N

    def replace(self, **changes) -> "SystemConfig":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class DelaySchedule:
    """Delays ``tau[k-1, n-1]`` in [0, T]."""

    tau: np.ndarray
    T: float = 1.0
    label: str = ""

    def __post_init__(self):
        tau = np.array(self.tau, dtype=float)
        if tau.ndim != 2:
            raise ValueError("tau must be a K x N array")
        if np.any(tau < 0) or np.any(tau > self.T):
            raise ValueError(f"delays must lie in [0, {self.T}]")
        tau.setflags(write=False)
        object.__setattr__(self, "tau", tau)

    @classmethod
    def from_flat(cls, flat, K: int, N: int, T: float = 1.0, label: str = "") -> "DelaySchedule":
        return cls(np.asarray(flat, dtype=float).reshape(K, N), T, label)

    @classmethod
    def synchronous(cls, K: int, N: int, T: float = 1.0, value: float = 0.0) -> "DelaySchedule":
        return cls(np.full((K, N), float(value)), T, "synchronous")

    @classmethod
    def random(cls, K: int, N: int, rng: np.random.Generator, T: float = 1.0) -> "DelaySchedule":
        return cls(rng.uniform(0.0, T, size=(K, N)), T, "random")

    @property
    def K(self) -> int:
        return self.tau.shape[0]

    @property
    def N(self) -> int:
        return self.tau.shape[1]

    def flat(self) -> np.ndarray:
        return self.tau.reshape(-1)

    def __getitem__(self, kn: tuple[int, int]) -> float:
        k, n = kn
        return float(self.tau[k - 1, n - 1])

    def order(self) -> list[tuple[int, int]]:
        """UEs sorted by delay; ties broken by (n, k)."""
        keys = [(self[k, n], n, k) for k in range(1, self.K + 1) for n in range(1, self.N + 1)]
        return [(k, n) for _, n, k in sorted(keys)]

    def __eq__(self, other):
        if not isinstance(other, DelaySchedule):
            return NotImplemented
        return self.T == other.T and np.array_equal(self.tau, other.tau)

    def __hash__(self):
        return hash((self.T, self.tau.tobytes()))


@dataclass(frozen=True, eq=False)
class PilotMatrix:
    """Base N x L pilot rows and the NK x NK*L block-diagonal ``P``."""

    rows: np.ndarray
    P: np.ndarray
    kind: PilotKind
    K: int

    @property
    def N(self) -> int:
        return self.rows.shape[0]

    def pilot(self, r: int) -> np.ndarray:
        return self.rows[r % self.N]


@dataclass(frozen=True, eq=False)
class TrainingMatrices:
    R: np.ndarray
    R_P: np.ndarray
    R_NN: np.ndarray
    A: np.ndarray
    pilots: PilotMatrix = field(repr=False)


def overlap_coeffs(tau1: float, tau2: float, T: float = 1.0) -> tuple[float, float]:
    """Overlap of two unit-energy rectangular pulses offset by ``tau1 - tau2``.

    Returns ``(direct, shift)``: the overlap with the aligned symbol and with the
    neighbouring symbol.  They always sum to one.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if not (0 <= tau1 <= T and 0 <= tau2 <= T):
        raise ValueError(f"delays must lie in [0, {T}], got {tau1}, {tau2}")
    shift = abs(tau1 - tau2) / T
    return 1.0 - shift, shift


def shift_pilot(p: np.ndarray, s: int) -> np.ndarray:
    """``s = -1`` delays the sequence by one symbol, ``s = +1`` advances it."""
    out = np.zeros_like(p)
    if s == 0:
        out[:] = p
    elif s < 0:
        out[1:] = p[:-1]
    else:
        out[:-1] = p[1:]
    return out


def pilot_rows(N: int, kind: PilotKind) -> np.ndarray:
    kind = PilotKind(kind)
    if kind is PilotKind.IDENTITY:
        return np.eye(N)
    j = np.arange(N)
    return np.exp(-2j * np.pi * np.outer(j, j) / N) / np.sqrt(N)


def build_pilots(config: SystemConfig) -> PilotMatrix:
    rows = pilot_rows(config.N, config.pilot_kind)
    L = config.L
    P = np.zeros((config.NK, config.NK * L), dtype=rows.dtype)
    for r in range(config.NK):
        P[r, r * L:(r + 1) * L] = rows[config.pilot_of(r)]
    return PilotMatrix(rows, P, config.pilot_kind, config.K)


def coupling_block(tau_r: float, tau_t: float, L: int, T: float = 1.0) -> np.ndarray:
    """L x L block of ``R_P`` for transmitter delay ``tau_r``, sampler delay ``tau_t``.

    Lower-banded when the transmitter leads the sampler, upper-banded when it lags.
    """
    direct, shift = overlap_coeffs(tau_r, tau_t, T)
    B = direct * np.eye(L)
    if tau_r < tau_t:
        B += shift * np.eye(L, k=-1)
    elif tau_r > tau_t:
        B += shift * np.eye(L, k=1)
    return B


def build_R_P(schedule: DelaySchedule, config: SystemConfig) -> np.ndarray:
    tau = schedule.flat()
    L, NK = config.L, config.NK
    R_P = np.empty((NK * L, NK * L))
    for r in range(NK):
        for t in range(NK):
            R_P[r * L:(r + 1) * L, t * L:(t + 1) * L] = (
                np.eye(L) if r == t else coupling_block(tau[r], tau[t], L, schedule.T)
            )
    return R_P


def build_R(schedule: DelaySchedule, pilots: PilotMatrix, config: SystemConfig) -> np.ndarray:
    """Signal coefficient matrix assembled from shifted pilots (not via ``R_P``)."""
    tau = schedule.flat()
    L, NK = config.L, config.NK
    R = np.zeros((NK, NK * L), dtype=pilots.rows.dtype)
    for r in range(NK):
        p = pilots.pilot(r)
        for t in range(NK):
            if r == t:
                R[r, t * L:(t + 1) * L] = p
                continue
            direct, shift = overlap_coeffs(tau[r], tau[t], schedule.T)
            block = direct * p
            if tau[r] != tau[t]:
                block = block + shift * shift_pilot(p, 1 if tau[t] > tau[r] else -1)
            R[r, t * L:(t + 1) * L] = block
    return R


def build_R_NN(schedule: DelaySchedule, config: SystemConfig) -> np.ndarray:
    """Noise covariance from the overlap of matched-filter integration windows.

    Sample ``i`` of sampler ``t`` integrates white noise over
    ``[i T + tau_t, (i + 1) T + tau_t]``; the covariance of two samples is the
    length of the window intersection divided by ``T``.
    """
    T = schedule.T
    L, NK = config.L, config.NK
    starts = (np.arange(L)[None, :] * T + schedule.flat()[:, None]).reshape(-1)
    gap = np.abs(starts[:, None] - starts[None, :])
    return np.clip(T - gap, 0.0, None) / T


def build_A(pilots: PilotMatrix, R_P: np.ndarray, config: SystemConfig | None = None) -> np.ndarray:
    P = pilots.P
    A = P @ R_P @ P.conj().T
    return (A + A.conj().T) / 2


def training_matrices(schedule: DelaySchedule, config: SystemConfig) -> TrainingMatrices:
    if schedule.tau.shape != (config.K, config.N):
        raise ValueError(f"schedule shape {schedule.tau.shape} does not match K={config.K}, N={config.N}")
    pilots = build_pilots(config)
    R_P = build_R_P(schedule, config)
    return TrainingMatrices(
        R=build_R(schedule, pilots, config),
        R_P=R_P,
        R_NN=build_R_NN(schedule, config),
        A=build_A(pilots, R_P),
        pilots=pilots,
    )


def pilot_gram(tau: np.ndarray, rows: np.ndarray, T: float = 1.0) -> np.ndarray:
    """Batched ``A = P R_P P^H`` straight from delays.

    ``tau`` has shape ``(..., NK)`` in flattened UE order; returns ``(..., NK, NK)``.
    Used by the grid search, where building ``R_P`` per point is too slow.
    """
    tau = np.asarray(tau, dtype=float)
    NK = tau.shape[-1]
    N = rows.shape[0]
    p = rows[np.arange(NK) % N]
    # p_r . p_t^H, and p_r . S p_t^H for the lower (+) / upper (-) bands
    g0 = p @ p.conj().T
    g_lower = p[:, 1:] @ p[:, :-1].conj().T
    g_upper = p[:, :-1] @ p[:, 1:].conj().T
    d = tau[..., None, :] - tau[..., :, None]  # tau_t - tau_r
    shift = np.abs(d) / T
    A = (1.0 - shift) * g0 + shift * np.where(d > 0, g_lower, 0) + shift * np.where(d < 0, g_upper, 0)
    idx = np.arange(NK)
    A[..., idx, idx] = 1.0
    return A


def min_eigenvalue(A: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(A)[0])


def detect_duplicate_delays(
    schedule: DelaySchedule, tol: float = DUPLICATE_TOL
) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    if tol < 0:
        raise ValueError("tol must be non-negative")
    K, N = schedule.K, schedule.N
    ues = [(k, n) for k in range(1, K + 1) for n in range(1, N + 1)]
    return [(a, b) for a, b in combinations(ues, 2) if abs(schedule[a] - schedule[b]) <= tol]


def write_matrix_csv(path, M: np.ndarray) -> None:
    """Row-major CSV at full precision; complex entries as ``a+bj``."""
    M = np.atleast_2d(M)
    if np.iscomplexobj(M) and np.allclose(M.imag, 0.0, atol=0.0):
        M = M.real
    with open(path, "w") as fh:
        for row in M:
            if np.iscomplexobj(row):
                fh.write(",".join(f"{v.real:.17g}{v.imag:+.17g}j" for v in row) + "\n")
            else:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    with open(path) as fh:
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if any("j" in v for row in rows for v in row):
        return np.array([[complex(v) for v in row] for row in rows])
    return np.array([[float(v) for v in row] for row in rows])
