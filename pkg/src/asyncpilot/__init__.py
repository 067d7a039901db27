"""Asynchronous oversampled uplink pilot training for multi-cell massive MIMO."""
from .delays import equally_divided_schedule, exhaustive_search, inverse_A_closed_form, total_mse_closed_form
from .estimators import (
    ChannelProfile,
    EstimatorKind,
    SingularPilotSystem,
    analytic_mse_lmmse,
    analytic_mse_zf,
    estimator_matrix,
    zf_mse_upper_bound,
)
from .model import DelaySchedule, PilotKind, SystemConfig, build_A, build_R, build_R_P, training_matrices
from .montecarlo import SweepSpec, average_rate, run_sweep
from .rate import Arm, RateResult

__version__ = "0.1.0"
