"""TD(0) and Robust-TD policy evaluation under Huber-contaminated rewards."""

from .contamination import AttackModel, RewardNoise, Trajectory, sample_trajectory
from .estimators import RUMEM, RobustTDEstimator, TD0Estimator
from .hardness import build_instance, verify_indistinguishability
from .learners import (
    DivergenceError,
    InfeasiblePlanError,
    RobustTdConfig,
    StepSchedule,
    Td0Config,
    run_robust_td,
    run_td0,
    finite_time_schedule,
)
from .mrp import (
    Mrp,
    corrupted_fixed_point,
    design_attack_vector,
    load_mrp,
    mixing_time,
    save_mrp,
    stationary_distribution,
    steady_state,
)
from .rumem import RumemConfig, RumemSchedule

__version__ = "0.1.0"

__all__ = [
    "AttackModel",
    "DivergenceError",
    "InfeasiblePlanError",
    "Mrp",
    "RUMEM",
    "RewardNoise",
    "RobustTDEstimator",
    "RobustTdConfig",
    "RumemConfig",
    "RumemSchedule",
    "StepSchedule",
    "TD0Estimator",
    "Td0Config",
    "Trajectory",
    "build_instance",
    "corrupted_fixed_point",
    "design_attack_vector",
    "load_mrp",
    "mixing_time",
    "run_robust_td",
    "run_td0",
    "sample_trajectory",
    "save_mrp",
    "stationary_distribution",
    "steady_state",
    "finite_time_schedule",
    "verify_indistinguishability",
]
