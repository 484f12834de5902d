"""TD(0) and Robust-TD with linear function approximation.

Robust-TD keeps the data-independent part ``A_t theta`` of the TD(0)
direction and replaces the reward term ``phi(s_t) r_t`` by a robust estimate
``b_hat_t`` of its steady-state mean, built component-wise with RUMEM from
all observations so far. When ``||b_hat_t||`` exceeds ``G_t + sigma_1`` the
estimate is discarded (set to zero) for that step.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from ._validation import check_positive_int, check_scalar_in
from .contamination import sample_trajectory
from .mrp import steady_state
from .rumem import RumemConfig, RumemSchedule, estimate as rumem_estimate

__all__ = [
    "DivergenceError",
    "InfeasiblePlanError",
    "StepSchedule",
    "Td0Config",
    "RobustTdConfig",
    "LearnerTrace",
    "sigma1",
    "finite_time_schedule",
    "td_update_direction",
    "td0_on_trajectory",
    "run_td0",
    "threshold_G",
    "estimate_b_hat",
    "robust_td_on_trajectory",
    "run_robust_td",
]

DIVERGENCE_GUARD = 1e12


class DivergenceError(RuntimeError):
    """The iterate norm exceeded the divergence guard."""


class InfeasiblePlanError(ValueError):
    """RUMEM has too little data at some step after burn-in."""


@dataclass(frozen=True)
class StepSchedule:
    """``constant``: ``alpha_t = alpha``. ``diminishing``: ``alpha_t = c / (t + t0)``, ``t = 0, 1, ...``.

    ``t0 = 1`` gives the classical ``1/t`` schedule counted from ``t = 1``.
    """

    kind: str
    alpha: float = 0.0
    c: float = 1.0
    t0: float = 1.0

    @classmethod
    def constant(cls, alpha):
        return cls("constant", alpha=check_scalar_in(alpha, "alpha", 0.0, 1.0, low_open=True, high_open=True))

    @classmethod
    def diminishing(cls, c=1.0, t0=1.0):
        c = check_scalar_in(c, "c", 0.0, low_open=True)
        t0 = check_scalar_in(t0, "t0", 0.0, low_open=True)
        return cls("diminishing", c=c, t0=t0)

    def __post_init__(self):
        if self.kind not in ("constant", "diminishing"):
            raise ValueError(f"unknown step schedule {self.kind!r}")


@dataclass(frozen=True, eq=False)
class Td0Config:
    step: StepSchedule
    T: int
    theta0: Optional[np.ndarray] = None

    def __post_init__(self):
        check_positive_int(self.T, "T")


@dataclass(frozen=True, eq=False)
class RobustTdConfig:
    """Inputs of Robust-TD.

    ``tau_mix``, ``eps`` and ``sigma1`` are assumed known to the learner.
    ``estimation_stride > 1`` recomputes ``b_hat`` only every that many
    steps and reuses it in between.
    """

    alpha: float
    T: int
    burn_in: int
    sigma1: float
    K: int
    eps: float = 0.0
    tau_mix: int = 1
    constant_C: float = 1.0
    estimation_stride: int = 1
    schedule: RumemSchedule = field(default_factory=RumemSchedule)
    strict: bool = True
    theta0: Optional[np.ndarray] = None

    def __post_init__(self):
        check_scalar_in(self.alpha, "alpha", 0.0, 1.0, low_open=True, high_open=True)
        check_positive_int(self.T, "T")
        check_positive_int(self.burn_in, "burn_in")
        if self.burn_in >= self.T:
            raise ValueError(f"burn_in={self.burn_in} must be < T={self.T}")
        check_scalar_in(self.sigma1, "sigma1", 1.0)
        check_positive_int(self.K, "K")
        check_scalar_in(self.eps, "eps", 0.0, 0.5, high_open=True)
        check_positive_int(self.tau_mix, "tau_mix")
        check_scalar_in(self.constant_C, "constant_C", 1.0)
        check_positive_int(self.estimation_stride, "estimation_stride")

    @property
    def delta(self):
        return 1.0 / (self.K * self.T**2)

    def rumem_config(self):
        return RumemConfig(
            delta=self.delta, eps=self.eps, tau_mix=self.tau_mix,
            constant_C=self.constant_C, schedule=self.schedule,
        )


@dataclass(frozen=True, eq=False)
class LearnerTrace:
    theta_final: np.ndarray
    d_series: np.ndarray
    record_every: int
    reset_events: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    b_hat_error_series: Optional[np.ndarray] = None
    max_bhat_excess: float = -np.inf

    @property
    def times(self):
        """Step index of each entry of ``d_series``."""
        return np.arange(self.d_series.size) * self.record_every

    @property
    def d_final(self):
        return float(self.d_series[-1])

    def plateau(self, fraction=0.1):
        """Mean of ``d_t`` over the last ``fraction`` of recorded steps."""
        k = max(1, int(round(fraction * self.d_series.size)))
        return float(self.d_series[-k:].mean())

    def to_csv(self, path, log_every=100):
        """Columns ``t, d_t, reset, b_hat_error`` every ``log_every`` steps and at every reset."""
        times = self.times
        resets = set(int(t) for t in self.reset_events)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "d_t", "reset", "b_hat_error"])
            for j, t in enumerate(times):
                if t % log_every and t not in resets:
                    continue
                err = "" if self.b_hat_error_series is None else format(self.b_hat_error_series[j], ".17g")
                w.writerow([int(t), format(self.d_series[j], ".17g"), int(t in resets), err])


def sigma1(reward_bound, rho):
    """``max(1, r_bar, rho)``."""
    return max(1.0, float(reward_bound), float(rho))


def finite_time_schedule(mrp, T, tau_mix, c1=4.0, c2=16.0, ss=None, tau_prime=None):
    """Step size and burn-in prescribed by the finite-time analysis.

    ``alpha = 4 ln(T) / (omega (1 - gamma) T)`` and
    ``burn_in = ceil(c1 tau_mix ln(K T)^2)``. Returns ``(alpha, burn_in, report)``
    where ``report`` says whether ``T >= max(burn_in + tau', c2 tau' ln T / (omega (1-gamma))^2)``
    holds (``tau'`` is computed from the chain unless supplied).
    """
    from .mrp import matrix_mixing_time

    ss = steady_state(mrp) if ss is None else ss
    K, gamma, omega = mrp.num_features, mrp.discount, ss.omega
    alpha = 4.0 / (omega * (1.0 - gamma)) * math.log(T) / T
    burn_in = int(math.ceil(c1 * tau_mix * math.log(K * T) ** 2 - 1e-9))
    if tau_prime is None:
        tau_prime = matrix_mixing_time(mrp, ss, alpha)
    need = max(burn_in + tau_prime, c2 * tau_prime * math.log(T) / (omega * (1.0 - gamma)) ** 2)
    report = {"tau_prime": tau_prime, "T_required": need, "conditions_met": T >= need}
    return alpha, burn_in, report


def td_update_direction(obs, theta, features, gamma):
    """``g = (r + gamma <phi(s'), theta> - <phi(s), theta>) phi(s) = A_t theta + b_t``."""
    phi = features[obs.state]
    phi_next = features[obs.next_state]
    return (obs.reward + gamma * (phi_next @ theta) - phi @ theta) * phi


def _theta0(theta0, K):
    if theta0 is None:
        return np.zeros(K)
    theta0 = np.asarray(theta0, dtype=float).reshape(-1)
    if theta0.shape != (K,):
        raise ValueError(f"theta0 must have length {K}")
    return theta0.copy()


def _check_status(status, t):
    if status == _kernels.DIVERGED:
        raise DivergenceError(f"||theta|| exceeded {DIVERGENCE_GUARD:g} at step {t}; step size too large")
    if status == _kernels.A_NORM_VIOLATION:
        raise AssertionError(f"||A_t||_2 > 2 at step {t}; features are not normalized")
    if status == _kernels.INFEASIBLE:
        raise InfeasiblePlanError(
            f"RUMEM plan infeasible at step {t}; burn-in too short for the requested confidence"
        )


def td0_on_trajectory(traj, features, gamma, cfg, theta_star=None, record_every=1, check_invariants=True):
    """Run TD(0) over the first ``cfg.T`` observations of ``traj``."""
    T = cfg.T
    if len(traj) < T:
        raise ValueError(f"trajectory has {len(traj)} observations, need T={T}")
    Phi = np.ascontiguousarray(features, dtype=float)
    K = Phi.shape[1]
    theta0 = _theta0(cfg.theta0, K)
    theta_star = np.zeros(K) if theta_star is None else np.asarray(theta_star, dtype=float)
    step = cfg.step
    theta, d, status, t = _kernels.td0_kernel(
        traj.states[: T + 1], traj.rewards[:T], Phi, float(gamma), theta0,
        0 if step.kind == "constant" else 1, step.alpha, step.c, step.t0,
        theta_star, int(record_every), DIVERGENCE_GUARD, bool(check_invariants),
    )
    _check_status(status, t)
    return LearnerTrace(theta, d, int(record_every))


def run_td0(mrp, noise, attack, cfg, seed, start="stationary", record_every=1, check_invariants=True):
    """Sample a trajectory from ``seed`` and run TD(0); ``d_t`` is measured against the clean ``theta_star``."""
    ss = steady_state(mrp)
    traj = sample_trajectory(mrp, noise, attack, cfg.T, seed, start=start)
    return td0_on_trajectory(traj, mrp.features, mrp.discount, cfg, ss.theta_star, record_every, check_invariants)


def threshold_G(t, cfg):
    """``G_t = C sqrt(K) sigma1 (sqrt(eps) + 2 ln(12 K T^3) sqrt(tau_mix / t))`` for ``t >= burn_in``."""
    if t < cfg.burn_in or t < 1:
        raise ValueError(f"threshold defined for t >= burn_in={cfg.burn_in} (and t >= 1), got t={t}")
    K, T = cfg.K, cfg.T
    return cfg.constant_C * math.sqrt(K) * cfg.sigma1 * (
        math.sqrt(cfg.eps) + 2.0 * math.log(12.0 * K * float(T) ** 3) * math.sqrt(cfg.tau_mix / t)
    )


def estimate_b_hat(traj, features, t, cfg):
    """Robust estimate of ``b_bar`` from observations ``0..t`` and the reset test.

    Returns ``(b_hat, reset)``; after the test ``||b_hat|| <= G_t + sigma1``.
    """
    if t <= cfg.burn_in:
        raise ValueError(f"b_hat is only formed after burn-in (t > {cfg.burn_in}), got t={t}")
    Phi = np.asarray(features, dtype=float)
    states = traj.states[: t + 1]
    Y = Phi[states] * traj.rewards[: t + 1, None]
    rcfg = cfg.rumem_config()
    b_hat = np.empty(Phi.shape[1])
    for i in range(Phi.shape[1]):
        try:
            b_hat[i] = rumem_estimate(Y[:, i], rcfg, strict=cfg.strict).estimate
        except ValueError as exc:
            raise InfeasiblePlanError(f"step {t}: {exc}") from exc
    reset = bool(np.linalg.norm(b_hat) > threshold_G(t, cfg) + cfg.sigma1)
    if reset:
        b_hat[:] = 0.0
    return b_hat, reset


def robust_td_on_trajectory(traj, features, gamma, cfg, theta_star=None, b_bar=None,
                            record_every=1, check_invariants=True):
    """Run Robust-TD over the first ``cfg.T`` observations of ``traj``."""
    T = cfg.T
    if len(traj) < T:
        raise ValueError(f"trajectory has {len(traj)} observations, need T={T}")
    Phi = np.ascontiguousarray(features, dtype=float)
    K = Phi.shape[1]
    if K != cfg.K:
        raise ValueError(f"config has K={cfg.K} but features have {K} columns")
    theta0 = _theta0(cfg.theta0, K)
    theta_star = np.zeros(K) if theta_star is None else np.asarray(theta_star, dtype=float)
    b_bar = np.zeros(K) if b_bar is None else np.asarray(b_bar, dtype=float)
    sch = cfg.schedule
    theta, d, berr, resets, excess, status, t = _kernels.robust_td_kernel(
        traj.states[: T + 1], traj.rewards[:T], Phi, float(gamma), theta0, cfg.alpha, cfg.burn_in,
        cfg.delta, cfg.eps, cfg.tau_mix, sch.gap_log2, sch.eps_slack, sch.eps_buckets, sch.log_buckets,
        cfg.strict, cfg.constant_C, cfg.sigma1, cfg.T, cfg.estimation_stride,
        theta_star, b_bar, int(record_every), DIVERGENCE_GUARD, bool(check_invariants),
    )
    _check_status(status, t)
    return LearnerTrace(theta, d, int(record_every), np.flatnonzero(resets), berr, float(excess))


def run_robust_td(mrp, noise, attack, cfg, seed, record_every=1, check_invariants=True):
    """Robust-TD from a stationary start; ``d_t`` is measured against the clean ``theta_star``."""
    ss = steady_state(mrp)
    traj = sample_trajectory(mrp, noise, attack, cfg.T, seed, start="stationary")
    return robust_td_on_trajectory(
        traj, mrp.features, mrp.discount, cfg, ss.theta_star, ss.b_bar, record_every, check_invariants
    )
