"""scikit-learn style wrappers around RUMEM, TD(0) and Robust-TD.

The learners take a single observed trajectory: ``X`` is the state sequence
``s_0, ..., s_T`` (length ``T + 1``) or a :class:`Trajectory`, and ``y`` the
observed rewards ``r_0, ..., r_{T-1}``. ``predict(states)`` returns the
linear value estimates ``Phi[states] @ coef_``.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_sample_vector
from .contamination import Trajectory
from .learners import (
    RobustTdConfig,
    StepSchedule,
    Td0Config,
    robust_td_on_trajectory,
    td0_on_trajectory,
)
from .rumem import RumemConfig, RumemSchedule, estimate

__all__ = ["RUMEM", "TD0Estimator", "RobustTDEstimator"]


def _as_trajectory(X, y):
    if isinstance(X, Trajectory):
        if y is not None:
            raise ValueError("pass rewards either inside the Trajectory or as y, not both")
        return X.masked()
    if y is None:
        raise ValueError("y (observed rewards) is required when X is a state sequence")
    return Trajectory(np.asarray(X), np.asarray(y, dtype=float))


def _check_states(states, num_states):
    s = np.asarray(states)
    if not np.issubdtype(s.dtype, np.integer):
        raise TypeError("states must be integers")
    if s.size and (s.min() < 0 or s.max() >= num_states):
        raise ValueError(f"states must lie in [0, {num_states})")
    return s


class RUMEM(BaseEstimator):
    """Robust mean of a corrupted Markovian sample sequence.

    Parameters
    ----------
    delta : float
        Failure probability of the guarantee.
    eps : float
        Corruption fraction.
    tau_mix : int
        Mixing time of the chain generating the samples (1 for i.i.d.).
    schedule : {"analysis", "practical"} or RumemSchedule
    strict : bool
        Refuse to fit when the sample is too short for the guarantee.

    Attributes
    ----------
    location_ : float
    plan_ : RumemPlan
    bucket_means_ : ndarray of shape (L,)
    """

    def __init__(self, delta=0.05, eps=0.0, tau_mix=1, schedule="analysis", strict=True):
        self.delta = delta
        self.eps = eps
        self.tau_mix = tau_mix
        self.schedule = schedule
        self.strict = strict

    def _config(self):
        sch = self.schedule
        if isinstance(sch, str):
            sch = RumemSchedule.from_name(sch)
        return RumemConfig(delta=self.delta, eps=self.eps, tau_mix=self.tau_mix, schedule=sch)

    def fit(self, X, y=None):
        x = check_sample_vector(np.ravel(np.asarray(X, dtype=float)), "X")
        out = estimate(x, self._config(), strict=self.strict)
        self.location_ = out.estimate
        self.plan_ = out.plan
        self.bucket_means_ = out.bucket_means
        return self


class _LinearTdBase(BaseEstimator):
    def predict(self, states):
        check_is_fitted(self, "coef_")
        Phi = np.asarray(self.features, dtype=float)
        return Phi[_check_states(states, Phi.shape[0])] @ self.coef_

    def _prepare(self, X, y):
        traj = _as_trajectory(X, y)
        Phi = np.asarray(self.features, dtype=float)
        if Phi.ndim != 2:
            raise ValueError("features must be a 2-D array")
        _check_states(traj.states, Phi.shape[0])
        T = len(traj) if self.T is None else int(self.T)
        return traj, Phi, T

    def _store(self, trace):
        self.coef_ = trace.theta_final
        self.trace_ = trace
        self.n_steps_ = int(trace.times[-1])
        return self


class TD0Estimator(_LinearTdBase):
    """TD(0) with linear function approximation.

    Parameters
    ----------
    features : array-like of shape (num_states, K)
    gamma : float
    step : {"constant", "diminishing"}
    alpha : float
        Constant step size.
    c, t0 : float
        Diminishing step ``c / (t + t0)``.
    T : int or None
        Number of observations to use; all of them when None.
    theta0 : array-like of shape (K,) or None
    """

    def __init__(self, features=None, gamma=0.9, step="diminishing", alpha=0.1, c=1.0, t0=1.0,
                 T=None, theta0=None):
        self.features = features
        self.gamma = gamma
        self.step = step
        self.alpha = alpha
        self.c = c
        self.t0 = t0
        self.T = T
        self.theta0 = theta0

    def fit(self, X, y=None, theta_star=None):
        traj, Phi, T = self._prepare(X, y)
        if self.step == "constant":
            step = StepSchedule.constant(self.alpha)
        elif self.step == "diminishing":
            step = StepSchedule.diminishing(self.c, self.t0)
        else:
            raise ValueError(f"step must be 'constant' or 'diminishing', got {self.step!r}")
        cfg = Td0Config(step, T, self.theta0)
        return self._store(td0_on_trajectory(traj, Phi, self.gamma, cfg, theta_star))


class RobustTDEstimator(_LinearTdBase):
    """Robust-TD: TD(0) with a median-of-means estimate of the reward term.

    Parameters
    ----------
    features : array-like of shape (num_states, K)
    gamma : float
    alpha : float
    burn_in : int
    sigma1 : float
        ``max(1, reward bound, noise std)``.
    eps : float
    tau_mix : int
    constant_C : float
        Constant of the reset threshold.
    estimation_stride : int
    schedule : {"analysis", "practical"} or RumemSchedule
    strict : bool
    T : int or None
    theta0 : array-like of shape (K,) or None

    Attributes
    ----------
    coef_ : ndarray of shape (K,)
    trace_ : LearnerTrace
    reset_events_ : ndarray of int
    """

    def __init__(self, features=None, gamma=0.9, alpha=0.1, burn_in=1000, sigma1=1.0, eps=0.0,
                 tau_mix=1, constant_C=1.0, estimation_stride=1, schedule="analysis", strict=True,
                 T=None, theta0=None):
        self.features = features
        self.gamma = gamma
        self.alpha = alpha
        self.burn_in = burn_in
        self.sigma1 = sigma1
        self.eps = eps
        self.tau_mix = tau_mix
        self.constant_C = constant_C
        self.estimation_stride = estimation_stride
        self.schedule = schedule
        self.strict = strict
        self.T = T
        self.theta0 = theta0

    def fit(self, X, y=None, theta_star=None, b_bar=None):
        traj, Phi, T = self._prepare(X, y)
        sch = RumemSchedule.from_name(self.schedule) if isinstance(self.schedule, str) else self.schedule
        cfg = RobustTdConfig(
            alpha=self.alpha, T=T, burn_in=self.burn_in, sigma1=self.sigma1, K=Phi.shape[1],
            eps=self.eps, tau_mix=self.tau_mix, constant_C=self.constant_C,
            estimation_stride=self.estimation_stride, schedule=sch, strict=self.strict,
            theta0=self.theta0,
        )
        trace = robust_td_on_trajectory(traj, Phi, self.gamma, cfg, theta_star, b_bar)
        self.reset_events_ = trace.reset_events
        return self._store(trace)
