"""Robust univariate mean estimation for corrupted Markovian samples.

The estimator keeps every ``tau``-th sample (``tau`` grows with the mixing
time so that the kept samples are nearly independent), splits the kept
samples into ``L`` contiguous buckets of equal size, and returns the median
of the bucket means. ``tau`` and ``L`` follow a fixed schedule in the sample
count ``N``, the confidence ``delta``, the corruption fraction ``eps`` and the
mixing time:

    tau  = ceil(log2(6 N / delta) * tau_mix)
    n    = floor((N - 1) / tau) + 1
    eps' = eps + (32 / (3 n)) * ln(24 / delta)
    L    = ceil(12 eps' n + (256 / 7) * ln(N / delta))

and the high-probability guarantee needs ``N >= max(2, 4 L tau)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_int, check_sample_vector, check_scalar_in

__all__ = [
    "RumemSchedule",
    "RumemConfig",
    "RumemPlan",
    "RumemOutput",
    "plan",
    "median_of_means",
    "estimate",
    "error_bound",
]

_INT_GUARD = 1e-9


def _ceil(x):
    return int(math.ceil(x - _INT_GUARD))


@dataclass(frozen=True)
class RumemSchedule:
    """Numeric constants of the ``(tau, L)`` schedule.

    The defaults are the constants of the high-probability analysis. They make
    the estimator unusable below roughly ``10^7`` samples at the confidence
    levels Robust-TD asks for, so :meth:`practical` offers a desk-scale
    variant with the same structure: no ``log2`` inflation of the gap, no
    confidence slack on ``eps`` and one bucket per unit of ``ln(N / delta)``.
    """

    gap_log2: bool = True
    eps_slack: float = 32.0 / 3.0
    eps_buckets: float = 12.0
    log_buckets: float = 256.0 / 7.0

    @classmethod
    def analysis(cls):
        return cls()

    @classmethod
    def practical(cls):
        return cls(gap_log2=False, eps_slack=0.0, eps_buckets=12.0, log_buckets=1.0)

    @classmethod
    def from_name(cls, name):
        try:
            return {"analysis": cls.analysis, "practical": cls.practical}[name]()
        except KeyError:
            raise ValueError(f"unknown RUMEM schedule {name!r}; use 'analysis' or 'practical'") from None

    @property
    def name(self):
        if self == RumemSchedule.analysis():
            return "analysis"
        if self == RumemSchedule.practical():
            return "practical"
        return "custom"


@dataclass(frozen=True)
class RumemConfig:
    delta: float
    eps: float = 0.0
    tau_mix: int = 1
    constant_C: float = 1.0
    schedule: RumemSchedule = field(default_factory=RumemSchedule)

    def __post_init__(self):
        check_scalar_in(self.delta, "delta", 0.0, 1.0, low_open=True, high_open=True)
        check_scalar_in(self.eps, "eps", 0.0, 0.5, high_open=True)
        check_positive_int(self.tau_mix, "tau_mix")
        check_scalar_in(self.constant_C, "constant_C", 1.0)


@dataclass(frozen=True)
class RumemPlan:
    N: int
    tau: int
    n: int
    eps_prime: float
    L: int
    bucket_size: int
    feasible: bool


@dataclass(frozen=True, eq=False)
class RumemOutput:
    estimate: float
    plan: RumemPlan
    bucket_means: np.ndarray
    theoretical_bound: float = None


def plan(N, cfg):
    """Subsampling gap, subsample size, bucket count and feasibility for ``N`` samples.

    Infeasibility (``N < max(2, 4 L tau)``) is reported through the flag.
    """
    N = check_positive_int(N, "N")
    sch = cfg.schedule
    if sch.gap_log2:
        tau = _ceil(math.log2(6.0 * N / cfg.delta) * cfg.tau_mix)
    else:
        tau = int(cfg.tau_mix)
    tau = max(tau, 1)
    n = (N - 1) // tau + 1
    eps_prime = cfg.eps + sch.eps_slack / n * math.log(24.0 / cfg.delta)
    L = max(_ceil(sch.eps_buckets * eps_prime * n + sch.log_buckets * math.log(N / cfg.delta)), 1)
    return RumemPlan(
        N=N,
        tau=tau,
        n=n,
        eps_prime=eps_prime,
        L=L,
        bucket_size=n // L,
        feasible=N >= max(2, 4 * L * tau),
    )


def _lower_median(x):
    k = (x.size - 1) // 2
    return float(np.partition(x, k)[k])


def median_of_means(samples, L):
    """Median of the means of ``L`` contiguous buckets of ``len(samples) // L`` samples.

    Samples past ``L * (len // L)`` are dropped. For even ``L`` the lower of
    the two middle bucket means is returned, so the result is always one of
    the bucket means.
    """
    x = check_sample_vector(samples)
    L = check_positive_int(L, "L")
    if L > x.size:
        raise ValueError(f"L={L} exceeds the number of samples {x.size}")
    B = x.size // L
    return _lower_median(x[: L * B].reshape(L, B).mean(axis=1))


def error_bound(N, tau, cfg, psi, rho):
    """``C max(psi, rho) (sqrt(eps) + sqrt(tau / N * ln(N / delta)))``."""
    return cfg.constant_C * max(psi, rho) * (math.sqrt(cfg.eps) + math.sqrt(tau / N * math.log(N / cfg.delta)))


def estimate(samples, cfg, psi=None, rho=None, strict=True):
    """Robust mean of a corrupted, possibly Markovian, sample sequence.

    Parameters
    ----------
    samples : array-like of shape (N,)
    cfg : RumemConfig
    psi, rho : float, optional
        Bound on the state-mean function and noise standard deviation. When
        both are given the output carries the theoretical error bound.
    strict : bool, default True
        Raise when ``N < max(2, 4 L tau)``. With ``strict=False`` the
        estimator still runs as long as every bucket holds a sample.

    Raises
    ------
    ValueError
        If the plan is infeasible (``strict``) or leaves empty buckets.
    """
    x = check_sample_vector(samples)
    p = plan(x.size, cfg)
    if strict and not p.feasible:
        raise ValueError(
            f"RUMEM plan infeasible: N={p.N} < max(2, 4*L*tau) = {max(2, 4 * p.L * p.tau)} "
            f"(tau={p.tau}, L={p.L}); not enough data for delta={cfg.delta}"
        )
    if p.bucket_size < 1:
        raise ValueError(f"RUMEM plan leaves empty buckets: n={p.n} subsamples for L={p.L} buckets")
    sub = x[: (p.n - 1) * p.tau + 1 : p.tau]
    B = p.bucket_size
    means = sub[: p.L * B].reshape(p.L, B).mean(axis=1)
    bound = None if psi is None or rho is None else error_bound(p.N, p.tau, cfg, psi, rho)
    means.flags.writeable = False
    return RumemOutput(_lower_median(means), p, means, bound)
