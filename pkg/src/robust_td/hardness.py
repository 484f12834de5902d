"""Two single-state MRPs whose contaminated reward streams are identical.

MRP 1 pays ``+a`` (``a = rho / sqrt(eps)``) with probability
``eps / (4 (1 - eps))`` and 0 otherwise; MRP 2 is its mirror image. Their
attack distributions put masses ``(1/2, 1/4, 1/4)`` and ``(1/4, 1/4, 1/2)`` on
``(-a, 0, a)``. Both contaminated mixtures equal
``(-a, 0, a)`` with masses ``(eps/2, 1 - eps, eps/2)``, while the value
functions are ``rho sqrt(eps) / (2 (1 - eps) (1 - gamma))`` apart. No
estimator can therefore be accurate on both.

Masses are combined in exact rational arithmetic (``fractions.Fraction``
over the binary value of ``eps``) so mixture equality is an exact identity,
then rounded once to float.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from ._validation import check_positive_int, check_scalar_in
from .mrp import Mrp

__all__ = ["DiscreteDist", "LowerBoundInstance", "IndistinguishabilityReport", "build_instance", "verify_indistinguishability"]


@dataclass(frozen=True, eq=False)
class DiscreteDist:
    """Finite distribution on strictly increasing atoms."""

    support: tuple
    probs: tuple
    exact_probs: Optional[tuple] = None

    def __post_init__(self):
        if len(self.support) != len(self.probs) or not self.support:
            raise ValueError("support and probs must be non-empty and of equal length")
        if any(b <= a for a, b in zip(self.support, self.support[1:])):
            raise ValueError("atoms must be strictly increasing")
        if any(p < 0 for p in self.probs) or abs(math.fsum(self.probs) - 1.0) > 1e-15:
            raise ValueError("probabilities must be non-negative and sum to 1")

    @classmethod
    def from_exact(cls, support, masses):
        masses = tuple(masses)
        return cls(tuple(float(a) for a in support), tuple(float(p) for p in masses), masses)

    @property
    def mean(self):
        return math.fsum(a * p for a, p in zip(self.support, self.probs))

    @property
    def variance(self):
        mu = self.mean
        return math.fsum(p * (a - mu) ** 2 for a, p in zip(self.support, self.probs))

    def sample(self, rng, size):
        return rng.choice(np.asarray(self.support), size=size, p=np.asarray(self.probs))

    def same_as(self, other):
        """Atom-by-atom exact equality (exact masses when both carry them)."""
        if self.support != other.support:
            return False
        if self.exact_probs is not None and other.exact_probs is not None:
            return self.exact_probs == other.exact_probs
        return self.probs == other.probs


def _mix(eps, dist_p, dist_q):
    return DiscreteDist.from_exact(
        dist_p.support,
        ((1 - eps) * p + eps * q for p, q in zip(dist_p.exact_probs, dist_q.exact_probs)),
    )


@dataclass(frozen=True, eq=False)
class LowerBoundInstance:
    rho: float
    eps: float
    gamma: float
    D1: DiscreteDist
    D2: DiscreteDist
    Q1: DiscreteDist
    Q2: DiscreteDist
    mixture1: DiscreteDist
    mixture2: DiscreteDist

    @property
    def R1(self):
        return self.rho * math.sqrt(self.eps) / (4.0 * (1.0 - self.eps))

    @property
    def R2(self):
        return -self.R1

    @property
    def V1(self):
        return self.R1 / (1.0 - self.gamma)

    @property
    def V2(self):
        return self.R2 / (1.0 - self.gamma)

    @property
    def value_gap(self):
        """``rho sqrt(eps) / (2 (1 - eps) (1 - gamma))``."""
        return self.rho * math.sqrt(self.eps) / (2.0 * (1.0 - self.eps) * (1.0 - self.gamma))

    @property
    def error_threshold(self):
        """``rho sqrt(eps) / 8``: with probability >= 1/2 some labeling is missed by more."""
        return self.rho * math.sqrt(self.eps) / 8.0

    def mixtures_identical(self):
        return self.mixture1.same_as(self.mixture2)

    def as_mrp(self, which=1):
        """The single-state MRP (features ``[[1]]``) of instance ``which``."""
        R = self.R1 if which == 1 else self.R2
        return Mrp([[1.0]], [R], self.gamma, [[1.0]])


def build_instance(rho, eps, gamma):
    rho = check_scalar_in(rho, "rho", 0.0, low_open=True)
    eps = check_scalar_in(eps, "eps", 0.0, 0.5, low_open=True, high_open=True)
    gamma = check_scalar_in(gamma, "gamma", 0.0, 1.0, low_open=True, high_open=True)
    a = rho / math.sqrt(eps)
    atoms = (-a, 0.0, a)
    e = Fraction(eps)
    tail = e / (4 * (1 - e))
    zero = Fraction(0)
    D1 = DiscreteDist.from_exact(atoms, (zero, 1 - tail, tail))
    D2 = DiscreteDist.from_exact(atoms, (tail, 1 - tail, zero))
    Q1 = DiscreteDist.from_exact(atoms, (Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)))
    Q2 = DiscreteDist.from_exact(atoms, (Fraction(1, 4), Fraction(1, 4), Fraction(1, 2)))
    return LowerBoundInstance(rho, eps, gamma, D1, D2, Q1, Q2, _mix(e, D1, Q1), _mix(e, D2, Q2))


@dataclass(frozen=True)
class IndistinguishabilityReport:
    mixtures_identical: bool
    outputs_identical: bool
    estimate: float
    error_vs_R1: float
    error_vs_R2: float
    threshold: float
    value_gap: float

    @property
    def worst_error(self):
        return max(self.error_vs_R1, self.error_vs_R2)

    @property
    def exceeds_threshold(self):
        return self.worst_error > self.threshold


def verify_indistinguishability(inst, num_samples, seed, estimator: Callable = np.mean):
    """Exact mixture check plus one simulated dataset fed to ``estimator`` under both labelings.

    The common stream is drawn from ``mixture1``; since ``mixture2`` is the
    same distribution, the stream is a valid sample of either instance.
    """
    num_samples = check_positive_int(num_samples, "num_samples")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    x = inst.mixture1.sample(rng, num_samples)
    est1 = float(estimator(x))
    est2 = float(estimator(x.copy()))
    return IndistinguishabilityReport(
        mixtures_identical=inst.mixtures_identical(),
        outputs_identical=est1 == est2,
        estimate=est1,
        error_vs_R1=abs(est1 - inst.R1),
        error_vs_R2=abs(est2 - inst.R2),
        threshold=inst.error_threshold,
        value_gap=inst.value_gap,
    )
