"""Trajectory sampling with noisy clean rewards and Huber-contaminated observations.

Random streams
--------------
Every trajectory is driven by ``numpy.random.SeedSequence(seed)``, spawned
into five child sequences in a fixed order::

    0: initial state   1: transitions   2: corruption flags Z_t
    3: clean-reward noise                 4: attack generator

Each child seeds its own ``Philox`` (counter-based) bit generator, so changing
how one stream is consumed (for example a different attack) leaves the state
path, the corruption times and the clean noise unchanged.
"""

import csv
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import _kernels
from ._validation import check_positive_int, check_scalar_in
from .mrp import Mrp, _power_iteration

__all__ = [
    "RewardNoise",
    "AttackModel",
    "Observation",
    "Trajectory",
    "stream_generators",
    "sample_trajectory",
    "empirical_state_frequencies",
]

STREAMS = ("start", "transitions", "corruption", "noise", "attack")


def stream_generators(seed):
    """Independent ``Generator`` objects for the five trajectory streams."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.Philox(child)) for name, child in zip(STREAMS, children)}


@dataclass(frozen=True)
class RewardNoise:
    """Mean-zero noise added to ``R(s)`` for clean rewards.

    Use the constructors :meth:`deterministic`, :meth:`gaussian`,
    :meth:`uniform_shift` and :meth:`two_point_heavy_tail`.
    """

    kind: str = "deterministic"
    variance: float = 0.0
    half_width: float = 0.0
    magnitude: float = 0.0
    probability: float = 0.0

    @classmethod
    def deterministic(cls):
        return cls("deterministic")

    @classmethod
    def gaussian(cls, variance):
        return cls("gaussian", variance=check_scalar_in(variance, "variance", 0.0))

    @classmethod
    def uniform_shift(cls, half_width):
        return cls("uniform_shift", half_width=check_scalar_in(half_width, "half_width", 0.0))

    @classmethod
    def two_point_heavy_tail(cls, magnitude, probability):
        """``+magnitude`` w.p. ``probability``, else ``-magnitude p / (1 - p)``."""
        return cls(
            "two_point_heavy_tail",
            magnitude=check_scalar_in(magnitude, "magnitude", 0.0),
            probability=check_scalar_in(probability, "probability", 0.0, 1.0, low_open=True, high_open=True),
        )

    def __post_init__(self):
        if self.kind not in ("deterministic", "gaussian", "uniform_shift", "two_point_heavy_tail"):
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @property
    def variance_bound(self):
        """The variance ``rho^2`` of the noise (exact for every kind)."""
        if self.kind == "gaussian":
            return self.variance
        if self.kind == "uniform_shift":
            return self.half_width**2 / 3.0
        if self.kind == "two_point_heavy_tail":
            p = self.probability
            return self.magnitude**2 * p / (1.0 - p)
        return 0.0

    def sample(self, rng, size):
        if self.kind == "gaussian":
            return rng.normal(0.0, np.sqrt(self.variance), size)
        if self.kind == "uniform_shift":
            return rng.uniform(-self.half_width, self.half_width, size)
        if self.kind == "two_point_heavy_tail":
            p = self.probability
            hit = rng.random(size) < p
            return np.where(hit, self.magnitude, -self.magnitude * p / (1.0 - p))
        return np.zeros(size)


def _constant(value):
    def gen(states, times, clean, rng):
        return np.full(np.shape(states), value, dtype=float)

    return gen


def _state_bias(C):
    def gen(states, times, clean, rng):
        return C[states]

    return gen


def _sign_flip(scale):
    def gen(states, times, clean, rng):
        return -scale * np.asarray(clean, dtype=float)

    return gen


@dataclass(frozen=True, eq=False)
class AttackModel:
    """Huber contamination: with probability ``eps`` the reward comes from ``generator``.

    ``generator(states, times, clean_rewards, rng)`` receives arrays covering
    every corrupted step of a trajectory, in time order, and returns the
    corrupted rewards. It never sees the corruption flags of other steps.
    Scalar callables ``f(state, time, clean_reward, rng)`` can be wrapped with
    :meth:`custom`.
    """

    eps: float
    generator: Callable = _constant(0.0)
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(
            self, "eps", check_scalar_in(self.eps, "eps", 0.0, 0.5, high_open=True)
        )

    @classmethod
    def none(cls):
        return cls(0.0, _constant(0.0), "none")

    @classmethod
    def constant_bias(cls, eps, bias):
        return cls(eps, _constant(float(bias)), "constant_bias")

    @classmethod
    def state_bias(cls, eps, C):
        C = np.array(C, dtype=float)
        C.flags.writeable = False
        return cls(eps, _state_bias(C), "state_bias")

    @classmethod
    def sign_flip(cls, eps, scale=1.0):
        return cls(eps, _sign_flip(float(scale)), "sign_flip")

    @classmethod
    def custom(cls, eps, fn, vectorized=False):
        if vectorized:
            return cls(eps, fn, "custom")

        def gen(states, times, clean, rng):
            return np.array([fn(int(s), int(t), float(c), rng) for s, t, c in zip(states, times, clean)], dtype=float)

        return cls(eps, gen, "custom")

    def generate(self, states, times, clean, rng):
        out = np.asarray(self.generator(states, times, clean, rng), dtype=float)
        if out.shape != np.shape(states):
            raise ValueError(f"attack generator returned shape {out.shape}, expected {np.shape(states)}")
        return out


class Observation(NamedTuple):
    state: int
    next_state: int
    reward: float
    was_corrupted: Optional[bool]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """``T`` observed transitions ``(s_t, s_{t+1}, r_t)``.

    ``states`` has length ``T + 1``. ``corrupted`` is diagnostic only and may
    be ``None`` (masked); learners never read it.
    """

    states: np.ndarray
    rewards: np.ndarray
    corrupted: Optional[np.ndarray] = None

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.int64)
        rewards = np.asarray(self.rewards, dtype=float)
        if states.ndim != 1 or rewards.ndim != 1 or states.size != rewards.size + 1:
            raise ValueError("need len(states) == len(rewards) + 1")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "rewards", rewards)
        if self.corrupted is not None:
            object.__setattr__(self, "corrupted", np.asarray(self.corrupted, dtype=bool))

    def __len__(self):
        return self.rewards.size

    def __getitem__(self, t):
        if not -len(self) <= t < len(self):
            raise IndexError(t)
        t = t % len(self)
        flag = None if self.corrupted is None else bool(self.corrupted[t])
        return Observation(int(self.states[t]), int(self.states[t + 1]), float(self.rewards[t]), flag)

    def __iter__(self):
        for t in range(len(self)):
            yield self[t]

    def masked(self):
        return Trajectory(self.states, self.rewards, None)

    def head(self, T):
        """The first ``T`` observations."""
        c = None if self.corrupted is None else self.corrupted[:T]
        return Trajectory(self.states[: T + 1], self.rewards[:T], c)

    def to_csv(self, path):
        """Columns ``t, s_t, s_next, reward, was_corrupted``; rewards at 17 significant digits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "s_t", "s_next", "reward", "was_corrupted"])
            flags = self.corrupted
            for t in range(len(self)):
                flag = "" if flags is None else int(flags[t])
                w.writerow([t, self.states[t], self.states[t + 1], format(self.rewards[t], ".17g"), flag])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError("empty trajectory file")
        states = [int(r["s_t"]) for r in rows] + [int(rows[-1]["s_next"])]
        rewards = [float(r["reward"]) for r in rows]
        flags = None if rows[0]["was_corrupted"] == "" else [bool(int(r["was_corrupted"])) for r in rows]
        return cls(np.array(states), np.array(rewards), None if flags is None else np.array(flags))


def sample_trajectory(mrp: Mrp, noise: RewardNoise, attack: AttackModel, T, seed, start="stationary"):
    """Sample ``T`` corrupted observations from the chain of ``mrp``.

    Parameters
    ----------
    start : "stationary" or int
        Draw ``s_0`` from the stationary distribution, or fix it.
    """
    T = check_positive_int(T, "T")
    m = mrp.num_states
    rngs = stream_generators(seed)
    if isinstance(start, str):
        if start != "stationary":
            raise ValueError(f"start must be 'stationary' or a state index, got {start!r}")
        pi = _power_iteration(mrp.transition, 1e-13, 10**6)
        s0 = int(rngs["start"].choice(m, p=pi))
    else:
        s0 = int(start)
        if not 0 <= s0 < m:
            raise ValueError(f"start state {s0} out of range")
    cdf = np.cumsum(mrp.transition, axis=1)
    states = _kernels.walk_chain(cdf, s0, rngs["transitions"].random(T))
    corrupted = rngs["corruption"].random(T) < attack.eps
    cur = states[:-1]
    rewards = mrp.mean_rewards[cur] + noise.sample(rngs["noise"], T)
    idx = np.flatnonzero(corrupted)
    if idx.size:
        rewards[idx] = attack.generate(cur[idx], idx, rewards[idx], rngs["attack"])
    return Trajectory(states, rewards, corrupted)


def empirical_state_frequencies(traj, num_states=None):
    """Visit frequencies of ``s_0, ..., s_{T-1}``."""
    cur = traj.states[:-1]
    if cur.size == 0:
        raise ValueError("empty trajectory")
    m = int(cur.max()) + 1 if num_states is None else int(num_states)
    return np.bincount(cur, minlength=m) / cur.size
