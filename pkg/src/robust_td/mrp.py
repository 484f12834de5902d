"""Exact analytics for finite Markov reward processes.

Everything here is a pure function of an immutable :class:`Mrp`: the
stationary distribution, mixing times, the steady-state TD(0) system
``A_bar theta + b_bar = 0`` and its solution, the limit point of TD(0) under a
state-dependent reward corruption, and the corruption vector that steers that
limit point to an arbitrary target.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    as_readonly,
    check_features,
    check_scalar_in,
    check_stochastic_matrix,
    is_primitive,
)

__all__ = [
    "Mrp",
    "SteadyState",
    "stationary_distribution",
    "mixing_profile",
    "mixing_time",
    "steady_state",
    "corrupted_fixed_point",
    "design_attack_vector",
    "bellman_values",
    "matrix_mixing_time",
    "mrp_to_text",
    "mrp_from_text",
    "save_mrp",
    "load_mrp",
]

MRP_SCHEMA = "mrp/1"


@dataclass(frozen=True, eq=False)
class Mrp:
    """Finite-state Markov reward process induced by a fixed policy.

    Parameters
    ----------
    transition : array-like of shape (m, m)
        Row-stochastic transition matrix. The chain must be irreducible and
        aperiodic; this is checked on construction.
    mean_rewards : array-like of shape (m,)
        Mean reward of each state.
    discount : float
        Discount factor in (0, 1).
    features : array-like of shape (m, K)
        Feature matrix with full column rank and rows of Euclidean norm <= 1.
    """

    transition: np.ndarray
    mean_rewards: np.ndarray
    discount: float
    features: np.ndarray

    def __post_init__(self):
        P = check_stochastic_matrix(self.transition)
        m = P.shape[0]
        R = np.asarray(self.mean_rewards, dtype=float).reshape(-1)
        if R.shape != (m,):
            raise ValueError(f"mean_rewards must have length {m}, got {R.shape}")
        if not np.all(np.isfinite(R)):
            raise ValueError("mean_rewards has non-finite entries")
        gamma = check_scalar_in(self.discount, "discount", 0.0, 1.0, low_open=True, high_open=True)
        Phi = check_features(self.features, m)
        if not is_primitive(P):
            raise ValueError("transition matrix is not irreducible and aperiodic")
        object.__setattr__(self, "transition", as_readonly(P))
        object.__setattr__(self, "mean_rewards", as_readonly(R))
        object.__setattr__(self, "discount", gamma)
        object.__setattr__(self, "features", as_readonly(Phi))

    @property
    def num_states(self):
        return self.transition.shape[0]

    @property
    def num_features(self):
        return self.features.shape[1]

    @property
    def reward_bound(self):
        """Smallest ``r_bar`` with ``|R(s)| <= r_bar`` for every state."""
        return float(np.max(np.abs(self.mean_rewards)))


@dataclass(frozen=True, eq=False)
class SteadyState:
    """Steady-state TD(0) quantities of an :class:`Mrp`."""

    pi: np.ndarray
    D: np.ndarray
    A_bar: np.ndarray
    b_bar: np.ndarray
    theta_star: np.ndarray
    omega: float
    Sigma: np.ndarray = field(repr=False)


def _power_iteration(P, tol, max_iter):
    m = P.shape[0]
    pi = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() <= tol:
            return nxt
        pi = nxt
    raise RuntimeError(
        f"power iteration did not converge within {max_iter} iterations "
        "(chain is reducible, periodic or mixes extremely slowly)"
    )


def stationary_distribution(P, tol=1e-13, max_iter=10**6):
    """Stationary distribution of an irreducible aperiodic chain.

    Power iteration from the uniform distribution, stopped once successive
    iterates are within ``tol`` in l1.

    Raises
    ------
    ValueError
        If ``P`` is not row-stochastic, or is reducible or periodic.
    RuntimeError
        If the iteration cap is hit.
    """
    P = check_stochastic_matrix(P)
    if not is_primitive(P):
        raise ValueError("chain is reducible or periodic; no unique limiting distribution")
    return _power_iteration(P, tol, max_iter)


def mixing_profile(P, t_max, pi=None):
    """Worst-start total-variation distance ``d_mix(t)`` for ``t = 1..t_max``.

    ``d_mix(t) = max_x TV(P^t(x, .), pi)``.
    """
    P = check_stochastic_matrix(P)
    if pi is None:
        pi = stationary_distribution(P)
    out = np.empty(t_max)
    Pt = np.eye(P.shape[0])
    for t in range(t_max):
        Pt = Pt @ P
        out[t] = 0.5 * np.abs(Pt - pi).sum(axis=1).max()
    return out


def mixing_time(P, eta=0.25, max_iter=10**5):
    """Exact mixing time ``min{t >= 1 : d_mix(t) <= eta}``.

    Iterates powers of ``P``; the worst-start distance is non-increasing in
    ``t`` and this is asserted as the iteration proceeds.
    """
    eta = check_scalar_in(eta, "eta", 0.0, 1.0, low_open=True, high_open=True)
    P = check_stochastic_matrix(P)
    if not is_primitive(P):
        raise ValueError("chain is reducible or periodic; mixing time is infinite")
    pi = _power_iteration(P, 1e-13, 10**6)
    Pt = np.eye(P.shape[0])
    prev = np.inf
    for t in range(1, max_iter + 1):
        Pt = Pt @ P
        d = 0.5 * np.abs(Pt - pi).sum(axis=1).max()
        if d > prev + 1e-12:
            raise AssertionError(f"d_mix increased at t={t}: {prev!r} -> {d!r}")
        if d <= eta:
            return t
        prev = d
    raise RuntimeError(f"d_mix did not drop below {eta} within {max_iter} steps")


def steady_state(mrp, residual_tol=1e-10):
    """Compute ``pi``, ``A_bar``, ``b_bar``, ``theta_star`` and ``omega``.

    ``A_bar = Phi^T D (gamma P - I) Phi`` and ``b_bar = Phi^T D R``; the clean
    TD(0) limit solves ``A_bar theta + b_bar = 0`` (LU with partial pivoting).
    """
    P, R, Phi, gamma = mrp.transition, mrp.mean_rewards, mrp.features, mrp.discount
    m = mrp.num_states
    pi = _power_iteration(P, 1e-13, 10**6)
    if np.abs(pi @ P - pi).max() > residual_tol:
        raise RuntimeError("stationary distribution failed the pi P = pi check")
    D = np.diag(pi)
    DPhi = pi[:, None] * Phi
    A_bar = DPhi.T @ (gamma * (P @ Phi) - Phi)
    b_bar = DPhi.T @ R
    Sigma = Phi.T @ DPhi
    try:
        theta_star = -np.linalg.solve(A_bar, b_bar)
    except np.linalg.LinAlgError as exc:
        raise ValueError("A_bar is singular; features are degenerate") from exc
    res = np.linalg.norm(A_bar @ theta_star + b_bar)
    if res > residual_tol * max(1.0, np.linalg.norm(b_bar)):
        raise RuntimeError(f"steady-state solve residual {res:.3g} too large")
    omega = float(np.linalg.eigvalsh(0.5 * (Sigma + Sigma.T))[0])
    # omega == 1 is reachable with one state and a unit feature.
    if not 0.0 < omega <= 1.0 + 1e-12:
        raise RuntimeError(f"smallest eigenvalue of Sigma out of range: {omega}")
    if np.linalg.norm(A_bar, 2) > 2.0 + 1e-12:
        raise RuntimeError("||A_bar||_2 exceeds 2")
    return SteadyState(
        pi=as_readonly(pi),
        D=as_readonly(D),
        A_bar=as_readonly(A_bar),
        b_bar=as_readonly(b_bar),
        theta_star=as_readonly(theta_star),
        omega=omega,
        Sigma=as_readonly(Sigma),
    )


def _check_eps(eps, allow_zero):
    return check_scalar_in(eps, "eps", 0.0, 0.5, low_open=not allow_zero, high_open=True)


def corrupted_fixed_point(ss, mrp, C, eps):
    """Limit of TD(0) when each reward is replaced by ``C(s)`` with probability ``eps``.

    Returns ``(1 - eps) theta_star + eps * (-A_bar^{-1} Phi^T D C)``.
    """
    eps = _check_eps(eps, allow_zero=True)
    C = np.asarray(C, dtype=float).reshape(-1)
    if C.shape != (mrp.num_states,) or not np.all(np.isfinite(C)):
        raise ValueError(f"C must be a finite vector of length {mrp.num_states}")
    target = -np.linalg.solve(ss.A_bar, mrp.features.T @ (ss.pi * C))
    return (1.0 - eps) * ss.theta_star + eps * target


def design_attack_vector(ss, mrp, w, eps):
    """State-bias vector ``C_w`` whose corrupted TD(0) limit is exactly ``w``.

    ``C_w = (1/eps) D^{-1} Phi (Phi^T Phi)^{-1} A_bar ((1 - eps) theta_star - w)``.
    """
    eps = _check_eps(eps, allow_zero=False)
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape != (mrp.num_features,):
        raise ValueError(f"w must have length {mrp.num_features}")
    Phi = mrp.features
    u = ss.A_bar @ ((1.0 - eps) * ss.theta_star - w)
    coef = np.linalg.solve(Phi.T @ Phi, u)
    return (Phi @ coef) / ss.pi / eps


def bellman_values(mrp):
    """Exact value function ``V = (I - gamma P)^{-1} R``."""
    m = mrp.num_states
    return np.linalg.solve(np.eye(m) - mrp.discount * mrp.transition, mrp.mean_rewards)


def matrix_mixing_time(mrp, ss, eta, max_iter=10**6):
    """Smallest ``t >= 1`` with ``||E[A_k | s_0] - A_bar||_2 <= eta`` for all ``k >= t`` and all starts.

    Uses ``E[A_k | s_0] = sum_s P^k(s_0, s) M(s)`` with
    ``M(s) = phi(s) (gamma (P Phi)(s) - phi(s))^T``. The deviation is bounded
    by ``2 d_mix(k) max_s ||M(s)||``, which is non-increasing, so the scan
    stops once that bound is below ``eta``.
    """
    eta = check_scalar_in(eta, "eta", 0.0, low_open=True)
    Phi, P, gamma = mrp.features, mrp.transition, mrp.discount
    M = Phi[:, :, None] * (gamma * (P @ Phi) - Phi)[:, None, :]
    m_norm = max(np.linalg.norm(Mi, 2) for Mi in M)
    pi = ss.pi
    Pt = np.eye(mrp.num_states)
    last_violation = 0
    for k in range(1, max_iter + 1):
        Pt = Pt @ P
        dev = np.einsum("xs,sij->xij", Pt, M) - ss.A_bar
        worst = max(np.linalg.norm(d, 2) for d in dev)
        if worst > eta:
            last_violation = k
        tv = 0.5 * np.abs(Pt - pi).sum(axis=1).max()
        if 2.0 * tv * m_norm <= eta:
            return last_violation + 1
    raise RuntimeError(f"matrix mixing time exceeds {max_iter}")


def _fmt(x):
    return format(float(x), ".17g")


def mrp_to_text(mrp):
    """Serialize to JSON with every float written at 17 significant digits."""

    def arr(a):
        return "[" + ", ".join(_fmt(v) for v in np.ravel(a)) + "]"

    return (
        "{\n"
        f'  "schema": "{MRP_SCHEMA}",\n'
        f'  "num_states": {mrp.num_states},\n'
        f'  "num_features": {mrp.num_features},\n'
        f'  "discount": {_fmt(mrp.discount)},\n'
        f'  "mean_rewards": {arr(mrp.mean_rewards)},\n'
        f'  "transition": {arr(mrp.transition)},\n'
        f'  "features": {arr(mrp.features)}\n'
        "}\n"
    )


def mrp_from_text(text):
    data = json.loads(text)
    known = {"schema", "num_states", "num_features", "discount", "mean_rewards", "transition", "features"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown keys in MRP file: {sorted(unknown)}")
    if data.get("schema", MRP_SCHEMA) != MRP_SCHEMA:
        raise ValueError(f"unsupported MRP schema {data['schema']!r}")
    m = int(data["num_states"])
    feats = np.asarray(data["features"], dtype=float)
    K = int(data.get("num_features", feats.size // m))
    return Mrp(
        transition=np.asarray(data["transition"], dtype=float).reshape(m, m),
        mean_rewards=np.asarray(data["mean_rewards"], dtype=float),
        discount=float(data["discount"]),
        features=feats.reshape(m, K),
    )


def save_mrp(mrp, path):
    with open(path, "w") as fh:
        fh.write(mrp_to_text(mrp))


def load_mrp(path):
    with open(path) as fh:
        return mrp_from_text(fh.read())
