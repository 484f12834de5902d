import numpy as np

from .._validation import check_positive_int, check_scalar_in
from ..mrp import Mrp

TRANSITION_FLOOR = 1e-4


def generate_instance(num_states, K, gamma, reward_lo, reward_hi, seed):
    """Random MRP in the style of the synthetic benchmark.

    Transition rows are drawn uniformly from the simplex, floored at
    ``TRANSITION_FLOOR`` and renormalized (every entry positive, so the chain
    is irreducible and aperiodic). Features are ``K`` orthonormalized Gaussian
    columns divided by the largest row norm, so ``max_s ||phi(s)|| = 1``.
    Mean rewards are uniform on ``[reward_lo, reward_hi)``.
    """
    m = check_positive_int(num_states, "num_states")
    K = check_positive_int(K, "K")
    if K > m:
        raise ValueError(f"K={K} exceeds num_states={m}")
    reward_lo = check_scalar_in(reward_lo, "reward_lo")
    reward_hi = check_scalar_in(reward_hi, "reward_hi", reward_lo)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    P = rng.dirichlet(np.ones(m), size=m)
    P = np.maximum(P, TRANSITION_FLOOR)
    P /= P.sum(axis=1, keepdims=True)
    Q, _ = np.linalg.qr(rng.standard_normal((m, K)))
    Phi = Q / np.sqrt(np.einsum("ij,ij->i", Q, Q).max())
    R = rng.uniform(reward_lo, reward_hi, m) if reward_hi > reward_lo else np.full(m, reward_lo)
    return Mrp(P, R, gamma, Phi)
