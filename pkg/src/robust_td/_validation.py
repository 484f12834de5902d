"""Input validation helpers shared by the estimators and the analytic layer."""

import numbers

import numpy as np


def as_readonly(a, dtype=float):
    """Return a C-contiguous, non-writeable copy of ``a``."""
    out = np.array(a, dtype=dtype, copy=True, order="C")
    out.flags.writeable = False
    return out


def check_scalar_in(x, name, low=None, high=None, low_open=False, high_open=False):
    """Validate a real scalar against an (optionally half-open) interval."""
    if isinstance(x, bool) or not isinstance(x, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(x).__name__}")
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x}")
    if low is not None and (x < low or (low_open and x == low)):
        raise ValueError(f"{name}={x} must be {'>' if low_open else '>='} {low}")
    if high is not None and (x > high or (high_open and x == high)):
        raise ValueError(f"{name}={x} must be {'<' if high_open else '<='} {high}")
    return x


def check_positive_int(x, name, minimum=1):
    if isinstance(x, bool) or not isinstance(x, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(x).__name__}")
    if x < minimum:
        raise ValueError(f"{name}={x} must be >= {minimum}")
    return int(x)


def check_stochastic_matrix(P, atol=1e-12):
    """Validate a square row-stochastic matrix and return it as a float array."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise ValueError(f"transition matrix must be square and non-empty, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValueError("transition matrix has non-finite entries")
    if np.any(P < 0):
        raise ValueError("transition matrix has negative entries")
    dev = np.abs(P.sum(axis=1) - 1.0)
    if np.any(dev > atol):
        bad = int(np.argmax(dev))
        raise ValueError(f"row {bad} of the transition matrix sums to {P[bad].sum()!r}, not 1")
    return P


def is_primitive(P):
    """Exact primitivity test for a non-negative square matrix.

    A non-negative ``m x m`` matrix is primitive iff ``P**e > 0`` entrywise for
    ``e = (m - 1)**2 + 1`` (Wielandt's bound, which is below ``m**2``). Only
    the zero pattern matters, so the power is taken in boolean arithmetic by
    repeated squaring.
    """
    B = (np.asarray(P) > 0).astype(np.int64)
    m = B.shape[0]
    e = (m - 1) ** 2 + 1
    result = np.eye(m, dtype=np.int64)
    base = B
    while e:
        if e & 1:
            result = np.minimum(result @ base, 1)
        e >>= 1
        if e:
            base = np.minimum(base @ base, 1)
    return bool(np.all(result > 0))


def check_features(Phi, num_states, norm_tol=1e-12, rank_tol=1e-10):
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim == 1:
        Phi = Phi.reshape(-1, 1)
    if Phi.ndim != 2 or Phi.shape[0] != num_states:
        raise ValueError(f"features must have shape ({num_states}, K), got {Phi.shape}")
    K = Phi.shape[1]
    if K == 0 or K > num_states:
        raise ValueError(f"need 1 <= K <= num_states, got K={K}")
    if not np.all(np.isfinite(Phi)):
        raise ValueError("features have non-finite entries")
    sq = np.einsum("ij,ij->i", Phi, Phi)
    if np.any(sq > 1.0 + norm_tol):
        bad = int(np.argmax(sq))
        raise ValueError(f"feature row {bad} has squared norm {sq[bad]:.6g} > 1")
    smin = np.linalg.svd(Phi, compute_uv=False)[-1]
    if smin <= rank_tol:
        raise ValueError(f"features are not full column rank (smallest singular value {smin:.3g})")
    return Phi


def check_sample_vector(x, name="samples"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {x.shape}")
    if x.size == 0:
        raise ValueError(f"{name} is empty")
    return x
