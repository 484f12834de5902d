"""Compiled inner loops. Callers validate inputs; nothing here checks shapes."""

import numpy as np
from numba import njit

# Status codes returned by the learner kernels.
OK = 0
DIVERGED = 1
INFEASIBLE = 2
A_NORM_VIOLATION = 3


@njit(cache=True)
def walk_chain(cdf, s0, u):
    T = u.shape[0]
    m = cdf.shape[1]
    states = np.empty(T + 1, dtype=np.int64)
    s = s0
    states[0] = s
    for t in range(T):
        nxt = np.searchsorted(cdf[s], u[t], side="right")
        if nxt >= m:
            nxt = m - 1
        s = nxt
        states[t + 1] = s
    return states


@njit(cache=True)
def _sq_dist(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        d = a[i] - b[i]
        acc += d * d
    return acc


@njit(cache=True)
def td0_kernel(states, rewards, Phi, gamma, theta0, step_kind, alpha, c, t0,
               theta_star, record_every, guard, check_a_norm):
    """TD(0): ``theta <- theta + alpha_t (r + gamma <phi', theta> - <phi, theta>) phi``.

    ``step_kind`` 0 is constant ``alpha``; 1 is ``c / (t + t0)``.
    """
    T = rewards.shape[0]
    K = Phi.shape[1]
    theta = theta0.copy()
    n_rec = T // record_every + 1
    d_series = np.empty(n_rec)
    d_series[0] = _sq_dist(theta, theta_star)
    rec = 1
    status = OK
    for t in range(T):
        s = states[t]
        sp = states[t + 1]
        v = 0.0
        vp = 0.0
        for i in range(K):
            v += Phi[s, i] * theta[i]
            vp += Phi[sp, i] * theta[i]
        if check_a_norm:
            # A_t = phi (gamma phi' - phi)^T is rank one.
            n1 = 0.0
            n2 = 0.0
            for i in range(K):
                n1 += Phi[s, i] * Phi[s, i]
                w = gamma * Phi[sp, i] - Phi[s, i]
                n2 += w * w
            if np.sqrt(n1 * n2) > 2.0 + 1e-12:
                status = A_NORM_VIOLATION
                break
        a = alpha if step_kind == 0 else c / (t + t0)
        delta = rewards[t] + gamma * vp - v
        norm2 = 0.0
        for i in range(K):
            theta[i] += a * delta * Phi[s, i]
            norm2 += theta[i] * theta[i]
        if not norm2 <= guard * guard:
            status = DIVERGED
            break
        if (t + 1) % record_every == 0:
            d_series[rec] = _sq_dist(theta, theta_star)
            rec += 1
    return theta, d_series[:rec], status, t


@njit(cache=True)
def _log2(x):
    return np.log(x) / np.log(2.0)


@njit(cache=True)
def rumem_plan_kernel(N, delta, eps, tau_mix, gap_log2, eps_slack, eps_buckets, log_buckets):
    """Same arithmetic as :func:`robust_td.rumem.plan`; returns (tau, n, L, bucket_size, feasible)."""
    guard = 1e-9
    if gap_log2:
        raw = _log2(6.0 * N / delta) * tau_mix
    else:
        raw = float(tau_mix)
    tau = int(np.ceil(raw - guard))
    if tau < 1:
        tau = 1
    n = (N - 1) // tau + 1
    eps_p = eps + eps_slack / n * np.log(24.0 / delta)
    raw_L = eps_buckets * eps_p * n + log_buckets * np.log(N / delta)
    L = int(np.ceil(raw_L - guard))
    if L < 1:
        L = 1
    B = n // L
    feasible = N >= 2 and N >= 4 * L * tau
    return tau, n, L, B, feasible


@njit(cache=True)
def _sorted_insert(arr, count, x):
    lo = 0
    hi = count
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    j = count
    while j > lo:
        arr[j] = arr[j - 1]
        j -= 1
    arr[lo] = x


@njit(cache=True)
def robust_td_kernel(states, rewards, Phi, gamma, theta0, alpha, burn_in,
                     delta, eps, tau_mix, gap_log2, eps_slack, eps_buckets, log_buckets,
                     strict, thr_C, sigma1, thr_T, stride,
                     theta_star, b_bar, record_every, guard, check_a_norm):
    """Robust-TD with per-component median-of-means estimates of ``b_bar``.

    Bucket sums for the current ``(tau, bucket_size)`` pair are cached and the
    bucket means of each component are kept in a sorted array, so a
    recomputation costs O(K L) for inserting new buckets instead of O(K t).
    """
    T = rewards.shape[0]
    K = Phi.shape[1]
    theta = theta0.copy()
    n_rec = T // record_every + 1
    d_series = np.empty(n_rec)
    berr_series = np.full(n_rec, np.nan)
    reset_flags = np.zeros(T, dtype=np.bool_)
    d_series[0] = _sq_dist(theta, theta_star)
    rec = 1
    status = OK

    # y[k, i] = phi_i(s_k) * r_k
    Y = np.empty((T, K))
    for k in range(T):
        for i in range(K):
            Y[k, i] = Phi[states[k], i] * rewards[k]

    # tau is non-decreasing in N, so the smallest gap bounds the bucket count.
    tau_min = rumem_plan_kernel(burn_in + 2, delta, eps, tau_mix, gap_log2,
                                eps_slack, eps_buckets, log_buckets)[0]
    sorted_means = np.empty((K, (T - 1) // tau_min + 1))
    n_buckets = 0
    cur_tau = -1
    cur_B = -1
    b_hat = np.zeros(K)
    have_b = False
    max_excess = -np.inf
    sqrtK = np.sqrt(K)
    log_thr = np.log(12.0 * K * float(thr_T) ** 3)

    t = 0
    for t in range(T):
        s = states[t]
        sp = states[t + 1]
        if t <= burn_in:
            if (t + 1) % record_every == 0:
                d_series[rec] = _sq_dist(theta, theta_star)
                rec += 1
            continue

        if (t - burn_in - 1) % stride == 0 or not have_b:
            N = t + 1
            tau, n, L, B, feasible = rumem_plan_kernel(
                N, delta, eps, tau_mix, gap_log2, eps_slack, eps_buckets, log_buckets)
            if B < 1 or (strict and not feasible):
                status = INFEASIBLE
                break
            if tau != cur_tau or B != cur_B:
                cur_tau = tau
                cur_B = B
                n_buckets = 0
            while n_buckets < L:
                j = n_buckets
                for i in range(K):
                    acc = 0.0
                    for q in range(B):
                        acc += Y[(j * B + q) * tau, i]
                    _sorted_insert(sorted_means[i], n_buckets, acc / B)
                n_buckets += 1
            # L never shrinks for a fixed (tau, B) pair, so the first L buckets
            # are exactly the ones held in sorted_means.
            med = (L - 1) // 2
            bn2 = 0.0
            for i in range(K):
                b_hat[i] = sorted_means[i, med]
                bn2 += b_hat[i] * b_hat[i]
            G = thr_C * sqrtK * sigma1 * (np.sqrt(eps) + 2.0 * log_thr * np.sqrt(tau_mix / t))
            if np.sqrt(bn2) > G + sigma1:
                for i in range(K):
                    b_hat[i] = 0.0
                reset_flags[t] = True
                bn2 = 0.0
            excess = np.sqrt(bn2) - (G + sigma1)
            if excess > max_excess:
                max_excess = excess
            have_b = True

        v = 0.0
        vp = 0.0
        for i in range(K):
            v += Phi[s, i] * theta[i]
            vp += Phi[sp, i] * theta[i]
        if check_a_norm:
            n1 = 0.0
            n2 = 0.0
            for i in range(K):
                n1 += Phi[s, i] * Phi[s, i]
                w = gamma * Phi[sp, i] - Phi[s, i]
                n2 += w * w
            if np.sqrt(n1 * n2) > 2.0 + 1e-12:
                status = A_NORM_VIOLATION
                break
        # A_t theta = phi(s) (gamma <phi', theta> - <phi, theta>)
        scal = gamma * vp - v
        norm2 = 0.0
        for i in range(K):
            theta[i] += alpha * (Phi[s, i] * scal + b_hat[i])
            norm2 += theta[i] * theta[i]
        if not norm2 <= guard * guard:
            status = DIVERGED
            break
        if (t + 1) % record_every == 0:
            d_series[rec] = _sq_dist(theta, theta_star)
            berr_series[rec] = np.sqrt(_sq_dist(b_hat, b_bar))
            rec += 1
    return theta, d_series[:rec], berr_series[:rec], reset_flags, max_excess, status, t
