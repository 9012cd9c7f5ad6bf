"""Compiled inner loops shared by the belief, encoder and sim modules.

Grouped belief layout
---------------------
Every message's unnormalized posterior is ``q**a * p**(t - a) / M`` where ``a``
counts the steps in which it was multiplied by ``q``. Messages with the same
``a`` form one group, so a state is an int64 array ``cnt`` indexed by ``a``
plus the occupied key range ``[lo, hi]``. Relative weights come from the
table ``pw[j] = 2**(-j*C2)`` as ``w[a] = pw[hi - a]``.

The true message is tracked by its key ``ta`` and, for the fixed-label mode,
its rank ``tr`` inside the group. Within a group, split members with rank
below ``s0[a]`` go to S0; after an update the merged group lists promoted
members (from key ``a - 1``) before the ones that stayed.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

STATUS_DONE = 0
STATUS_MAX_STEPS = 1
STATUS_NEED_DRAWS = 2

# per-trial integer outputs
I_STATUS, I_STEPS, I_TAU, I_TAU_EPS, I_TAU_HALF, I_TAU_STAR, I_CORRECT, I_FALLBACKS = range(8)
N_INT = 8

# per-trial increment statistics, split by regime of U_theta(t)
(
    S_N_COMM,
    S_SUM_COMM,
    S_SUMSQ_COMM,
    S_N_CONF,
    S_SUM_CONF,
    S_SUMSQ_CONF,
    S_N_CONF_PLUS,
    S_N_CONF_MINUS,
    S_N_CONF_OTHER,
    S_N_STEP_VIOLATIONS,
    S_MAX_ABS_RATIO,
    S_N_EXC,
    S_EXC_STEPS,
    S_N_SED_VIOLATIONS,
) = range(14)
N_STATS = 14

# relative slack for the SED check on floating-point side masses
SED_TOL = 1e-12

# |dU| within STEP_TOL * C2 of C2 counts as a +-C2 step / as not exceeding C2
STEP_TOL = 1e-9


@njit(cache=True)
def weight_table(c2, size):
    pw = np.empty(size)
    for j in range(size):
        pw[j] = 2.0 ** (-j * c2)
    return pw


@njit(cache=True)
def total_weight(cnt, lo, hi, pw):
    z = 0.0
    for a in range(lo, hi + 1):
        if cnt[a] > 0:
            z += cnt[a] * pw[hi - a]
    return z


@njit(cache=True)
def llr_parts(cnt, lo, hi, g, pw):
    """LLR of one member of group ``g`` as ``(d, L)`` with ``U = d*C2 - L``.

    ``L = log2(S) >= 0`` where ``S`` is the mass of all other messages relative
    to the heaviest of them, so nothing near 0 or 1 is ever subtracted.
    """
    aref = hi
    while cnt[aref] - (1 if aref == g else 0) == 0:
        aref -= 1
    s = 0.0
    for a in range(lo, aref + 1):
        c = cnt[a] - (1 if a == g else 0)
        if c > 0:
            s += c * pw[aref - a]
    return g - aref, math.log2(s)


@njit(cache=True)
def sed_split(cnt, lo, hi, pw, s0, s1):
    """Group-wise SED partition written into ``s0``/``s1``.

    Groups are taken in descending posterior order and every member joins
    the currently lighter side (ties go to side A). The last member to join
    the final heavy side is its smallest and arrived when that side was not
    heavier, so ``pi0 - pi1 <= min_{S0} rho``. The heavy side becomes S0
    (side A on an exact tie). Returns ``(pi0, pi1)`` in units of the top
    group's weight.
    """
    m_a = 0.0
    m_b = 0.0
    for a in range(hi, lo - 1, -1):
        c = cnt[a]
        if c == 0:
            s0[a] = 0
            s1[a] = 0
            continue
        w = pw[hi - a]
        if w == 0.0:
            # underflowed members carry no mass; the lighter side takes them
            if m_a <= m_b:
                s0[a] = c
                s1[a] = 0
            else:
                s0[a] = 0
                s1[a] = c
            continue
        # gap in member units; compared as a float first so that tiny
        # relative weights cannot overflow the integer conversion
        if m_a <= m_b:
            gap = (m_b - m_a) / w
            if gap >= c:
                n_a = c
            else:
                m = int(math.floor(gap)) + 1
                n_a = c if m >= c else m + (c - m) // 2
        else:
            gap = (m_a - m_b) / w
            if gap >= c:
                n_a = 0
            else:
                m = max(1, int(math.ceil(gap)))
                n_a = 0 if m >= c else (c - m + 1) // 2
        s0[a] = n_a
        s1[a] = c - n_a
        m_a += n_a * w
        m_b += (c - n_a) * w
    if m_b > m_a:
        for a in range(lo, hi + 1):
            tmp = s0[a]
            s0[a] = s1[a]
            s1[a] = tmp
        return m_b, m_a
    return m_a, m_b


@njit(cache=True)
def sed_ok(s0, lo, hi, pw, pi0, pi1):
    """``0 <= pi0 - pi1 <= min_{S0} rho`` in units of the top group's weight."""
    a = lo
    while a < hi and s0[a] == 0:
        a += 1
    if s0[a] == 0:
        return False
    diff = pi0 - pi1
    slack = SED_TOL * (pi0 + pi1)
    return -slack <= diff <= pw[hi - a] + slack


@njit(cache=True)
def theta_side_fixed(s0, ta, tr):
    return 0 if tr < s0[ta] else 1


@njit(cache=True)
def bayes_shift(cnt, lo, hi, s0, s1, y, out):
    """Counts after observing ``y``: side-``y`` members gain one ``q`` factor.

    Writes into ``out`` (indices ``lo..hi+1``) and returns the new ``(lo, hi)``.
    """
    for a in range(lo, hi + 2):
        out[a] = 0
    for a in range(lo, hi + 1):
        if y == 0:
            out[a + 1] += s0[a]
            out[a] += s1[a]
        else:
            out[a + 1] += s1[a]
            out[a] += s0[a]
    new_lo = lo
    while out[new_lo] == 0:
        new_lo += 1
    new_hi = hi + 1
    while out[new_hi] == 0:
        new_hi -= 1
    return new_lo, new_hi


@njit(cache=True)
def theta_after_shift(s0, s1, y, ta, tr, side, lo):
    """New ``(key, rank)`` of the true message after observing ``y``."""
    side_rank = tr if side == 0 else tr - s0[ta]
    if side == y:
        return ta + 1, side_rank
    promoted = 0
    if ta - 1 >= lo:
        promoted = s0[ta - 1] if y == 0 else s1[ta - 1]
    return ta, promoted + side_rank


@njit(cache=True)
def _record_step(stats, u_prev, u, c2):
    du = u - u_prev
    ratio = abs(du) / c2
    if ratio > stats[S_MAX_ABS_RATIO]:
        stats[S_MAX_ABS_RATIO] = ratio
    if ratio > 1.0 + STEP_TOL:
        stats[S_N_STEP_VIOLATIONS] += 1.0
    if u_prev < 0.0:
        stats[S_N_COMM] += 1.0
        stats[S_SUM_COMM] += du
        stats[S_SUMSQ_COMM] += du * du
    else:
        stats[S_N_CONF] += 1.0
        stats[S_SUM_CONF] += du
        stats[S_SUMSQ_CONF] += du * du
        if abs(du - c2) <= STEP_TOL * c2:
            stats[S_N_CONF_PLUS] += 1.0
        elif abs(du + c2) <= STEP_TOL * c2:
            stats[S_N_CONF_MINUS] += 1.0
        else:
            stats[S_N_CONF_OTHER] += 1.0


@njit(cache=True)
def _star_index(d, big_l, c2):
    # floor(U / C2) for U = d*C2 - L with L >= 0
    if big_l == 0.0:
        return d
    return d - math.ceil(big_l / c2)


@njit(cache=True)
def sed_trial(M, c2, p, b_thresh, n_star, max_steps, noise, aux, uniform_theta,
              pw, cnt, nxt, s0, s1, out, stats, trace):
    """One SED transmission, run until tau, tau_theta(eps) and tau* have all fired.

    ``out`` receives the integer record (``I_*`` slots), ``stats`` the
    increment statistics (``S_*`` slots) and ``trace[t]`` the value of
    U_theta(t) when ``trace`` is non-empty.
    """
    for i in range(N_INT):
        out[i] = -1
    for i in range(N_STATS):
        stats[i] = 0.0
    n_draws = noise.shape[0]
    keep_trace = trace.shape[0] > 0

    cnt[0] = M
    cnt[1] = 0
    lo = 0
    hi = 0
    ta = 0
    tr = 0
    t = 0
    fallbacks = 0
    exc_start = -1
    tau = -1
    tau_eps = -1
    tau_half = -1
    tau_star = -1
    correct = 0

    d, big_l = llr_parts(cnt, lo, hi, ta, pw)
    u = d * c2 - big_l
    if keep_trace:
        trace[0] = u
    if u >= 0.0:
        tau_half = 0

    status = STATUS_DONE
    while tau < 0 or tau_eps < 0 or tau_star < 0:
        if t >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if t >= n_draws:
            status = STATUS_NEED_DRAWS
            break
        pi0, pi1 = sed_split(cnt, lo, hi, pw, s0, s1)
        if not sed_ok(s0, lo, hi, pw, pi0, pi1):
            stats[S_N_SED_VIOLATIONS] += 1.0
        if uniform_theta:
            side = 0 if aux[t] * cnt[ta] < s0[ta] else 1
        else:
            side = theta_side_fixed(s0, ta, tr)
        y = side ^ (1 if noise[t] < p else 0)
        ta, tr = theta_after_shift(s0, s1, y, ta, tr, side, lo)
        new_lo, new_hi = bayes_shift(cnt, lo, hi, s0, s1, y, nxt)
        for a in range(lo, hi + 2):
            cnt[a] = nxt[a]
        lo = new_lo
        hi = new_hi
        t += 1

        u_prev = u
        d, big_l = llr_parts(cnt, lo, hi, ta, pw)
        u = d * c2 - big_l
        if keep_trace:
            trace[t] = u
        _record_step(stats, u_prev, u, c2)
        if u_prev >= 0.0 and u < 0.0:
            fallbacks += 1
            exc_start = t - 1
        elif exc_start >= 0 and u >= 0.0:
            # completed excursion: the drop step plus the return
            stats[S_N_EXC] += 1.0
            stats[S_EXC_STEPS] += t - exc_start
            exc_start = -1

        if tau_half < 0 and u >= 0.0:
            tau_half = t
        if tau_eps < 0 and u >= b_thresh:
            tau_eps = t
        if tau_star < 0 and _star_index(d, big_l, c2) >= n_star:
            tau_star = t
        if tau < 0 and cnt[hi] == 1:
            if ta == hi:
                u_top = u
            else:
                dt, lt = llr_parts(cnt, lo, hi, hi, pw)
                u_top = dt * c2 - lt
            if u_top >= b_thresh:
                tau = t
                correct = 1 if ta == hi else 0

    out[I_STATUS] = status
    out[I_STEPS] = t
    out[I_TAU] = tau
    out[I_TAU_EPS] = tau_eps
    out[I_TAU_HALF] = tau_half
    out[I_TAU_STAR] = tau_star
    out[I_CORRECT] = correct
    out[I_FALLBACKS] = fallbacks


@njit(cache=True)
def sed_block(M, c2, p, b_thresh, n_star, max_steps, noise, aux, uniform_theta,
              out, stats):
    n_trials = noise.shape[0]
    cap = max_steps + 3
    pw = weight_table(c2, cap)
    cnt = np.zeros(cap, dtype=np.int64)
    nxt = np.zeros(cap, dtype=np.int64)
    s0 = np.zeros(cap, dtype=np.int64)
    s1 = np.zeros(cap, dtype=np.int64)
    trace = np.empty(0)
    for i in range(n_trials):
        sed_trial(M, c2, p, b_thresh, n_star, max_steps, noise[i], aux[i],
                  uniform_theta, pw, cnt, nxt, s0, s1, out[i], stats[i], trace)


@njit(cache=True)
def dense_llr(rho, i):
    rest = 0.0
    for j in range(rho.shape[0]):
        if j != i:
            rest += rho[j]
    return math.log2(rho[i]) - math.log2(rest)


@njit(cache=True)
def horstein_bit(rho, theta, draw):
    below = 0.0
    for j in range(theta):
        below += rho[j]
    above = below + rho[theta]
    if above <= 0.5:
        return 0
    if below >= 0.5:
        return 1
    frac_below = (0.5 - below) / rho[theta]
    return 0 if draw < frac_below else 1


@njit(cache=True)
def horstein_update(rho, y, p, q, out):
    """Exact Bayes update when the lower half of the unit interval sends 0."""
    f_low = q if y == 0 else p
    f_high = p if y == 0 else q
    c = 0.0
    z = 0.0
    for j in range(rho.shape[0]):
        r = rho[j]
        b = 0.5 - c
        if b < 0.0:
            b = 0.0
        elif b > r:
            b = r
        v = b * f_low + (r - b) * f_high
        out[j] = v
        z += v
        c += r
    for j in range(rho.shape[0]):
        out[j] /= z


@njit(cache=True)
def horstein_trial(M, c2, p, b_thresh, n_star, max_steps, noise, aux, theta,
                   rho, nxt, out, stats, trace):
    """One Horstein transmission with the same stopping bookkeeping as SED."""
    for i in range(N_INT):
        out[i] = -1
    for i in range(N_STATS):
        stats[i] = 0.0
    q = 1.0 - p
    n_draws = noise.shape[0]
    keep_trace = trace.shape[0] > 0
    for j in range(M):
        rho[j] = 1.0 / M
    t = 0
    fallbacks = 0
    exc_start = -1
    tau = -1
    tau_eps = -1
    tau_half = -1
    tau_star = -1
    correct = 0
    u = dense_llr(rho, theta)
    if keep_trace:
        trace[0] = u
    if u >= 0.0:
        tau_half = 0
    status = STATUS_DONE
    while tau < 0 or tau_eps < 0 or tau_star < 0:
        if t >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if t >= n_draws:
            status = STATUS_NEED_DRAWS
            break
        x = horstein_bit(rho, theta, aux[t])
        y = x ^ (1 if noise[t] < p else 0)
        horstein_update(rho, y, p, q, nxt)
        for j in range(M):
            rho[j] = nxt[j]
        t += 1
        u_prev = u
        u = dense_llr(rho, theta)
        if keep_trace:
            trace[t] = u
        _record_step(stats, u_prev, u, c2)
        if u_prev >= 0.0 and u < 0.0:
            fallbacks += 1
            exc_start = t - 1
        elif exc_start >= 0 and u >= 0.0:
            # completed excursion: the drop step plus the return
            stats[S_N_EXC] += 1.0
            stats[S_EXC_STEPS] += t - exc_start
            exc_start = -1
        if tau_half < 0 and u >= 0.0:
            tau_half = t
        if tau_eps < 0 and u >= b_thresh:
            tau_eps = t
        if tau_star < 0 and math.floor(u / c2) >= n_star:
            tau_star = t
        if tau < 0:
            top = 0
            for j in range(1, M):
                if rho[j] > rho[top]:
                    top = j
            u_top = u if top == theta else dense_llr(rho, top)
            if u_top >= b_thresh:
                tau = t
                correct = 1 if top == theta else 0
    out[I_STATUS] = status
    out[I_STEPS] = t
    out[I_TAU] = tau
    out[I_TAU_EPS] = tau_eps
    out[I_TAU_HALF] = tau_half
    out[I_TAU_STAR] = tau_star
    out[I_CORRECT] = correct
    out[I_FALLBACKS] = fallbacks


@njit(cache=True)
def horstein_block(M, c2, p, b_thresh, n_star, max_steps, noise, aux, thetas,
                   out, stats):
    rho = np.empty(M)
    nxt = np.empty(M)
    trace = np.empty(0)
    for i in range(noise.shape[0]):
        horstein_trial(M, c2, p, b_thresh, n_star, max_steps, noise[i], aux[i],
                       thetas[i], rho, nxt, out[i], stats[i], trace)
