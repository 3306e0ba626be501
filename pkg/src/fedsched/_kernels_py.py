"""Pure-Python reference kernels.

Mirrors ``_kernels.pyx`` function for function; used when the compiled
extension is unavailable or ``FEDSCHED_PURE_PYTHON=1`` is set.

Conventions shared by every water-level routine: ``inv`` holds the inverse
CNRs ``1/phi`` of one user's subcarriers (watts), a water level ``theta``
puts ``max(theta - inv, 0)`` watts on each subcarrier, and the user's rate is
``B * sum(log2(max(theta / inv, 1)))``.
"""
from __future__ import annotations

import math

import numpy as np

LN2 = math.log(2.0)
INV_E = math.exp(-1.0)
# 1/e split into two doubles; the tail restores digits lost in x + 1/e
INV_E_LO = -1.2428753672788363e-17
_E = math.e


def lambertw(x, branch=0):
    x = float(x)
    if branch not in (0, -1):
        raise ValueError("branch must be 0 or -1")
    if x < -INV_E:
        if x > -INV_E - 1e-15:
            x = -INV_E
        else:
            raise ValueError(f"lambertw undefined for x={x!r} < -1/e")
    if branch == -1 and x >= 0.0:
        raise ValueError("branch -1 requires -1/e <= x < 0")
    if x == -INV_E:
        return -1.0
    if branch == 0 and x == 0.0:
        return 0.0
    if math.isinf(x):
        return x
    q = _E * ((x + INV_E) + INV_E_LO)
    if x < -0.25:
        p = math.sqrt(max(2.0 * q, 0.0))
        if branch == -1:
            p = -p
        w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (
            -43.0 / 540.0 + p * (769.0 / 17280.0 - p * 221.0 / 8505.0)))))
        if abs(p) < 1e-2:
            # Halley is ill-conditioned this close to the branch point
            return w
    elif branch == 0:
        l1 = math.log1p(x)
        w = l1 * (1.0 - math.log1p(l1) / (2.0 + l1))
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1
    for _ in range(64):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        dw = f / denom
        w -= dw
        if abs(dw) <= 4e-16 * (1.0 + abs(w)):
            break
    return w


def _sorted(inv):
    return sorted(float(v) for v in inv)


def power_level(inv, p_max):
    """Water level that spends exactly ``p_max`` watts over ``inv``."""
    v = _sorted(inv)
    n = len(v)
    s = 0.0
    for val in v:
        s += val
    for k in range(n, 0, -1):
        lvl = (p_max + s) / k
        if lvl > v[k - 1]:
            return lvl
        s -= v[k - 1]
    return v[0] + p_max


def _energy_root(k, s, lsum, vk, bits, bw, e_comm):
    a = bits / (bw * e_comm)
    b = (lsum - a * s) / k
    z = -a * LN2 * 2.0 ** b
    if z < -INV_E:
        z = -INV_E
    theta = -lambertw(z, 0) / (a * LN2)
    # the principal root is the trivial/lower crossing unless clearly above vk
    if not theta > vk * (1.0 + 1e-9):
        theta = -lambertw(z, -1) / (a * LN2) if z < 0.0 else math.inf
    # polish on F(theta) = bits*P - e_comm*R, increasing at the upper root
    for _ in range(3):
        f = bits * (k * theta - s) - e_comm * bw * (k * math.log2(theta) - lsum)
        fp = bits * k - e_comm * bw * k / (theta * LN2)
        if fp <= 0.0:
            break
        step = f / fp
        nt = theta - step
        if not nt > vk:
            break
        theta = nt
        if abs(step) <= 1e-15 * theta:
            break
    for _ in range(8):
        f = bits * (k * theta - s) - e_comm * bw * (k * math.log2(theta) - lsum)
        if f <= 0.0:
            break
        theta = vk + (theta - vk) * (1.0 - 1e-12)
    return theta


def energy_level(inv, bits, bw, e_comm):
    """Largest water level whose upload energy ``bits*P/R`` stays within ``e_comm``.

    Returns 0.0 when no positive level is affordable (``e_comm`` at or below the
    vanishing-power limit ``bits*ln2*min(inv)/B``).
    """
    v = _sorted(inv)
    n = len(v)
    if n == 0 or not e_comm > 0.0:
        return 0.0
    if e_comm <= bits * v[0] * LN2 / bw:
        return 0.0
    s = 0.0
    lsum = 0.0
    for k in range(1, n + 1):
        s += v[k - 1]
        lsum += math.log2(v[k - 1])
        if k < n:
            th = v[k]
            p = k * th - s
            r = bw * (k * math.log2(th) - lsum)
            if r > 0.0 and bits * p >= e_comm * r:
                return _energy_root(k, s, lsum, v[k - 1], bits, bw, e_comm)
    return _energy_root(n, s, lsum, v[n - 1], bits, bw, e_comm)


def max_level(inv, p_max, bits, bw, e_comm):
    le = energy_level(inv, bits, bw, e_comm)
    if le <= 0.0:
        return 0.0
    lp = power_level(inv, p_max)
    return lp if lp < le else le


def rate_level(inv, bw, rate):
    """Lowest water level delivering ``rate`` bits/s over ``inv``."""
    v = _sorted(inv)
    n = len(v)
    if not rate > 0.0:
        return v[0]
    lsum = 0.0
    k = n
    for j in range(1, n + 1):
        lsum += math.log2(v[j - 1])
        if j < n and bw * (j * math.log2(v[j]) - lsum) >= rate:
            k = j
            break
    return 2.0 ** ((rate / bw + lsum) / k)


def level_stats(inv, level, bw):
    """(total power, rate) of water level ``level`` over ``inv``."""
    p = 0.0
    r = 0.0
    for val in _sorted(inv):
        if level > val:
            p += level - val
            r += math.log2(level / val)
    return p, bw * r


def lcra_phase1(cnr, e_comm, p_max, bits, bw, order):
    """Greedy subcarrier claiming. Returns (owner per subcarrier or -1, dropped flags)."""
    cnr = np.asarray(cnr, dtype=float)
    nu, m_tot = cnr.shape
    owner = np.full(m_tot, -1, dtype=np.int64)
    dropped = np.zeros(nu, dtype=bool)
    complete = np.zeros(nu, dtype=bool)
    level = np.zeros(nu)
    rates = np.zeros(nu)
    sets = [[] for _ in range(nu)]
    avail = np.ones(m_tot, dtype=bool)

    def best_free(n):
        best, bm = -1.0, -1
        for m in range(m_tot):
            if avail[m] and cnr[n, m] > best:
                best, bm = cnr[n, m], m
        return bm

    def refresh(n):
        inv = [1.0 / cnr[n, m] for m in sets[n]]
        level[n] = max_level(inv, p_max[n], bits, bw, e_comm[n])
        rates[n] = level_stats(inv, level[n], bw)[1]

    for n in order:
        n = int(n)
        m = best_free(n)
        if m < 0:
            dropped[n] = True
            continue
        inv = [1.0 / cnr[n, m]]
        if max_level(inv, p_max[n], bits, bw, e_comm[n]) <= 0.0:
            dropped[n] = True
            continue
        avail[m] = False
        owner[m] = n
        sets[n].append(m)
        refresh(n)

    while avail.any():
        n_l, r_min = -1, math.inf
        for n in range(nu):
            if not dropped[n] and not complete[n] and rates[n] < r_min:
                n_l, r_min = n, rates[n]
        if n_l < 0:
            break
        m = best_free(n_l)
        if level[n_l] > 1.0 / cnr[n_l, m]:
            avail[m] = False
            owner[m] = n_l
            sets[n_l].append(m)
            refresh(n_l)
        else:
            complete[n_l] = True
    return owner, dropped


def ldra_dual(cnr, t_cp, e_comm, p_max, bits, bw, pathloss, max_iter, tol, pool=None):
    """Dual subgradient loop with per-iterate primal recovery.

    Returns ``(best_owner, best_time, iterations, lam, gam, mu, nu)``;
    ``best_owner`` is None when no iterate was feasible. Multipliers are kept
    in normalised units (rate residuals relative to the required rate, power
    relative to ``p_max``, energy relative to ``e_comm``) and jointly rescaled
    so that ``max(lam + gam) == 1``; the primal response is invariant to that
    scaling. When ``pool`` is a dict, every distinct feasible iterate is
    recorded in it as ``tuple(owner) -> round_time``.
    """
    cnr = np.asarray(cnr, dtype=float)
    nu_, m_tot = cnr.shape
    inv = 1.0 / cnr
    lam = np.ones(nu_)
    gam = np.zeros(nu_)
    mu = np.ones(nu_)
    nu = np.zeros(m_tot)
    owner = np.zeros(m_tot, dtype=np.int64)
    best_owner = None
    best_time = math.inf
    level = np.zeros(nu_)
    it = 0
    for it in range(1, max_iter + 1):
        for n in range(nu_):
            num = lam[n] + gam[n]
            den = LN2 * (mu[n] / p_max[n] + gam[n] * bits / (e_comm[n] * bw))
            level[n] = (num / den if den > 0.0 else math.inf) if num > 0.0 else 0.0
        ptot = np.zeros(nu_)
        rkkt = np.zeros(nu_)
        for m in range(m_tot):
            bn, bs, bpl = -1, -1.0, -math.inf
            bp = bx = 0.0
            for n in range(nu_):
                p = level[n] - inv[n, m]
                if p < 0.0:
                    p = 0.0
                elif p > p_max[n]:
                    p = p_max[n]
                x = cnr[n, m] * p
                val = math.log2(1.0 + x) - x / ((1.0 + x) * LN2)
                sc = (lam[n] + gam[n]) * val
                if sc > bs or (sc == bs and pathloss[n] > bpl):
                    bn, bs, bpl, bp, bx = n, sc, pathloss[n], p, x
            owner[m] = bn
            nu[m] = bs
            ptot[bn] += bp
            rkkt[bn] += bw * math.log2(1.0 + bx)

        feasible = True
        rtime = -math.inf
        for n in range(nu_):
            sel = inv[n, owner == n]
            if sel.size == 0:
                feasible = False
                continue
            lv = max_level(sel, p_max[n], bits, bw, e_comm[n])
            if lv <= 0.0:
                feasible = False
                continue
            r = level_stats(sel, lv, bw)[1]
            t = t_cp[n] + bits / r
            if t > rtime:
                rtime = t
        if feasible and pool is not None:
            pool[tuple(owner.tolist())] = rtime
        if feasible and rtime < best_time:
            best_time = rtime
            best_owner = owner.copy()

        t_kkt = -math.inf
        for n in range(nu_):
            if rkkt[n] > 0.0:
                t_kkt = max(t_kkt, t_cp[n] + bits / rkkt[n])
        worst = 0.0
        rho = 0.1 / math.sqrt(it)
        for n in range(nu_):
            if rkkt[n] > 0.0:
                req = bits / (t_kkt - t_cp[n]) if t_kkt > t_cp[n] else math.inf
                r_rate = 1.0 if math.isinf(req) else (req - rkkt[n]) / max(req, rkkt[n])
                e_used = ptot[n] * bits / rkkt[n]
                r_en = min(max((e_used - e_comm[n]) / e_comm[n], -1.0), 1.0)
                cs = 0.0 if math.isinf(req) else lam[n] * abs(req - rkkt[n]) / bw
                worst = max(worst, e_used - e_comm[n], cs)
            else:
                r_rate, r_en = 1.0, 0.0
                worst = math.inf
            r_pow = min(max((ptot[n] - p_max[n]) / p_max[n], -1.0), 1.0)
            worst = max(worst, ptot[n] - p_max[n])
            lam[n] = max(0.0, lam[n] + rho * r_rate)
            gam[n] = max(0.0, gam[n] + rho * r_en)
            mu[n] = max(0.0, mu[n] + rho * r_pow)
        scale = 0.0
        for n in range(nu_):
            scale = max(scale, lam[n] + gam[n])
        if scale > 0.0:
            lam /= scale
            gam /= scale
            mu /= scale
        else:
            lam[:] = 1.0
        if feasible and worst <= tol:
            break
    return best_owner, best_time, it, lam, gam, mu, nu


def _user_time(cnr_row, owner, n, t_cp_n, p_max_n, bits, bw, e_comm_n):
    sel = 1.0 / cnr_row[owner == n]
    if sel.size == 0:
        return math.inf
    lv = max_level(sel, p_max_n, bits, bw, e_comm_n)
    if lv <= 0.0:
        return math.inf
    return t_cp_n + bits / level_stats(sel, lv, bw)[1]


def _pair_better(a1, b1, a0, b0):
    hi1, lo1 = (a1, b1) if a1 >= b1 else (b1, a1)
    hi0, lo0 = (a0, b0) if a0 >= b0 else (b0, a0)
    eps = 1e-12 * max(hi0, 1e-300)
    if hi1 < hi0 - eps:
        return True
    return abs(hi1 - hi0) <= eps and lo1 < lo0 - 1e-12 * max(lo0, 1e-300)


def local_search(cnr, t_cp, e_comm, p_max, bits, bw, owner, max_passes=50):
    """Improve an assignment by single-subcarrier moves, pairwise swaps and
    whole-set exchanges between two users.

    A change is kept only when the two affected user times shrink
    lexicographically (larger first), so the sorted time vector strictly
    decreases and the search terminates. Returns ``(owner, round_time)``.
    """
    cnr = np.asarray(cnr, dtype=float)
    owner = np.array(owner, dtype=np.int64)
    nu_, m_tot = cnr.shape

    def ut(n):
        return _user_time(cnr[n], owner, n, t_cp[n], p_max[n], bits, bw, e_comm[n])

    times = np.array([ut(n) for n in range(nu_)])
    for _ in range(max_passes):
        improved = False
        for m in range(m_tot):
            a = owner[m]
            for b in range(nu_):
                if b == a:
                    continue
                owner[m] = b
                ta, tb = ut(a), ut(b)
                if _pair_better(ta, tb, times[a], times[b]):
                    times[a], times[b] = ta, tb
                    a = b
                    improved = True
                else:
                    owner[m] = a
        for m1 in range(m_tot):
            for m2 in range(m1 + 1, m_tot):
                a, b = owner[m1], owner[m2]
                if a == b:
                    continue
                owner[m1], owner[m2] = b, a
                ta, tb = ut(a), ut(b)
                if _pair_better(ta, tb, times[a], times[b]):
                    times[a], times[b] = ta, tb
                    improved = True
                else:
                    owner[m1], owner[m2] = a, b
        for a in range(nu_):
            for b in range(a + 1, nu_):
                sa, sb = owner == a, owner == b
                owner[sa], owner[sb] = b, a
                ta, tb = ut(a), ut(b)
                if _pair_better(ta, tb, times[a], times[b]):
                    times[a], times[b] = ta, tb
                    improved = True
                else:
                    owner[sa], owner[sb] = a, b
        if not improved:
            break
    return owner, float(times.max())
