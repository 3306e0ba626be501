# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled water-level and allocation kernels; see ``_kernels_py`` for the reference."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, log1p, log2, exp, fabs, INFINITY, isinf
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()

cdef double LN2 = log(2.0)
cdef double INV_E = exp(-1.0)
cdef double INV_E_LO = -1.2428753672788363e-17
cdef double E_ = exp(1.0)


cdef int _cmp(const void* a, const void* b) noexcept nogil:
    cdef double x = (<double*>a)[0]
    cdef double y = (<double*>b)[0]
    return (x > y) - (x < y)


cdef double _lambertw(double x, int branch) except? -2.0:
    cdef double q, p, w, ew, f, wp1, denom, dw, l1, l2
    cdef int i
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
    if isinf(x):
        return x
    q = E_ * ((x + INV_E) + INV_E_LO)
    if x < -0.25:
        p = sqrt(max(2.0 * q, 0.0))
        if branch == -1:
            p = -p
        w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (
            -43.0 / 540.0 + p * (769.0 / 17280.0 - p * 221.0 / 8505.0)))))
        if fabs(p) < 1e-2:
            return w
    elif branch == 0:
        l1 = log1p(x)
        w = l1 * (1.0 - log1p(l1) / (2.0 + l1))
    else:
        l1 = log(-x)
        l2 = log(-l1)
        w = l1 - l2 + l2 / l1
    for i in range(64):
        ew = exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        dw = f / denom
        w -= dw
        if fabs(dw) <= 4e-16 * (1.0 + fabs(w)):
            break
    return w


def lambertw(x, branch=0):
    if branch not in (0, -1):
        raise ValueError("branch must be 0 or -1")
    return _lambertw(float(x), branch)


cdef double* _sorted_copy(object inv, Py_ssize_t* n_out) except NULL:
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(inv, dtype=np.float64).ravel()
    cdef Py_ssize_t n = a.shape[0]
    cdef double* v = <double*>malloc((n if n > 0 else 1) * sizeof(double))
    cdef Py_ssize_t i
    if v == NULL:
        raise MemoryError()
    for i in range(n):
        v[i] = a[i]
    qsort(v, n, sizeof(double), _cmp)
    n_out[0] = n
    return v


cdef double _power_level(double* v, Py_ssize_t n, double p_max) noexcept:
    cdef double s = 0.0, lvl
    cdef Py_ssize_t k
    for k in range(n):
        s += v[k]
    for k in range(n, 0, -1):
        lvl = (p_max + s) / k
        if lvl > v[k - 1]:
            return lvl
        s -= v[k - 1]
    return v[0] + p_max


cdef double _energy_root(Py_ssize_t k, double s, double lsum, double vk, double bits,
                         double bw, double e_comm) except? -2.0:
    cdef double a = bits / (bw * e_comm)
    cdef double b = (lsum - a * s) / k
    cdef double z = -a * LN2 * 2.0 ** b
    cdef double theta, f, fp, step, nt
    cdef int i
    if z < -INV_E:
        z = -INV_E
    theta = -_lambertw(z, 0) / (a * LN2)
    if not theta > vk * (1.0 + 1e-9):
        theta = -_lambertw(z, -1) / (a * LN2) if z < 0.0 else INFINITY
    for i in range(3):
        f = bits * (k * theta - s) - e_comm * bw * (k * log2(theta) - lsum)
        fp = bits * k - e_comm * bw * k / (theta * LN2)
        if fp <= 0.0:
            break
        step = f / fp
        nt = theta - step
        if not nt > vk:
            break
        theta = nt
        if fabs(step) <= 1e-15 * theta:
            break
    for i in range(8):
        f = bits * (k * theta - s) - e_comm * bw * (k * log2(theta) - lsum)
        if f <= 0.0:
            break
        theta = vk + (theta - vk) * (1.0 - 1e-12)
    return theta


cdef double _energy_level(double* v, Py_ssize_t n, double bits, double bw,
                          double e_comm) except? -2.0:
    cdef double s = 0.0, lsum = 0.0, th, p, r
    cdef Py_ssize_t k
    if n == 0 or not e_comm > 0.0:
        return 0.0
    if e_comm <= bits * v[0] * LN2 / bw:
        return 0.0
    for k in range(1, n + 1):
        s += v[k - 1]
        lsum += log2(v[k - 1])
        if k < n:
            th = v[k]
            p = k * th - s
            r = bw * (k * log2(th) - lsum)
            if r > 0.0 and bits * p >= e_comm * r:
                return _energy_root(k, s, lsum, v[k - 1], bits, bw, e_comm)
    return _energy_root(n, s, lsum, v[n - 1], bits, bw, e_comm)


cdef double _max_level(double* v, Py_ssize_t n, double p_max, double bits, double bw,
                       double e_comm) except? -2.0:
    cdef double le = _energy_level(v, n, bits, bw, e_comm), lp
    if le <= 0.0:
        return 0.0
    lp = _power_level(v, n, p_max)
    return lp if lp < le else le


cdef double _rate(double* v, Py_ssize_t n, double level, double bw) noexcept:
    cdef double r = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        if level > v[i]:
            r += log2(level / v[i])
    return bw * r


def power_level(inv, double p_max):
    cdef Py_ssize_t n
    cdef double* v = _sorted_copy(inv, &n)
    try:
        return _power_level(v, n, p_max)
    finally:
        free(v)


def energy_level(inv, double bits, double bw, double e_comm):
    cdef Py_ssize_t n
    cdef double* v = _sorted_copy(inv, &n)
    try:
        return _energy_level(v, n, bits, bw, e_comm)
    finally:
        free(v)


def max_level(inv, double p_max, double bits, double bw, double e_comm):
    cdef Py_ssize_t n
    cdef double* v = _sorted_copy(inv, &n)
    try:
        return _max_level(v, n, p_max, bits, bw, e_comm)
    finally:
        free(v)


def rate_level(inv, double bw, double rate):
    cdef Py_ssize_t n, k, j
    cdef double lsum = 0.0
    cdef double* v = _sorted_copy(inv, &n)
    try:
        if not rate > 0.0:
            return v[0]
        k = n
        for j in range(1, n + 1):
            lsum += log2(v[j - 1])
            if j < n and bw * (j * log2(v[j]) - lsum) >= rate:
                k = j
                break
        return 2.0 ** ((rate / bw + lsum) / k)
    finally:
        free(v)


def level_stats(inv, double level, double bw):
    cdef Py_ssize_t n, i
    cdef double p = 0.0, r = 0.0
    cdef double* v = _sorted_copy(inv, &n)
    try:
        for i in range(n):
            if level > v[i]:
                p += level - v[i]
                r += log2(level / v[i])
        return p, bw * r
    finally:
        free(v)


cdef double _user_level_rate(double[:, ::1] cnr, cnp.int64_t[::1] owner, Py_ssize_t n,
                             double p_max, double bits, double bw, double e_comm,
                             double* buf, double* rate_out) except? -2.0:
    """Water level and rate of user ``n`` over the subcarriers it owns; 0 level if none."""
    cdef Py_ssize_t m, k = 0
    cdef double lv
    for m in range(owner.shape[0]):
        if owner[m] == n:
            buf[k] = 1.0 / cnr[n, m]
            k += 1
    rate_out[0] = 0.0
    if k == 0:
        return 0.0
    qsort(buf, k, sizeof(double), _cmp)
    lv = _max_level(buf, k, p_max, bits, bw, e_comm)
    if lv > 0.0:
        rate_out[0] = _rate(buf, k, lv, bw)
    return lv


cdef double _user_time(double[:, ::1] cnr, cnp.int64_t[::1] owner, Py_ssize_t n, double t_cp,
                       double p_max, double bits, double bw, double e_comm,
                       double* buf) except? -2.0:
    cdef double r
    cdef double lv = _user_level_rate(cnr, owner, n, p_max, bits, bw, e_comm, buf, &r)
    if lv <= 0.0 or not r > 0.0:
        return INFINITY
    return t_cp + bits / r


def lcra_phase1(cnr_in, e_comm_in, p_max_in, double bits, double bw, order):
    cdef double[:, ::1] cnr = np.ascontiguousarray(cnr_in, dtype=np.float64)
    cdef double[::1] e_comm = np.ascontiguousarray(e_comm_in, dtype=np.float64)
    cdef double[::1] p_max = np.ascontiguousarray(p_max_in, dtype=np.float64)
    cdef Py_ssize_t nu = cnr.shape[0], m_tot = cnr.shape[1]
    owner_arr = np.full(m_tot, -1, dtype=np.int64)
    dropped_arr = np.zeros(nu, dtype=bool)
    cdef cnp.int64_t[::1] owner = owner_arr
    cdef cnp.uint8_t[::1] dropped = dropped_arr.view(np.uint8)
    cdef cnp.uint8_t[::1] complete = np.zeros(nu, dtype=np.uint8)
    cdef cnp.uint8_t[::1] avail = np.ones(m_tot, dtype=np.uint8)
    cdef double[::1] level = np.zeros(nu)
    cdef double[::1] rates = np.zeros(nu)
    cdef double* buf = <double*>malloc((m_tot + 1) * sizeof(double))
    cdef Py_ssize_t n, m, bm, n_l, left = m_tot
    cdef double best, r_min, r, single
    if buf == NULL:
        raise MemoryError()
    try:
        for n in order:
            bm = -1
            best = -1.0
            for m in range(m_tot):
                if avail[m] and cnr[n, m] > best:
                    best = cnr[n, m]
                    bm = m
            if bm < 0:
                dropped[n] = 1
                continue
            single = 1.0 / cnr[n, bm]
            if _max_level(&single, 1, p_max[n], bits, bw, e_comm[n]) <= 0.0:
                dropped[n] = 1
                continue
            avail[bm] = 0
            left -= 1
            owner[bm] = n
            level[n] = _user_level_rate(cnr, owner, n, p_max[n], bits, bw, e_comm[n], buf, &r)
            rates[n] = r
        while left > 0:
            n_l = -1
            r_min = INFINITY
            for n in range(nu):
                if not dropped[n] and not complete[n] and rates[n] < r_min:
                    n_l = n
                    r_min = rates[n]
            if n_l < 0:
                break
            bm = -1
            best = -1.0
            for m in range(m_tot):
                if avail[m] and cnr[n_l, m] > best:
                    best = cnr[n_l, m]
                    bm = m
            if level[n_l] > 1.0 / cnr[n_l, bm]:
                avail[bm] = 0
                left -= 1
                owner[bm] = n_l
                level[n_l] = _user_level_rate(cnr, owner, n_l, p_max[n_l], bits, bw,
                                              e_comm[n_l], buf, &r)
                rates[n_l] = r
            else:
                complete[n_l] = 1
    finally:
        free(buf)
    return owner_arr, dropped_arr


def ldra_dual(cnr_in, t_cp_in, e_comm_in, p_max_in, double bits, double bw, pathloss_in,
              int max_iter, double tol, pool=None):
    cdef double[:, ::1] cnr = np.ascontiguousarray(cnr_in, dtype=np.float64)
    cdef double[::1] t_cp = np.ascontiguousarray(t_cp_in, dtype=np.float64)
    cdef double[::1] e_comm = np.ascontiguousarray(e_comm_in, dtype=np.float64)
    cdef double[::1] p_max = np.ascontiguousarray(p_max_in, dtype=np.float64)
    cdef double[::1] pathloss = np.ascontiguousarray(pathloss_in, dtype=np.float64)
    cdef Py_ssize_t nu_ = cnr.shape[0], m_tot = cnr.shape[1]
    lam_arr = np.ones(nu_)
    gam_arr = np.zeros(nu_)
    mu_arr = np.ones(nu_)
    nu_arr = np.zeros(m_tot)
    owner_arr = np.zeros(m_tot, dtype=np.int64)
    cdef double[::1] lam = lam_arr, gam = gam_arr, mu = mu_arr, nuv = nu_arr
    cdef cnp.int64_t[::1] owner = owner_arr
    cdef double[::1] level = np.zeros(nu_)
    cdef double[::1] ptot = np.zeros(nu_)
    cdef double[::1] rkkt = np.zeros(nu_)
    cdef double* buf = <double*>malloc((m_tot + 1) * sizeof(double))
    cdef Py_ssize_t n, m, bn
    cdef int it = 0
    cdef bint feasible
    cdef double num, den, bs, bpl, bp, bx, p, x, val, sc, rtime, t, t_kkt, worst, rho
    cdef double req, r_rate, r_en, e_used, cs, r_pow, scale
    best_owner = None
    cdef double best_time = INFINITY
    if buf == NULL:
        raise MemoryError()
    try:
        for it in range(1, max_iter + 1):
            for n in range(nu_):
                num = lam[n] + gam[n]
                den = LN2 * (mu[n] / p_max[n] + gam[n] * bits / (e_comm[n] * bw))
                if num > 0.0:
                    level[n] = num / den if den > 0.0 else INFINITY
                else:
                    level[n] = 0.0
                ptot[n] = 0.0
                rkkt[n] = 0.0
            for m in range(m_tot):
                bn = -1
                bs = -1.0
                bpl = -INFINITY
                bp = 0.0
                bx = 0.0
                for n in range(nu_):
                    p = level[n] - 1.0 / cnr[n, m]
                    if p < 0.0:
                        p = 0.0
                    elif p > p_max[n]:
                        p = p_max[n]
                    x = cnr[n, m] * p
                    val = log2(1.0 + x) - x / ((1.0 + x) * LN2)
                    sc = (lam[n] + gam[n]) * val
                    if sc > bs or (sc == bs and pathloss[n] > bpl):
                        bn = n
                        bs = sc
                        bpl = pathloss[n]
                        bp = p
                        bx = x
                owner[m] = bn
                nuv[m] = bs
                ptot[bn] += bp
                rkkt[bn] += bw * log2(1.0 + bx)

            feasible = True
            rtime = -INFINITY
            for n in range(nu_):
                t = _user_time(cnr, owner, n, t_cp[n], p_max[n], bits, bw, e_comm[n], buf)
                if isinf(t):
                    feasible = False
                elif t > rtime:
                    rtime = t
            if feasible and pool is not None:
                pool[tuple(owner_arr.tolist())] = rtime
            if feasible and rtime < best_time:
                best_time = rtime
                best_owner = owner_arr.copy()

            t_kkt = -INFINITY
            for n in range(nu_):
                if rkkt[n] > 0.0:
                    t_kkt = max(t_kkt, t_cp[n] + bits / rkkt[n])
            worst = 0.0
            rho = 0.1 / sqrt(it)
            for n in range(nu_):
                if rkkt[n] > 0.0:
                    req = bits / (t_kkt - t_cp[n]) if t_kkt > t_cp[n] else INFINITY
                    r_rate = 1.0 if isinf(req) else (req - rkkt[n]) / max(req, rkkt[n])
                    e_used = ptot[n] * bits / rkkt[n]
                    r_en = min(max((e_used - e_comm[n]) / e_comm[n], -1.0), 1.0)
                    cs = 0.0 if isinf(req) else lam[n] * fabs(req - rkkt[n]) / bw
                    worst = max(worst, max(e_used - e_comm[n], cs))
                else:
                    r_rate = 1.0
                    r_en = 0.0
                    worst = INFINITY
                r_pow = min(max((ptot[n] - p_max[n]) / p_max[n], -1.0), 1.0)
                worst = max(worst, ptot[n] - p_max[n])
                lam[n] = max(0.0, lam[n] + rho * r_rate)
                gam[n] = max(0.0, gam[n] + rho * r_en)
                mu[n] = max(0.0, mu[n] + rho * r_pow)
            scale = 0.0
            for n in range(nu_):
                scale = max(scale, lam[n] + gam[n])
            for n in range(nu_):
                if scale > 0.0:
                    lam[n] /= scale
                    gam[n] /= scale
                    mu[n] /= scale
                else:
                    lam[n] = 1.0
            if feasible and worst <= tol:
                break
    finally:
        free(buf)
    return best_owner, best_time, it, lam_arr, gam_arr, mu_arr, nu_arr


cdef bint _pair_better(double a1, double b1, double a0, double b0) noexcept:
    cdef double hi1, lo1, hi0, lo0, eps
    if a1 >= b1:
        hi1, lo1 = a1, b1
    else:
        hi1, lo1 = b1, a1
    if a0 >= b0:
        hi0, lo0 = a0, b0
    else:
        hi0, lo0 = b0, a0
    eps = 1e-12 * max(hi0, 1e-300)
    if hi1 < hi0 - eps:
        return True
    return fabs(hi1 - hi0) <= eps and lo1 < lo0 - 1e-12 * max(lo0, 1e-300)


def local_search(cnr_in, t_cp_in, e_comm_in, p_max_in, double bits, double bw, owner_in,
                 int max_passes=50):
    cdef double[:, ::1] cnr = np.ascontiguousarray(cnr_in, dtype=np.float64)
    cdef double[::1] t_cp = np.ascontiguousarray(t_cp_in, dtype=np.float64)
    cdef double[::1] e_comm = np.ascontiguousarray(e_comm_in, dtype=np.float64)
    cdef double[::1] p_max = np.ascontiguousarray(p_max_in, dtype=np.float64)
    owner_arr = np.array(owner_in, dtype=np.int64)
    cdef cnp.int64_t[::1] owner = owner_arr
    cdef Py_ssize_t nu_ = cnr.shape[0], m_tot = cnr.shape[1]
    times_arr = np.empty(nu_)
    cdef double[::1] times = times_arr
    cdef double* buf = <double*>malloc((m_tot + 1) * sizeof(double))
    cdef Py_ssize_t n, m, m1, m2, a, b, pss
    cdef double ta, tb
    cdef bint improved
    if buf == NULL:
        raise MemoryError()
    try:
        for n in range(nu_):
            times[n] = _user_time(cnr, owner, n, t_cp[n], p_max[n], bits, bw, e_comm[n], buf)
        for pss in range(max_passes):
            improved = False
            for m in range(m_tot):
                a = owner[m]
                for b in range(nu_):
                    if b == a:
                        continue
                    owner[m] = b
                    ta = _user_time(cnr, owner, a, t_cp[a], p_max[a], bits, bw, e_comm[a], buf)
                    tb = _user_time(cnr, owner, b, t_cp[b], p_max[b], bits, bw, e_comm[b], buf)
                    if _pair_better(ta, tb, times[a], times[b]):
                        times[a] = ta
                        times[b] = tb
                        a = b
                        improved = True
                    else:
                        owner[m] = a
            for m1 in range(m_tot):
                for m2 in range(m1 + 1, m_tot):
                    a = owner[m1]
                    b = owner[m2]
                    if a == b:
                        continue
                    owner[m1] = b
                    owner[m2] = a
                    ta = _user_time(cnr, owner, a, t_cp[a], p_max[a], bits, bw, e_comm[a], buf)
                    tb = _user_time(cnr, owner, b, t_cp[b], p_max[b], bits, bw, e_comm[b], buf)
                    if _pair_better(ta, tb, times[a], times[b]):
                        times[a] = ta
                        times[b] = tb
                        improved = True
                    else:
                        owner[m1] = a
                        owner[m2] = b
            for a in range(nu_):
                for b in range(a + 1, nu_):
                    for m in range(m_tot):
                        if owner[m] == a:
                            owner[m] = b
                        elif owner[m] == b:
                            owner[m] = a
                    ta = _user_time(cnr, owner, a, t_cp[a], p_max[a], bits, bw, e_comm[a], buf)
                    tb = _user_time(cnr, owner, b, t_cp[b], p_max[b], bits, bw, e_comm[b], buf)
                    if _pair_better(ta, tb, times[a], times[b]):
                        times[a] = ta
                        times[b] = tb
                        improved = True
                    else:
                        for m in range(m_tot):
                            if owner[m] == a:
                                owner[m] = b
                            elif owner[m] == b:
                                owner[m] = a
            if not improved:
                break
    finally:
        free(buf)
    return owner_arr, float(times_arr.max())
