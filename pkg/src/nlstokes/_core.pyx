# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled adaptive radial panel loop (see quadrature.py for the math)."""
from libc.math cimport sin, pow, fabs
from libc.stdlib cimport malloc, free

import numpy as np


cdef struct Profile:
    int family
    double amp
    double alpha
    double power
    int dim
    const double* tab_r
    const double* tab_v
    Py_ssize_t ntab


cdef struct Rule:
    double a
    int kind
    const double* t
    const double* w
    Py_ssize_t nang
    double pref
    const double* gl_x
    const double* gl_w
    Py_ssize_t ngl


cdef inline double profile_value(const Profile* p, double r) noexcept nogil:
    cdef Py_ssize_t lo, hi, mid
    cdef double s
    if p.family == 0:
        return p.amp
    if p.family == 1:
        s = 1.0 - r * r
        return p.amp * pow(s, p.power) if s > 0.0 else 0.0
    if p.family == 2:
        return p.amp * pow(r, -(p.dim + 2.0 * p.alpha))
    # piecewise-linear table, zero past the last node
    if r > p.tab_r[p.ntab - 1]:
        return 0.0
    lo = 0
    hi = p.ntab - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if p.tab_r[mid] <= r:
            lo = mid
        else:
            hi = mid
    s = (r - p.tab_r[lo]) / (p.tab_r[hi] - p.tab_r[lo])
    return p.amp * (p.tab_v[lo] + s * (p.tab_v[hi] - p.tab_v[lo]))


cdef inline double integrand(const Profile* p, const Rule* q, double r) noexcept nogil:
    cdef double k = profile_value(p, r)
    cdef double acc = 0.0, x, h, rd
    cdef Py_ssize_t j
    if k == 0.0:
        return 0.0
    if q.kind == 0:
        for j in range(q.nang):
            h = sin(0.5 * q.a * r * q.t[j])
            acc += q.w[j] * 2.0 * h * h
    else:
        for j in range(q.nang):
            acc += q.w[j] * q.t[j] * sin(q.a * r * q.t[j])
    rd = r if p.dim == 2 else r * r
    return q.pref * k * rd * acc


cdef inline double panel(const Profile* p, const Rule* q, double lo, double hi) noexcept nogil:
    cdef double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo), acc = 0.0
    cdef Py_ssize_t i
    for i in range(q.ngl):
        acc += q.gl_w[i] * integrand(p, q, mid + half * q.gl_x[i])
    return half * acc


cdef int adapt_one(const Profile* p, const Rule* q, const double* edges, Py_ssize_t nedge,
                   double head, double tol, long max_panels,
                   double* lo_s, double* hi_s, double* q_s,
                   double* value, double* err_out, long* used_out) noexcept nogil:
    cdef Py_ssize_t top = 0, i
    cdef double ref = fabs(head), total = head, err_sum = 0.0
    cdef double lo, hi, mid, qw, left, right, fine, err, allow
    cdef long used = nedge - 1
    for i in range(nedge - 1):
        lo_s[top] = edges[i]
        hi_s[top] = edges[i + 1]
        q_s[top] = panel(p, q, edges[i], edges[i + 1])
        ref += fabs(q_s[top])
        top += 1
    if ref == 0.0:
        value[0] = total
        err_out[0] = 0.0
        used_out[0] = used
        return 0
    while top > 0:
        top -= 1
        lo = lo_s[top]
        hi = hi_s[top]
        qw = q_s[top]
        mid = 0.5 * (lo + hi)
        left = panel(p, q, lo, mid)
        right = panel(p, q, mid, hi)
        fine = left + right
        err = fabs(fine - qw)
        used += 2
        allow = ref * (hi - lo)
        if fabs(fine) > allow:
            allow = fabs(fine)
        if err <= tol * allow:
            total += fine
            err_sum += err
        else:
            if used > max_panels:
                value[0] = total
                err_out[0] = err_sum
                used_out[0] = used
                return 1
            lo_s[top] = lo
            hi_s[top] = mid
            q_s[top] = left
            lo_s[top + 1] = mid
            hi_s[top + 1] = hi
            q_s[top + 1] = right
            top += 2
    value[0] = total
    err_out[0] = err_sum
    used_out[0] = used
    return 0


def adaptive_radial(int family, double amp, double alpha, double power,
                    const double[::1] tab_r, const double[::1] tab_v, int dim, int kind,
                    const double[::1] a_values, const double[::1] breaks, const long[::1] break_off,
                    const double[::1] ang_t, const double[::1] ang_w, const long[::1] ang_off,
                    double pref, const double[::1] gl_x, const double[::1] gl_w,
                    const double[::1] heads, double tol, long max_panels,
                    double[::1] values, double[::1] errors, long[::1] panels):
    """Adaptive Gauss-Legendre panels for each entry of ``a_values``; returns status codes."""
    cdef Profile p
    cdef Rule q
    cdef Py_ssize_t n = a_values.shape[0], i, cap, max_edges = 0
    cdef long[::1] status = np.zeros(n, dtype=np.int64)
    cdef double* lo_s
    cdef double* hi_s
    cdef double* q_s

    p.family = family
    p.amp = amp
    p.alpha = alpha
    p.power = power
    p.dim = dim
    p.tab_r = &tab_r[0]
    p.tab_v = &tab_v[0]
    p.ntab = tab_r.shape[0]
    q.kind = kind
    q.pref = pref
    q.gl_x = &gl_x[0]
    q.gl_w = &gl_w[0]
    q.ngl = gl_x.shape[0]

    for i in range(n):
        if break_off[i + 1] - break_off[i] > max_edges:
            max_edges = break_off[i + 1] - break_off[i]
    # depth-first stack never exceeds initial panels + 2 per budgeted refinement
    cap = max_edges + max_panels + 4
    lo_s = <double*> malloc(cap * sizeof(double))
    hi_s = <double*> malloc(cap * sizeof(double))
    q_s = <double*> malloc(cap * sizeof(double))
    if lo_s == NULL or hi_s == NULL or q_s == NULL:
        free(lo_s)
        free(hi_s)
        free(q_s)
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                q.a = a_values[i]
                q.t = &ang_t[ang_off[i]]
                q.w = &ang_w[ang_off[i]]
                q.nang = ang_off[i + 1] - ang_off[i]
                status[i] = adapt_one(&p, &q, &breaks[break_off[i]], break_off[i + 1] - break_off[i],
                                      heads[i], tol, max_panels, lo_s, hi_s, q_s,
                                      &values[i], &errors[i], &panels[i])
    finally:
        free(lo_s)
        free(hi_s)
        free(q_s)
    return np.asarray(status)
