"""Pure-numpy implementation of the adaptive radial panel loop.

Mirrors ``_core.pyx`` argument for argument.  Instead of a depth-first
stack it refines all unconverged panels of a generation at once; since the
acceptance test of a panel depends only on that panel and the reference
magnitude fixed by the initial panels, both orders accept the same panels.
"""
import numpy as np


def _profile(family, amp, alpha, power, tab_r, tab_v, dim, r):
    if family == 0:
        return np.full_like(r, amp)
    if family == 1:
        return amp * np.clip(1.0 - r * r, 0.0, None) ** power
    if family == 2:
        return amp * r ** -(dim + 2.0 * alpha)
    return amp * np.interp(r, tab_r, tab_v, right=0.0)


def _panel_sums(lo, hi, a, kind, t, w, pref, gl_x, gl_w, kern):
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    r = mid[:, None] + half[:, None] * gl_x[None, :]
    x = a * r[..., None] * t
    if kind == 0:
        s = np.sin(0.5 * x)
        ang = (2.0 * s * s) @ w
    else:
        ang = np.sin(x) @ (w * t)
    f = kern(r) * r ** (kern.dim - 1) * pref * ang
    return half * (f @ gl_w)


class _Kernel:
    def __init__(self, family, amp, alpha, power, tab_r, tab_v, dim):
        self.args = (family, amp, alpha, power, np.asarray(tab_r), np.asarray(tab_v), dim)
        self.dim = dim

    def __call__(self, r):
        return _profile(*self.args, r)


def adaptive_radial(family, amp, alpha, power, tab_r, tab_v, dim, kind, a_values,
                    breaks, break_off, ang_t, ang_w, ang_off, pref, gl_x, gl_w,
                    heads, tol, max_panels, values, errors, panels):
    kern = _Kernel(family, amp, alpha, power, tab_r, tab_v, dim)
    status = np.zeros(len(a_values), dtype=np.int64)
    for i, a in enumerate(a_values):
        edges = breaks[break_off[i]:break_off[i + 1]]
        t = ang_t[ang_off[i]:ang_off[i + 1]]
        w = ang_w[ang_off[i]:ang_off[i + 1]]
        lo, hi = edges[:-1].copy(), edges[1:].copy()
        q = _panel_sums(lo, hi, a, kind, t, w, pref, gl_x, gl_w, kern)
        ref = abs(heads[i]) + np.abs(q).sum()
        total, err_sum, used = heads[i], 0.0, lo.size
        if ref == 0.0:
            values[i], errors[i], panels[i] = total, 0.0, used
            continue
        while lo.size:
            mid = 0.5 * (lo + hi)
            left = _panel_sums(lo, mid, a, kind, t, w, pref, gl_x, gl_w, kern)
            right = _panel_sums(mid, hi, a, kind, t, w, pref, gl_x, gl_w, kern)
            fine = left + right
            err = np.abs(fine - q)
            ok = err <= tol * np.maximum(ref * (hi - lo), np.abs(fine))
            total += fine[ok].sum()
            err_sum += err[ok].sum()
            used += 2 * lo.size
            bad = ~ok
            if used > max_panels and bad.any():
                status[i] = 1
                break
            lo = np.concatenate([lo[bad], mid[bad]])
            hi = np.concatenate([mid[bad], hi[bad]])
            q = np.concatenate([left[bad], right[bad]])
        values[i], errors[i], panels[i] = total, err_sum, used
    return status
