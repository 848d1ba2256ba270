"""Radial-angular quadrature for Fourier symbols of radial kernels.

For a radial profile K on the unit ball and a scaled frequency a = delta*|xi|
we evaluate

    R_cos(a) = int_0^1 K(r) r^(d-1) W_cos(a r) dr,  W_cos(x) = int_{S^(d-1)} (1 - cos(x t)) dsigma
    R_sin(a) = int_0^1 K(r) r^(d-1) W_sin(a r) dr,  W_sin(x) = int_{S^(d-1)} t sin(x t) dsigma

with t = e . y/|y|.  W is computed by a fixed composite Gauss-Legendre rule
in the angle (t = cos(phi) on [0,1] for d=3, phi on [0, pi/2] for d=2) and
the radial integral by adaptive bisection of Gauss-Legendre panels.

The panel loop runs in the compiled ``_core`` extension when it is
importable, otherwise in :mod:`._quadrature_py`.  Setting the environment
variable ``NLSTOKES_PURE_PYTHON=1`` forces the fallback.
"""
from __future__ import annotations

import math
import os
from functools import lru_cache

import numpy as np

from .errors import DivergentMoment, QuadratureFailure
from .kernels import RadialKernelProfile, sphere_area
from . import _quadrature_py

KIND_COS = 0
KIND_SIN = 1
FAMILY_CODES = {"constant": 0, "polynomial_bump": 1, "fractional": 2, "custom": 3}

PANEL_ORDER = 16
MAX_PANELS = 2 ** 14
DEFAULT_TOL = 1e-12

_GL_X, _GL_W = np.polynomial.legendre.leggauss(PANEL_ORDER)
_GL_X = np.ascontiguousarray(_GL_X)
_GL_W = np.ascontiguousarray(_GL_W)

_compiled = None
if os.environ.get("NLSTOKES_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _compiled  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on build
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def available_backends() -> list[str]:
    return (["compiled"] if _compiled is not None else []) + ["python"]


def angular_rule(d: int, a: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Nodes t_j, weights w_j and prefactor P with W(x) ~ P * sum_j w_j g(x t_j).

    The node count grows linearly with ``a`` so every sub-panel sees a
    bounded number of oscillations of cos(x t).
    """
    n_pan = 1 + int(a // 64.0)
    a_p = a / n_pan
    n = 10 + int(math.ceil((0.5 if d == 3 else 0.8) * a_p))
    return _composite_angular(d, n_pan, n)


@lru_cache(maxsize=512)
def _composite_angular(d: int, n_pan: int, n: int):
    if d == 3:
        length, prefactor = 1.0, 4.0 * math.pi
    else:
        length, prefactor = 0.5 * math.pi, 4.0
    x, w = np.polynomial.legendre.leggauss(n)
    h = length / n_pan
    nodes = np.concatenate([(k + 0.5) * h + 0.5 * h * x for k in range(n_pan)])
    weights = np.tile(0.5 * h * w, n_pan)
    if d == 2:
        nodes = np.cos(nodes)
    return np.ascontiguousarray(nodes), np.ascontiguousarray(weights), prefactor


def _series_head(profile: RadialKernelProfile, kind: int, a: float, eps: float) -> float:
    """Two-term small-argument integral of a fractional profile over [0, eps]."""
    d, al, A = profile.d, profile.alpha, profile.amplitude
    S = sphere_area(d)
    t2 = 1.0 / d
    t4 = 3.0 / (d * (d + 2.0))
    if kind == KIND_COS:
        # W(x) = S (x^2 <t^2>/2 - x^4 <t^4>/24 + ...), integrand ~ r^(-1-2 alpha) W(a r)
        return A * S * (a * a * t2 / 2.0 * eps ** (2 - 2 * al) / (2 - 2 * al)
                        - a ** 4 * t4 / 24.0 * eps ** (4 - 2 * al) / (4 - 2 * al))
    return A * S * (a * t2 * eps ** (1 - 2 * al) / (1 - 2 * al)
                    - a ** 3 * t4 / 6.0 * eps ** (3 - 2 * al) / (3 - 2 * al))


def breakpoints(profile: RadialKernelProfile, a: float) -> np.ndarray:
    """Initial radial panel edges.

    Fractional profiles start at eps > 0 with geometric grading; the piece
    [0, eps] is covered by :func:`_series_head`.
    """
    n0 = 1 + int(a // 10.0)
    pts = np.linspace(0.0, 1.0, n0 + 1)
    if profile.family == "fractional":
        eps = min(2.0 ** -10, 5e-4 / a) if a > 0 else 2.0 ** -10
        n_geo = int(math.ceil(math.log2(1.0 / eps)))
        geo = eps * 2.0 ** np.arange(n_geo + 1)
        pts = np.union1d(pts[pts > eps], geo[geo < 1.0])
        pts = np.union1d(pts, [eps, 1.0])
    elif profile.family == "custom":
        tab = np.asarray(profile.table_r)
        pts = np.union1d(pts, tab[(tab > 0) & (tab < 1)])
    return np.ascontiguousarray(pts, dtype=float)


def radial_transform(profile: RadialKernelProfile, kind: int, a_values, tol: float = DEFAULT_TOL,
                     max_panels: int = MAX_PANELS, backend: str | None = None):
    """Evaluate R_kind(a) for every ``a`` in ``a_values``.

    Returns ``(values, error_estimates, panels_used)``; raises
    :class:`QuadratureFailure` when some value exhausts the panel budget.
    """
    a_values = np.atleast_1d(np.asarray(a_values, dtype=float))
    n = a_values.size
    values = np.zeros(n)
    errors = np.zeros(n)
    panels = np.zeros(n, dtype=np.int64)
    if profile.amplitude == 0.0 or n == 0:
        return values, errors, panels
    if profile.family == "fractional" and kind == KIND_SIN and 2.0 * profile.alpha >= 1.0:
        # integrand ~ a r^(-2 alpha) near the origin
        raise DivergentMoment(f"sine transform of a fractional profile needs alpha < 1/2, got {profile.alpha}")

    use = backend or BACKEND
    if use not in ("compiled", "python"):
        raise ValueError(f"unknown quadrature backend {use!r}")
    if use == "compiled" and _compiled is None:
        raise RuntimeError("compiled quadrature backend is not available")
    impl = _compiled if use == "compiled" else _quadrature_py

    heads = np.zeros(n)
    brk, brk_off = [], [0]
    for i, a in enumerate(a_values):
        pts = breakpoints(profile, a)
        if profile.family == "fractional" and a > 0:
            heads[i] = _series_head(profile, kind, a, pts[0])
        brk.append(pts)
        brk_off.append(brk_off[-1] + pts.size)
    brk_flat = np.ascontiguousarray(np.concatenate(brk))
    brk_off = np.asarray(brk_off, dtype=np.int64)

    ang_t, ang_w, ang_off = [], [], [0]
    pref = 0.0
    for a in a_values:
        t, w, pref = angular_rule(profile.d, float(a))
        ang_t.append(t)
        ang_w.append(w)
        ang_off.append(ang_off[-1] + t.size)
    ang_t = np.ascontiguousarray(np.concatenate(ang_t))
    ang_w = np.ascontiguousarray(np.concatenate(ang_w))
    ang_off = np.asarray(ang_off, dtype=np.int64)

    tab_r = np.ascontiguousarray(profile.table_r or (0.0,), dtype=float)
    tab_v = np.ascontiguousarray(profile.table_v or (0.0,), dtype=float)
    status = impl.adaptive_radial(
        FAMILY_CODES[profile.family], float(profile.amplitude), float(profile.alpha or 0.0),
        float(profile.power), tab_r, tab_v, int(profile.d), int(kind),
        np.ascontiguousarray(a_values), brk_flat, brk_off, ang_t, ang_w, ang_off, float(pref),
        _GL_X, _GL_W, heads, float(tol), int(max_panels), values, errors, panels)
    bad = np.flatnonzero(np.asarray(status) != 0)
    if bad.size:
        raise QuadratureFailure(
            f"panel budget {max_panels} exhausted for {profile.family} kernel at a={a_values[bad[0]]:.6g}")
    return values, errors, panels
