"""Manufactured solutions, delta and band sweeps, rate fits and the AC diagram."""
from __future__ import annotations

import csv
import enum
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, DegenerateFit, NLStokesError
from .fields import SpectralField, half_modes, random_field
from .kernels import KernelSet
from .solver import StokesProblem, Variant, solve, solve_local

DEFAULT_DELTAS = (0.2, 0.1, 0.05, 0.025)
CASE_BAND = 4
SLOPE_WINDOW = (1.8, 2.2)
MIN_R2 = 0.98
# errors below this fraction of the solution/data size count as zero
ROUNDOFF_FLOOR = 1e-12


class CaseFamily(str, enum.Enum):
    SINGLE_MODE_SHEAR = "single-mode-shear"
    MULTI_MODE_DIV_FREE = "multi-mode-div-free"
    PRESSURE_DRIVEN = "pressure-driven"
    WITH_DIVERGENCE_DATA = "with-divergence-data"
    RANDOM = "random"
    RANDOM_DECAYING = "random-decaying"


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    name: str
    d: int
    u_exact: SpectralField
    p_exact: SpectralField
    f: SpectralField
    g: SpectralField

    @property
    def N(self) -> int:
        return max(self.f.N, self.g.N)

    def problem(self, kernels: KernelSet | None, variant: Variant | str = Variant.NONLOCAL) -> StokesProblem:
        return StokesProblem(self.f, self.g, kernels, Variant(variant))


def manufacture(u: SpectralField, p: SpectralField) -> tuple[SpectralField, SpectralField]:
    """(f, g) with f_hat = |xi|^2 u_hat + i xi p_hat and g_hat = i xi . u_hat."""
    d = u.d
    N = max(u.N, p.N)
    u = u.with_band(N)
    p = p.with_band(N)
    fu = SpectralField(d, d, N, u.xi, u.xi_sq[:, None] * u.coeffs)
    fp = SpectralField(d, d, N, p.xi, 1j * p.xi * p.coeffs)
    g = SpectralField(d, 1, N, u.xi, 1j * np.einsum("ij,ij->i", u.xi, u.coeffs)[:, None])
    return fu + fp, g


def _half_pair(d: int, N: int, xi, value) -> SpectralField:
    """Real field with the given coefficient at xi (and its conjugate at -xi)."""
    return SpectralField.from_half(d, N, np.array([xi]), np.atleast_2d(np.asarray(value, complex)))


def _unit(d: int, k: int) -> list[int]:
    e = [0] * d
    e[k] = 1
    return e


def _div_free_modes(d: int) -> tuple[np.ndarray, np.ndarray]:
    """A fixed handful of band-limited divergence-free modes."""
    if d == 2:
        xi = np.array([[1, 0], [1, 2], [3, 1], [0, 4], [2, -2]])
    else:
        xi = np.array([[1, 0, 0], [0, 2, 1], [1, -1, 2], [3, 0, 1], [0, 0, 4]])
    amp = np.array([1.0, 0.5 - 0.25j, 0.3j, 0.2, -0.15 + 0.1j])
    coeff = np.zeros(xi.shape, complex)
    for i, k in enumerate(xi):
        t = np.zeros(d)
        if d == 2:
            t[:] = (-k[1], k[0])
        else:
            t = np.cross(k.astype(float), np.array([1.0, 2.0, 3.0]))
        coeff[i] = amp[i] * t / np.linalg.norm(t)
    return xi, coeff


def _random_band_limited(d: int, seed: int, band: float = CASE_BAND):
    rng = np.random.default_rng(seed)
    xi = half_modes(d, int(band))
    xi = xi[np.einsum("ij,ij->i", xi, xi) <= band * band]
    k2 = np.einsum("ij,ij->i", xi, xi).astype(float)
    n = xi.shape[0]
    raw = (rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))) / (1.0 + k2[:, None])
    # Leray projection keeps the velocity divergence-free
    uc = raw - xi * (np.einsum("ij,ij->i", xi, raw) / k2)[:, None]
    pc = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / (1.0 + k2)
    scale = (2 * math.pi) ** d
    N = int(band)
    return SpectralField.from_half(d, N, xi, scale * uc), SpectralField.from_half(d, N, xi, scale * pc[:, None])


def make_case(family: CaseFamily | str, d: int, seed: int = 42, decay: float = 4.0,
              master_band: int = 64) -> ManufacturedCase:
    """Manufactured (u, p, f, g) solving the local Stokes system exactly.

    ``seed`` is used by the random families, ``decay`` and ``master_band`` only
    by ``random-decaying`` (random f with |f_hat| ~ |xi|^-decay, g = 0).
    """
    family = CaseFamily(family)
    if d not in (2, 3):
        raise ConfigError(f"dimension must be 2 or 3, got {d}")
    half = (2 * math.pi) ** d / 2
    zero_p = SpectralField.zero(d, 1, 1)
    zero_u = SpectralField.zero(d, d, 1)
    if family is CaseFamily.SINGLE_MODE_SHEAR:
        # u = (sin x2, 0, ...), p = 0
        u = _half_pair(d, 1, _unit(d, 1), [-1j * half] + [0] * (d - 1))
        p = zero_p
    elif family is CaseFamily.MULTI_MODE_DIV_FREE:
        xi, c = _div_free_modes(d)
        u = SpectralField.from_half(d, CASE_BAND, xi, half * c)
        p = SpectralField.zero(d, 1, CASE_BAND)
    elif family is CaseFamily.PRESSURE_DRIVEN:
        # u = 0, p = cos x1
        u = zero_u
        p = _half_pair(d, 1, _unit(d, 0), [half])
    elif family is CaseFamily.WITH_DIVERGENCE_DATA:
        # f = 0 and smooth g; the local solution is u_hat = -i xi g_hat/|xi|^2, p_hat = g_hat
        if d == 2:
            xi = np.array([[1, 0], [0, 2], [1, 1], [3, -2]])
        else:
            xi = np.array([[1, 0, 0], [0, 2, 0], [1, 1, -1], [0, 3, 2]])
        gc = half * np.array([1.0, 0.5j, -0.4, 0.25 + 0.1j])
        g = SpectralField.from_half(d, CASE_BAND, xi, gc[:, None])
        k2 = g.xi_sq.astype(float)
        u = SpectralField(d, d, CASE_BAND, g.xi, -1j * g.xi * (g.coeffs[:, 0] / k2)[:, None])
        return ManufacturedCase(family.value, d, u, g, SpectralField.zero(d, d, CASE_BAND), g)
    elif family is CaseFamily.RANDOM:
        u, p = _random_band_limited(d, seed)
    else:
        f = random_field(seed, master_band, decay, components=d, d=d)
        g = SpectralField.zero(d, 1, master_band)
        loc = solve_local(StokesProblem(f, g, None, Variant.LOCAL))
        return ManufacturedCase(family.value, d, loc.u, loc.p, f, g)
    f, g = manufacture(u, p)
    if family is CaseFamily.MULTI_MODE_DIV_FREE:
        # div u = 0 analytically; drop the round-off left in i xi . u_hat
        g = SpectralField.zero(d, 1, g.N)
    return ManufacturedCase(family.value, d, u.with_band(f.N), p.with_band(f.N), f, g)


def fit_rate(points: Iterable[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares (slope, intercept, R^2) of log(error) against log(parameter)."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 2:
        raise DegenerateFit("a rate fit needs at least two points")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise DegenerateFit("rate fits need positive parameters and positive finite errors")
    if np.unique(x).size != x.size:
        raise DegenerateFit("repeated parameter value in rate fit")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float(np.sum(ly * ly))) else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return float(slope), float(intercept), float(r2)


@dataclass
class ConvergenceReport:
    """Ordered records (parameter, {norm name: value}) and fitted rates.

    ``fit_names`` lists the norms that are errors (fitted); the remaining
    entries are diagnostics such as stability ratios.  ``fitted[name]`` is
    (slope, intercept, R^2), or None when every error is at most
    ``zero_floor`` (zero up to round-off); such norms are flagged in ``exact``.
    """

    axis: str
    records: list[tuple[float, dict[str, float]]] = field(default_factory=list)
    fit_names: list[str] = field(default_factory=list)
    fitted: dict[str, tuple[float, float, float] | None] = field(default_factory=dict)
    exact: dict[str, bool] = field(default_factory=dict)
    zero_floor: float = 0.0
    incomplete: bool = False
    warnings: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, value: float, norms: dict[str, float]) -> None:
        self.records.append((float(value), dict(norms)))

    def values(self, name: str) -> list[float]:
        return [r[1][name] for r in self.records]

    def params(self) -> list[float]:
        return [r[0] for r in self.records]

    def finalize(self) -> "ConvergenceReport":
        self.records.sort(key=lambda r: r[0])
        self.fitted, self.exact = {}, {}
        if len(self.records) < 3:
            self.warnings.append(f"only {len(self.records)} records; no rates fitted")
            return self
        for name in self.fit_names:
            errs = self.values(name)
            if all(e <= self.zero_floor for e in errs):
                self.fitted[name] = None
                self.exact[name] = True
                continue
            pts = [(x, e) for x, e in zip(self.params(), errs) if e > self.zero_floor]
            if len(pts) < len(errs):
                # e.g. a band sweep reaching the data band; the fit uses the non-zero errors only
                self.warnings.append(f"{name}: {len(errs) - len(pts)} error(s) zero to round-off left out of the fit")
            try:
                self.fitted[name] = fit_rate(pts)
            except DegenerateFit as exc:
                self.warnings.append(f"{name}: {exc}")
        return self

    def slope(self, name: str) -> float | None:
        fit = self.fitted.get(name)
        return None if fit is None else fit[0]

    def rate(self, name: str) -> float | None:
        """Convergence order: the slope for delta sweeps, minus the slope for band sweeps."""
        s = self.slope(name)
        if s is None:
            return None
        return -s if self.axis == "band" else s

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axis_value", "norm_name", "error"])
        for value, norms in self.records:
            for name in sorted(norms):
                w.writerow([f"{value:.17g}", name, f"{norms[name]:.17g}"])
        return buf.getvalue()

    def summary(self, window: tuple[float, float] | None = None, min_rate: float | None = None,
                checked: Sequence[str] = ()) -> dict:
        """JSON-ready summary; ``checked`` norms are asserted against the window or minimum rate."""
        fits = {}
        for name in self.fit_names:
            fit = self.fitted.get(name)
            entry: dict = {"exact_zero": bool(self.exact.get(name, False))}
            if fit is not None:
                entry.update(slope=fit[0], intercept=fit[1], r2=fit[2], rate=self.rate(name))
            fits[name] = entry
        checks = {}
        for name in checked:
            checks[name] = _rate_check(self, name, window, min_rate)
        return {
            "axis": self.axis,
            "n_records": len(self.records),
            "fits": fits,
            "checks": checks,
            "passed": all(c["pass"] for c in checks.values()),
            "incomplete": self.incomplete,
            "warnings": list(self.warnings),
            **({"meta": self.meta} if self.meta else {}),
        }


def _rate_check(rep: ConvergenceReport, name: str, window, min_rate) -> dict:
    if rep.exact.get(name):
        return {"pass": True, "reason": "error zero to round-off"}
    fit = rep.fitted.get(name)
    if fit is None:
        return {"pass": len(rep.records) < 3, "reason": "no fit"}
    rate = rep.rate(name)
    ok = fit[2] >= MIN_R2
    if window is not None:
        ok = ok and window[0] <= rate <= window[1]
    if min_rate is not None:
        ok = ok and rate >= min_rate
    return {"pass": bool(ok), "rate": rate, "r2": fit[2]}


def _threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("NLSTOKES_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _pmap(fn: Callable, items: Sequence, threads: int | None):
    """Ordered map that stops at the first failure and returns (results, error)."""
    n = _threads(threads)
    results, error = [], None
    if n == 1 or len(items) <= 1:
        for it in items:
            try:
                results.append(fn(it))
            except NLStokesError as exc:
                error = exc
                break
        return results, error
    with ThreadPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(fn, it) for it in items]
        for fut in futures:
            try:
                results.append(fut.result())
            except NLStokesError as exc:
                error = exc
                break
    return results, error


def _err(a: SpectralField, b: SpectralField, s: float = 0.0) -> float:
    return (a - b).sobolev_norm(s)


def delta_sweep(case: ManufacturedCase, kernels_template: KernelSet, deltas: Sequence[float] = DEFAULT_DELTAS,
                N: int | None = None, variant: Variant | str = Variant.NONLOCAL,
                threads: int | None = None) -> ConvergenceReport:
    """Solve at each delta and record errors against the exact solution truncated to N.

    Records ``u_L2`` and ``p_L2``; fractional runs add ``u_H<alpha>`` and the
    diagnostic ``pickup_ratio`` = |u_delta|_{H^alpha} / (|f|_{H^-alpha} + |g|_{L2});
    mollified runs add ``u_H<gamma>``.  Every run adds ``stability_ratio`` =
    (|u_delta| + |p_delta|) / (|f| + |g|) in L2.
    """
    variant = Variant(variant)
    N = case.N if N is None else int(N)
    deltas = [float(x) for x in deltas]
    if len(deltas) != len(set(deltas)):
        raise ConfigError("repeated delta in sweep")
    for x in deltas:
        if not 0 < x < 1:
            raise ConfigError(f"delta must lie in (0,1), got {x}")
    u_ref = case.u_exact.truncate(N)
    p_ref = case.p_exact.truncate(N)
    f_n, g_n = case.f.truncate(N), case.g.truncate(N)
    data_l2 = f_n.sobolev_norm(0) + g_n.sobolev_norm(0)
    scale = max(u_ref.sobolev_norm(0), p_ref.sobolev_norm(0), data_l2)
    rep = ConvergenceReport("delta", fit_names=["u_L2", "p_L2"], zero_floor=ROUNDOFF_FLOOR * scale)
    extra = None
    if variant is Variant.FRACTIONAL:
        alpha = kernels_template.omega.alpha
        if alpha is None:
            raise ConfigError("fractional sweeps need a fractional diffusion kernel")
        extra = ("u_H%g" % alpha, alpha)
        data_neg = f_n.sobolev_norm(-alpha) + g_n.sobolev_norm(0)
        rep.meta["alpha"] = alpha
    elif variant is Variant.MOLLIFIED:
        gamma = kernels_template.gamma
        if gamma is None:
            raise ConfigError("mollified sweeps need a mollifier kernel")
        extra = ("u_H%g" % gamma, gamma)
        rep.meta["gamma"] = gamma
    if extra:
        rep.fit_names.append(extra[0])

    def run(delta):
        ks = kernels_template.with_delta(delta)
        sol = solve(case.problem(ks, variant), N)
        norms = {"u_L2": _err(sol.u, u_ref), "p_L2": _err(sol.p, p_ref)}
        if extra:
            norms[extra[0]] = _err(sol.u, u_ref, extra[1])
        if variant is Variant.FRACTIONAL:
            norms["pickup_ratio"] = sol.u.sobolev_norm(extra[1]) / data_neg if data_neg else 0.0
        norms["stability_ratio"] = ((sol.u.sobolev_norm(0) + sol.p.sobolev_norm(0)) / data_l2) if data_l2 else 0.0
        norms["residual"] = sol.residual_norm
        return delta, norms

    results, error = _pmap(run, deltas, threads)
    for delta, norms in results:
        rep.add(delta, norms)
    if error is not None:
        rep.incomplete = True
        rep.warnings.append(f"sweep aborted: {type(error).__name__}: {error}")
        rep.meta["error"] = error
    rep.meta.update(case=case.name, d=case.d, N=N, variant=variant.value)
    return rep.finalize()


def band_sweep(case: ManufacturedCase, kernels: KernelSet | None, delta: float | None, Ns: Sequence[int],
               variant: Variant | str = Variant.NONLOCAL, threads: int | None = None) -> ConvergenceReport:
    """Truncate the data to each N and compare with the solution on the full data band."""
    variant = Variant(variant)
    ks = None if kernels is None else (kernels if delta is None else kernels.with_delta(delta))
    Ns = sorted(int(n) for n in Ns)
    if len(Ns) != len(set(Ns)) or any(n < 1 for n in Ns):
        raise ConfigError("band limits must be distinct positive integers")
    prob = case.problem(ks, variant)
    master = solve(prob)
    scale = max(master.u.sobolev_norm(0), master.p.sobolev_norm(0))
    rep = ConvergenceReport("band", fit_names=["u_L2", "p_L2"], zero_floor=ROUNDOFF_FLOOR * scale)

    def run(n):
        sol = solve(prob, n)
        return n, {"u_L2": _err(sol.u, master.u), "p_L2": _err(sol.p, master.p)}

    results, error = _pmap(run, Ns, threads)
    for n, norms in results:
        rep.add(n, norms)
    if error is not None:
        rep.incomplete = True
        rep.warnings.append(f"sweep aborted: {type(error).__name__}: {error}")
    rep.meta.update(case=case.name, d=case.d, master_band=case.N, variant=variant.value,
                    delta=None if ks is None else ks.delta)
    return rep.finalize()


@dataclass
class ACReport:
    corner_i: ConvergenceReport
    corner_ii: ConvergenceReport
    diagonal: list[dict]
    meta: dict = field(default_factory=dict)

    @property
    def triangle_ok(self) -> bool:
        return all(r["triangle_ok"] for r in self.diagonal)

    @property
    def diagonal_converges(self) -> bool:
        e = [r["diag_u_L2"] for r in self.diagonal]
        return all(b <= a * (1 + 1e-12) for a, b in zip(e, e[1:]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["axis_value", "norm_name", "error"])
        for tag, rep in (("corner_i", self.corner_i), ("corner_ii", self.corner_ii)):
            for value, norms in rep.records:
                for name in sorted(norms):
                    w.writerow([f"{value:.17g}", f"{tag}_{name}", f"{norms[name]:.17g}"])
        for r in self.diagonal:
            for name in ("diag_u_L2", "corner_i_part", "truncation_part"):
                w.writerow([f"{r['delta']:.17g}", f"{name}@N={r['N']}", f"{r[name]:.17g}"])
        return buf.getvalue()

    def summary(self) -> dict:
        s_i = self.corner_i.summary(window=SLOPE_WINDOW, checked=["u_L2"])
        band_zero = bool(self.corner_ii.exact.get("u_L2"))
        if band_zero:
            s_ii = self.corner_ii.summary(checked=["u_L2"])
        else:
            s_ii = self.corner_ii.summary(min_rate=2.0, checked=["u_L2"])
        checks = {
            "corner_i_slope": s_i["checks"]["u_L2"],
            "corner_ii_converges": s_ii["checks"]["u_L2"],
            "diagonal_converges": {"pass": self.diagonal_converges},
            "triangle": {"pass": self.triangle_ok},
        }
        return {"corner_i": s_i, "corner_ii": s_ii, "diagonal": self.diagonal, "checks": checks,
                "passed": all(c["pass"] for c in checks.values()), "meta": self.meta}


def ac_diagram(case: ManufacturedCase, kernels_template: KernelSet, deltas: Sequence[float] = DEFAULT_DELTAS,
               Ns: Sequence[int] = (4, 8, 16, 32), N_fixed: int = 16, delta_fixed: float = 0.1,
               threads: int | None = None) -> ACReport:
    """The four corners of the discretization/localization diagram.

    (i) N fixed, delta -> 0: |u_delta^N - u^N| (nonlocal vs local on the same band);
    (ii) delta fixed, N -> infinity: |u_delta^N - u_delta| against the case's full band;
    diagonal: (delta_k, N_k) refined together, |u_delta^N - u| against the full-band local solution,
    with the triangle bound |u_delta^N - u| <= |u_delta^N - u^N| + |u^N - u|.
    """
    deltas = sorted((float(x) for x in deltas), reverse=True)
    Ns = sorted(int(n) for n in Ns)
    local_case = _truncated_local_case(case, N_fixed)
    corner_i = delta_sweep(local_case, kernels_template, deltas, N_fixed, Variant.NONLOCAL, threads)
    corner_ii = band_sweep(case, kernels_template, delta_fixed, Ns, Variant.NONLOCAL, threads)
    loc_full = solve_local(case.problem(None, Variant.LOCAL))
    diag = []
    for delta, n in zip(deltas, Ns):
        ks = kernels_template.with_delta(delta)
        prob = case.problem(ks, Variant.NONLOCAL)
        sol = solve(prob, n)
        loc_n = solve_local(prob, n)
        e_diag = _err(sol.u, loc_full.u)
        e_i = _err(sol.u, loc_n.u)
        e_t = _err(loc_n.u, loc_full.u)
        diag.append({"delta": delta, "N": n, "diag_u_L2": e_diag, "corner_i_part": e_i,
                     "truncation_part": e_t, "triangle_ok": bool(e_diag <= (e_i + e_t) * (1 + 1e-12) + 1e-300)})
    meta = {"case": case.name, "d": case.d, "master_band": case.N, "N_fixed": N_fixed, "delta_fixed": delta_fixed}
    return ACReport(corner_i, corner_ii, diag, meta)


def _truncated_local_case(case: ManufacturedCase, N: int) -> ManufacturedCase:
    """Case whose exact solution is the local solution of the band-N data."""
    f, g = case.f.truncate(N), case.g.truncate(N)
    loc = solve_local(StokesProblem(f, g, None, Variant.LOCAL))
    return ManufacturedCase(case.name, case.d, loc.u, loc.p, f, g)
