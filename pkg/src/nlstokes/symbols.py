"""Fourier symbols of the nonlocal operators and their bound certification.

For radial kernels every symbol depends on xi only through |xi|.  With
a = delta*|xi| and the unit-ball profiles of a :class:`KernelSet`,

    lambda_delta = delta^-2 R_cos(omega;       a)
    b_delta      = delta^-1 R_sin(omega_hat;   a)   (vector symbol b * xi/|xi|)
    c_delta      = delta^-2 R_cos(omega_tilde; a)
    d_delta      =          R_cos(omega_bar;   a)

where R_cos, R_sin are the radial-angular integrals of :mod:`.quadrature`.
Values are cached per integer |xi|^2, which is exact for lattice frequencies.
"""
from __future__ import annotations

import csv
import io
import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import MissingMollifier, ValidationError
from .kernels import KernelSet
from .quadrature import DEFAULT_TOL, KIND_COS, KIND_SIN, radial_transform

BOUND_SLACK = 1e-8


class SymbolTuple(NamedTuple):
    lam: float
    b: float
    c: float
    d_moll: float | None
    quadrature_error_estimate: float

    def q(self, delta: float) -> float:
        return self.b * self.b + delta * delta * self.c * self.lam


class SymbolTable:
    """Lazily filled cache of symbol values keyed by integer |xi|^2.

    Reads are lock-free dictionary lookups; inserts happen under a lock, so
    a table can be shared between solver threads.  ``prepare`` evaluates a
    batch of missing entries in one quadrature call per symbol.
    """

    def __init__(self, kernels: KernelSet, tol: float = DEFAULT_TOL, backend: str | None = None):
        self.kernels = kernels
        self.tol = float(tol)
        self.backend = backend
        self.cache: dict[int, SymbolTuple] = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self.cache)

    def _evaluate(self, xi_sq: np.ndarray) -> dict[int, SymbolTuple]:
        k = self.kernels
        delta = k.delta
        a = delta * np.sqrt(xi_sq.astype(float))
        run = lambda prof, kind: radial_transform(prof, kind, a, tol=self.tol, backend=self.backend)[:2]
        lam, e_lam = run(k.omega, KIND_COS)
        b, e_b = run(k.omega_hat, KIND_SIN)
        c, e_c = run(k.omega_tilde, KIND_COS)
        lam, e_lam = lam / delta ** 2, e_lam / delta ** 2
        b, e_b = b / delta, e_b / delta
        c, e_c = c / delta ** 2, e_c / delta ** 2
        if k.omega_bar is not None:
            dm, e_d = run(k.omega_bar, KIND_COS)
        else:
            dm, e_d = [None] * len(xi_sq), np.zeros(len(xi_sq))
        err = e_lam + e_b + e_c + e_d
        out = {}
        for i, n in enumerate(xi_sq):
            out[int(n)] = SymbolTuple(float(lam[i]), float(b[i]), float(c[i]),
                                      None if dm[i] is None else float(dm[i]), float(err[i]))
        return out

    def prepare(self, xi_sq: Iterable[int]) -> None:
        want = np.unique(np.asarray(list(xi_sq) if not isinstance(xi_sq, np.ndarray) else xi_sq, dtype=np.int64))
        if want.size and want[0] < 0:
            raise ValidationError("|xi|^2 must be non-negative")
        missing = np.array([n for n in want if int(n) not in self.cache], dtype=np.int64)
        if missing.size == 0:
            return
        values = self._evaluate(missing)
        with self._lock:
            for n, v in values.items():
                self.cache.setdefault(n, v)

    def get(self, xi_sq: int) -> SymbolTuple:
        n = int(xi_sq)
        hit = self.cache.get(n)
        if hit is None:
            self.prepare([n])
            hit = self.cache[n]
        return hit

    def arrays(self, xi_sq) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray | None]:
        """(lambda, b, c, d_moll) arrays aligned with ``xi_sq``."""
        xi_sq = np.asarray(xi_sq, dtype=np.int64)
        self.prepare(xi_sq)
        rows = [self.cache[int(n)] for n in xi_sq]
        lam = np.array([r.lam for r in rows])
        b = np.array([r.b for r in rows])
        c = np.array([r.c for r in rows])
        dm = None if self.kernels.omega_bar is None else np.array([r.d_moll for r in rows])
        return lam, b, c, dm


def _xi_sq_of(xi_norm: float) -> int:
    if not (xi_norm >= 0 and math.isfinite(xi_norm)):
        raise ValidationError(f"|xi| must be finite and non-negative, got {xi_norm}")
    n = xi_norm * xi_norm
    r = round(n)
    if abs(n - r) > 1e-9 * max(1.0, n):
        raise ValidationError(f"|xi| = {xi_norm} is not the norm of a lattice vector")
    return int(r)


def lambda_symbol(table: SymbolTable, xi_norm: float) -> float:
    return table.get(_xi_sq_of(xi_norm)).lam


def b_symbol(table: SymbolTable, xi_norm: float) -> float:
    return table.get(_xi_sq_of(xi_norm)).b


def c_symbol(table: SymbolTable, xi_norm: float) -> float:
    return table.get(_xi_sq_of(xi_norm)).c


def d_symbol(table: SymbolTable, xi_norm: float) -> float:
    if table.kernels.omega_bar is None:
        raise MissingMollifier("kernel set has no mollifier")
    return table.get(_xi_sq_of(xi_norm)).d_moll


_TABLES: dict[tuple, SymbolTable] = {}
_TABLES_LOCK = threading.Lock()


def symbol_table(kernels: KernelSet, tol: float = DEFAULT_TOL) -> SymbolTable:
    """Shared table per (kernel set, tolerance)."""
    key = (kernels, float(tol))
    with _TABLES_LOCK:
        tab = _TABLES.get(key)
        if tab is None:
            tab = _TABLES[key] = SymbolTable(kernels, tol)
    return tab


def lattice_norms_sq(d: int, xi_max: int) -> np.ndarray:
    """Sorted distinct |xi|^2 in (0, xi_max^2] attained by integer vectors in R^d."""
    if xi_max <= 0:
        return np.zeros(0, dtype=np.int64)
    lim = xi_max * xi_max
    sq = np.arange(xi_max + 1, dtype=np.int64) ** 2
    sums = sq
    for _ in range(d - 1):
        sums = np.unique((sums[:, None] + sq[None, :]).ravel())
        sums = sums[sums <= lim]
    return sums[sums > 0]


REPORT_COLUMNS = ("delta", "xi_sq", "lambda", "b", "c", "d_moll", "q", "check_name",
                  "bound_value", "margin", "pass")


@dataclass
class BoundReport:
    rows: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows)

    def failures(self) -> list[dict]:
        return [r for r in self.rows if not r["pass"]]

    def worst_margins(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for r in self.rows:
            out[r["check_name"]] = min(out.get(r["check_name"], math.inf), r["margin"])
        return out

    def checks(self) -> list[str]:
        return sorted({r["check_name"] for r in self.rows})

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in REPORT_COLUMNS])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _check(rows, base, name, value, bound, lower: bool):
    margin = value - bound if lower else bound - value
    ok = margin >= -BOUND_SLACK * max(1.0, abs(bound))
    rows.append({**base, "check_name": name, "bound_value": bound, "margin": margin, "pass": bool(ok)})


def certify_bounds(kernels: KernelSet | SymbolTable, xi_max: int, deltas: Iterable[float] | None = None,
                   tol: float = DEFAULT_TOL) -> BoundReport:
    """Evaluate every symbol on the lattice shells |xi| <= xi_max and check the
    two-regime bounds.  Violations are report rows, never exceptions.

    Checks (delta*|xi| > 1 is the high-frequency regime):

    * lambda_upper ``lambda <= |xi|^2``, c_upper ``c <= M |xi|^2``
    * low: lambda_low_lower ``lambda >= |xi|^2 (1 - (delta|xi|)^2/20)``,
      c_low_lower ``c >= m |xi|^2 / 2``, b_low_lower / b_upper
      ``|xi| (1 - (delta|xi|)^2/10) <= b <= |xi|``
    * high: lambda_high_lower ``lambda >= 1/(16 delta^2)``,
      c_high_lower ``c >= m/(16 delta^2)``, and for a fractional diffusion
      kernel fractional_growth ``lambda >= min(1, C/6) delta^(2a-2) |xi|^(2a)``
    * q_positive ``b^2 + delta^2 c lambda > 0``
    * with a mollifier: d_low_upper ``d <= delta^2 |xi|^2 / (2 dim)`` for
      delta|xi| < 1, d_upper ``d <= 2`` and d_lower ``d >= 0``
    """
    if isinstance(kernels, SymbolTable):
        tol = kernels.tol
        kernels = kernels.kernels
    deltas = [kernels.delta] if deltas is None else [float(x) for x in deltas]
    report = BoundReport()
    shells = lattice_norms_sq(kernels.d, int(xi_max))
    if shells.size == 0:
        return report
    for delta in deltas:
        ks = kernels.with_delta(delta)
        table = symbol_table(ks, tol)
        lam, b, c, dm = table.arrays(shells)
        frac = ks.omega.family == "fractional"
        for i, n in enumerate(shells):
            xi = math.sqrt(n)
            a = delta * xi
            q = b[i] ** 2 + delta ** 2 * c[i] * lam[i]
            base = {"delta": delta, "xi_sq": int(n), "lambda": lam[i], "b": b[i], "c": c[i],
                    "d_moll": None if dm is None else dm[i], "q": q}
            rows = report.rows
            _check(rows, base, "lambda_upper", lam[i], float(n), lower=False)
            _check(rows, base, "c_upper", c[i], ks.M * n, lower=False)
            if a > 1.0:
                _check(rows, base, "lambda_high_lower", lam[i], 1.0 / (16 * delta ** 2), lower=True)
                _check(rows, base, "c_high_lower", c[i], ks.m / (16 * delta ** 2), lower=True)
                if frac:
                    al = ks.omega.alpha
                    bound = min(1.0, ks.omega.amplitude / 6.0) * delta ** (2 * al - 2) * xi ** (2 * al)
                    _check(rows, base, "fractional_growth", lam[i], bound, lower=True)
            else:
                _check(rows, base, "lambda_low_lower", lam[i], n * (1 - a * a / 20), lower=True)
                _check(rows, base, "c_low_lower", c[i], ks.m * n / 2, lower=True)
                _check(rows, base, "b_low_lower", b[i], xi * (1 - a * a / 10), lower=True)
                _check(rows, base, "b_upper", b[i], xi, lower=False)
            rows.append({**base, "check_name": "q_positive", "bound_value": 0.0, "margin": q,
                         "pass": bool(q > 0)})
            if dm is not None:
                if a < 1.0:
                    _check(rows, base, "d_low_upper", dm[i], a * a / (2 * ks.d), lower=False)
                _check(rows, base, "d_upper", dm[i], 2.0, lower=False)
                _check(rows, base, "d_lower", dm[i], 0.0, lower=True)
    return report
