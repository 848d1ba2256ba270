"""Per-mode solution of the relaxed nonlocal Stokes system and its local limit.

In Fourier space the nonlocal system decouples into one (d+1)x(d+1) system
per frequency,

    [ lambda I    i b   ] [u]   [f]
    [ i b^T   delta^2 c ] [p] = [g],      b = b_delta(|xi|) xi/|xi|,

whose inverse is available in closed form with q = |b|^2 + delta^2 c lambda:

    u = (f - b (b.f)/q)/lambda - i b g/q,     p = -i (b.f)/q + lambda g/q.

The local Stokes system is the same with lambda = |xi|^2, b = xi, c = 0.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import DataError, MissingMollifier, ShapeMismatch, SingularMode, ZeroFrequency
from .fields import SpectralField, mode_keys
from .kernels import KernelSet
from .symbols import SymbolTable, symbol_table


class Variant(str, enum.Enum):
    NONLOCAL = "nonlocal"
    LOCAL = "local"
    MOLLIFIED = "mollified"
    FRACTIONAL = "fractional"


def _lbc(symbols):
    if hasattr(symbols, "lam"):
        return float(symbols.lam), float(symbols.b), float(symbols.c)
    lam, b, c = symbols[:3]
    return float(lam), float(b), float(c)


def _bvec(b: float, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    n = np.linalg.norm(xi)
    if n == 0:
        raise ZeroFrequency("the xi = 0 mode has no system")
    return b * xi / n


def assemble_mode_matrix(symbols, xi, delta: float) -> np.ndarray:
    """A(xi) = [[lambda I, i b], [i b^T, delta^2 c]] (complex symmetric)."""
    lam, b, c = _lbc(symbols)
    bv = _bvec(b, xi)
    d = bv.size
    A = np.zeros((d + 1, d + 1), complex)
    A[:d, :d] = lam * np.eye(d)
    A[:d, d] = 1j * bv
    A[d, :d] = 1j * bv
    A[d, d] = delta * delta * c
    return A


def invert_mode_matrix(symbols, xi, delta: float) -> np.ndarray:
    """Closed-form inverse of :func:`assemble_mode_matrix`."""
    lam, b, c = _lbc(symbols)
    bv = _bvec(b, xi)
    d = bv.size
    q = b * b + delta * delta * c * lam
    if not lam > 0 or not q > 0:
        raise SingularMode(f"mode matrix is singular (lambda={lam}, q={q})")
    B = np.zeros((d + 1, d + 1), complex)
    B[:d, :d] = (np.eye(d) - np.outer(bv, bv) / q) / lam
    B[:d, d] = -1j * bv / q
    B[d, :d] = -1j * bv / q
    B[d, d] = lam / q
    return B


@dataclass(frozen=True, eq=False)
class StokesProblem:
    f: SpectralField
    g: SpectralField
    kernels: KernelSet | None = None
    variant: Variant = Variant.NONLOCAL

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        f, g = self.f, self.g
        if f.components != f.d:
            raise ShapeMismatch(f"force must be a {f.d}-vector field, got {f.components} components")
        if g.components != 1:
            raise ShapeMismatch("divergence data must be a scalar field")
        if f.d != g.d:
            raise ShapeMismatch(f"force has d={f.d}, divergence data has d={g.d}")
        if self.kernels is not None and self.kernels.d != f.d:
            raise ShapeMismatch(f"kernel set has d={self.kernels.d}, data has d={f.d}")
        if self.variant is not Variant.LOCAL and self.kernels is None:
            raise DataError(f"{self.variant.value} problems need a kernel set")
        if self.variant is Variant.MOLLIFIED and self.kernels.omega_bar is None:
            raise MissingMollifier("mollified problems need a mollifier kernel")

    @property
    def d(self) -> int:
        return self.f.d

    @property
    def N(self) -> int:
        return max(self.f.N, self.g.N)

    @property
    def delta(self) -> float:
        return 0.0 if self.kernels is None or self.variant is Variant.LOCAL else self.kernels.delta

    def truncate(self, N: int) -> "StokesProblem":
        return StokesProblem(self.f.truncate(N), self.g.truncate(N), self.kernels, self.variant)


@dataclass(frozen=True, eq=False)
class StokesSolution:
    u: SpectralField
    p: SpectralField
    variant: Variant
    delta: float
    N: int
    residual_norm: float
    kernels: KernelSet | None = dc_field(default=None, repr=False)

    def metadata(self) -> dict:
        return {
            "variant": self.variant.value,
            "delta": self.delta,
            "N": self.N,
            "residual_norm": self.residual_norm,
            "kernel_set": None if self.kernels is None else self.kernels.to_dict(),
        }

    def to_dict(self) -> dict:
        return {**self.metadata(), "u": self.u.to_dict(), "p": self.p.to_dict()}


def _stack_data(f: SpectralField, g: SpectralField, N: int):
    """Union of populated modes with aligned force and divergence coefficients."""
    kf, kg = mode_keys(f.xi, N), mode_keys(g.xi, N)
    keys = np.union1d(kf, kg)
    base = 2 * N + 1
    xi = np.stack([(keys // base ** i) % base - N for i in range(f.d)], axis=1).astype(np.int64)
    F = np.zeros((keys.size, f.d), complex)
    G = np.zeros(keys.size, complex)
    F[np.searchsorted(keys, kf)] = f.coeffs
    G[np.searchsorted(keys, kg)] = g.coeffs[:, 0]
    return xi, F, G


def _finish(xi, U, P, N, d, variant, delta, residual, kernels) -> StokesSolution:
    u = SpectralField(d, d, N, xi, U)
    p = SpectralField(d, 1, N, xi, P[:, None])
    return StokesSolution(u, p, Variant(variant), float(delta), int(N), float(residual), kernels)


def _nonlocal_modes(xi, F, G, lam, b, c, delta):
    xin = np.sqrt(np.einsum("ij,ij->i", xi, xi).astype(float))
    bv = b[:, None] * xi / xin[:, None]
    q = b * b + delta * delta * c * lam
    if np.any(~(lam > 0)) or np.any(~(q > 0)):
        i = int(np.flatnonzero(~((lam > 0) & (q > 0)))[0])
        raise SingularMode(f"singular mode at xi={tuple(int(v) for v in xi[i])}: lambda={lam[i]}, q={q[i]}")
    bf = np.einsum("ij,ij->i", bv, F)
    U = (F - bv * (bf / q)[:, None]) / lam[:, None] - 1j * bv * (G / q)[:, None]
    P = -1j * bf / q + lam * G / q
    r1 = lam[:, None] * U + 1j * bv * P[:, None] - F
    r2 = 1j * np.einsum("ij,ij->i", bv, U) + delta * delta * c * P - G
    residual = max(np.abs(r1).max(initial=0.0), np.abs(r2).max(initial=0.0))
    return U, P, residual


def _table(problem: StokesProblem, table: SymbolTable | None) -> SymbolTable:
    if table is not None:
        if table.kernels != problem.kernels:
            raise DataError("symbol table was built for a different kernel set")
        return table
    return symbol_table(problem.kernels)


def solve_nonlocal(problem: StokesProblem, N: int | None = None, table: SymbolTable | None = None) -> StokesSolution:
    N = problem.N if N is None else int(N)
    prob = problem.truncate(N)
    xi, F, G = _stack_data(prob.f, prob.g, N)
    tab = _table(problem, table)
    lam, b, c, _ = tab.arrays(np.einsum("ij,ij->i", xi, xi))
    delta = problem.kernels.delta
    U, P, res = _nonlocal_modes(xi, F, G, lam, b, c, delta)
    variant = problem.variant if problem.variant is not Variant.LOCAL else Variant.NONLOCAL
    return _finish(xi, U, P, N, problem.d, variant, delta, res, problem.kernels)


def solve_local(problem: StokesProblem, N: int | None = None) -> StokesSolution:
    N = problem.N if N is None else int(N)
    prob = problem.truncate(N)
    xi, F, G = _stack_data(prob.f, prob.g, N)
    k2 = np.einsum("ij,ij->i", xi, xi).astype(float)
    xf = np.einsum("ij,ij->i", xi, F)
    U = (F - xi * (xf / k2)[:, None]) / k2[:, None] - 1j * xi * (G / k2)[:, None]
    P = -1j * xf / k2 + G
    r1 = k2[:, None] * U + 1j * xi * P[:, None] - F
    r2 = 1j * np.einsum("ij,ij->i", xi, U) - G
    res = max(np.abs(r1).max(initial=0.0), np.abs(r2).max(initial=0.0))
    return _finish(xi, U, P, N, problem.d, Variant.LOCAL, 0.0, res, problem.kernels)


def mollify_problem(problem: StokesProblem, d_values: Callable[[np.ndarray], np.ndarray] | None = None,
                    table: SymbolTable | None = None) -> StokesProblem:
    """Replace (f, g) by (1 - d_delta) (f, g).

    ``d_values`` maps an array of |xi|^2 to mollifier symbol values; it
    defaults to the quadrature symbol and exists so tests can force d = 0.
    """
    if problem.kernels is None or problem.kernels.omega_bar is None:
        raise MissingMollifier("mollification needs a kernel set with a mollifier kernel")
    if d_values is None:
        tab = _table(problem, table)
        d_values = lambda n: tab.arrays(n)[3]

    def apply(fld: SpectralField) -> SpectralField:
        if fld.n_modes == 0:
            return fld
        dm = np.asarray(d_values(fld.xi_sq), dtype=float)
        return SpectralField(fld.d, fld.components, fld.N, fld.xi, (1.0 - dm)[:, None] * fld.coeffs)

    return StokesProblem(apply(problem.f), apply(problem.g), problem.kernels, Variant.MOLLIFIED)


def solve_mollified(problem: StokesProblem, N: int | None = None, table: SymbolTable | None = None,
                    d_values: Callable | None = None) -> StokesSolution:
    N = problem.N if N is None else int(N)
    moll = mollify_problem(problem.truncate(N), d_values=d_values, table=table)
    return solve_nonlocal(moll, N, table=table)


def solve(problem: StokesProblem, N: int | None = None, table: SymbolTable | None = None) -> StokesSolution:
    if problem.variant is Variant.LOCAL:
        return solve_local(problem, N)
    if problem.variant is Variant.MOLLIFIED:
        return solve_mollified(problem, N, table=table)
    return solve_nonlocal(problem, N, table=table)


def residual_check(solution: StokesSolution, problem: StokesProblem) -> float:
    """Relative residual ``residual_norm / (|f_hat|_inf + |g_hat|_inf)`` (0 for zero data)."""
    scale = problem.f.max_abs() + problem.g.max_abs()
    return 0.0 if scale == 0 else solution.residual_norm / scale
