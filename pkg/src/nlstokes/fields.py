"""Mean-zero real periodic fields on (-pi, pi)^d as sparse Fourier coefficients.

Convention: u_hat(xi) = int u(x) exp(-i xi.x) dx and
u(x) = (2 pi)^-d sum_xi u_hat(xi) exp(i xi.x).

Coefficients are kept as two aligned arrays, ``xi`` (n, d) int64 and
``coeffs`` (n, components) complex, sorted by an integer key that encodes
the lattice vector.  Only the non-zero modes of the band cube
max_i |xi_i| <= N (xi != 0) are stored.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import AliasingRisk, DataError, HermitianViolation, MeanNotZero, NonRealResult, ShapeMismatch

HERMITIAN_RTOL = 1e-12
REAL_TOL = 1e-9
MEAN_TOL = 1e-9


def mode_keys(xi: np.ndarray, N: int) -> np.ndarray:
    """Integer key of each lattice vector in the cube |xi_i| <= N; key(-xi) = base^d - 1 - key(xi)."""
    base = 2 * N + 1
    w = base ** np.arange(xi.shape[1], dtype=np.int64)
    return (xi + N) @ w


def band_modes(d: int, N: int) -> np.ndarray:
    """All xi != 0 with max_i |xi_i| <= N, in key order."""
    if N <= 0:
        return np.zeros((0, d), dtype=np.int64)
    base = 2 * N + 1
    keys = np.arange(base ** d, dtype=np.int64)
    xi = np.stack([(keys // base ** i) % base - N for i in range(d)], axis=1)
    return xi[np.any(xi != 0, axis=1)]


def half_modes(d: int, N: int) -> np.ndarray:
    """One representative of each pair {xi, -xi} in the band (last non-zero component positive)."""
    xi = band_modes(d, N)
    keys = mode_keys(xi, N)
    return xi[keys > ((2 * N + 1) ** d - 1) // 2]


@dataclass(frozen=True, eq=False)
class SpectralField:
    d: int
    components: int
    N: int
    xi: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ShapeMismatch(f"dimension must be 2 or 3, got {self.d}")
        if self.components not in (1, self.d):
            raise ShapeMismatch(f"components must be 1 or d={self.d}, got {self.components}")
        if self.N < 0:
            raise ShapeMismatch("band limit must be non-negative")
        xi = np.asarray(self.xi, dtype=np.int64).reshape(-1, self.d)
        c = np.asarray(self.coeffs, dtype=complex).reshape(xi.shape[0], self.components)
        if xi.shape[0] and np.abs(xi).max() > self.N:
            raise DataError(f"coefficient outside the band limit N={self.N}")
        zero = np.all(xi == 0, axis=1)
        if np.any(zero):
            if np.abs(c[zero]).max() > 0:
                raise MeanNotZero("field has a non-zero mean (xi = 0 coefficient)")
            xi, c = xi[~zero], c[~zero]
        keys = mode_keys(xi, self.N)
        order = np.argsort(keys, kind="stable")
        xi, c, keys = xi[order], c[order], keys[order]
        if keys.size and np.any(np.diff(keys) == 0):
            raise DataError("duplicate lattice vector in coefficient list")
        nz = np.any(c != 0, axis=1)
        xi, c, keys = xi[nz], c[nz], keys[nz]
        _check_hermitian(keys, c, (2 * self.N + 1) ** self.d - 1)
        xi.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "coeffs", c)

    # construction -------------------------------------------------------

    @classmethod
    def zero(cls, d: int, components: int = 1, N: int = 0) -> "SpectralField":
        return cls(d, components, N, np.zeros((0, d), np.int64), np.zeros((0, components), complex))

    @classmethod
    def from_modes(cls, d: int, N: int, modes: dict, components: int | None = None) -> "SpectralField":
        """Build from {xi tuple: value or vector}; the conjugate partners must be included."""
        xi = np.array([list(k) for k in modes], dtype=np.int64).reshape(-1, d)
        vals = [np.atleast_1d(np.asarray(v, dtype=complex)) for v in modes.values()]
        if components is None:
            components = vals[0].size if vals else 1
        c = np.array(vals, dtype=complex).reshape(-1, components)
        return cls(d, components, N, xi, c)

    @classmethod
    def from_half(cls, d: int, N: int, xi_half: np.ndarray, c_half: np.ndarray) -> "SpectralField":
        """Build from one member of each conjugate pair; the partner is filled in."""
        xi_half = np.asarray(xi_half, dtype=np.int64).reshape(-1, d)
        c_half = np.asarray(c_half, dtype=complex).reshape(xi_half.shape[0], -1)
        return cls(d, c_half.shape[1], N, np.concatenate([xi_half, -xi_half]),
                   np.concatenate([c_half, np.conj(c_half)]))

    # basic queries --------------------------------------------------------

    @property
    def n_modes(self) -> int:
        return self.xi.shape[0]

    @property
    def xi_sq(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.xi, self.xi)

    def coefficient(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=np.int64).reshape(1, self.d)
        if np.abs(xi).max() > self.N:
            return np.zeros(self.components, complex)
        key = mode_keys(xi, self.N)[0]
        keys = mode_keys(self.xi, self.N)
        i = np.searchsorted(keys, key)
        if i < keys.size and keys[i] == key:
            return self.coeffs[i].copy()
        return np.zeros(self.components, complex)

    def as_dict(self) -> dict:
        return {tuple(int(v) for v in k): (c[0] if self.components == 1 else c.copy())
                for k, c in zip(self.xi, self.coeffs)}

    def max_abs(self) -> float:
        return float(np.abs(self.coeffs).max()) if self.n_modes else 0.0

    # arithmetic -----------------------------------------------------------

    def _compatible(self, other: "SpectralField"):
        if self.d != other.d or self.components != other.components:
            raise ShapeMismatch(f"cannot combine fields with (d, components) = {(self.d, self.components)} "
                                f"and {(other.d, other.components)}")

    def _combine(self, other: "SpectralField", sign: float) -> "SpectralField":
        self._compatible(other)
        N = max(self.N, other.N)
        xi = np.concatenate([self.xi, other.xi])
        c = np.concatenate([self.coeffs, sign * other.coeffs])
        keys = mode_keys(xi, N)
        uniq, first, inv = np.unique(keys, return_index=True, return_inverse=True)
        out = np.zeros((uniq.size, self.components), complex)
        np.add.at(out, inv, c)
        return SpectralField(self.d, self.components, N, xi[first], out)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def scale(self, factor: float) -> "SpectralField":
        return SpectralField(self.d, self.components, self.N, self.xi, float(factor) * self.coeffs)

    def truncate(self, N: int) -> "SpectralField":
        keep = np.abs(self.xi).max(axis=1, initial=0) <= N if self.n_modes else np.zeros(0, bool)
        return SpectralField(self.d, self.components, int(N), self.xi[keep], self.coeffs[keep])

    def with_band(self, N: int) -> "SpectralField":
        """Same coefficients, declared band ``N`` (must cover the stored modes)."""
        return SpectralField(self.d, self.components, int(N), self.xi, self.coeffs)

    # norms and grids --------------------------------------------------------

    def sobolev_norm(self, s: float = 0.0) -> float:
        return sobolev_norm(self, s)

    def sample_on_grid(self, M: int) -> np.ndarray:
        return sample_on_grid(self, M)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "components": self.components,
            "N": self.N,
            "coeffs": [{"xi": [int(v) for v in k], "re": [float(z.real) for z in c], "im": [float(z.imag) for z in c]}
                       for k, c in zip(self.xi, self.coeffs)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SpectralField":
        try:
            d, comps, N = int(doc["d"]), int(doc["components"]), int(doc["N"])
            rows = doc.get("coeffs", [])
            xi = np.array([r["xi"] for r in rows], dtype=np.int64).reshape(-1, d)
            c = np.array([np.asarray(r["re"], float) + 1j * np.asarray(r["im"], float) for r in rows],
                         dtype=complex).reshape(-1, comps)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed field document: {exc}") from None
        return cls(d, comps, N, xi, c)


def _check_hermitian(keys: np.ndarray, c: np.ndarray, total: int) -> None:
    if keys.size == 0:
        return
    partner = total - keys
    j = np.searchsorted(keys, partner)
    j = np.minimum(j, keys.size - 1)
    scale = max(1.0, float(np.abs(c).max()))
    missing = keys[j] != partner
    if np.any(missing):
        bad = np.abs(c[missing]).max()
        if bad > HERMITIAN_RTOL * scale:
            raise HermitianViolation("coefficient present at xi but not at -xi")
    ok = ~missing
    dev = np.abs(c[ok] - np.conj(c[j[ok]])).max(initial=0.0)
    if dev > HERMITIAN_RTOL * scale:
        raise HermitianViolation(f"coefficients are not conjugate-symmetric (max deviation {dev:.3e})")


def sobolev_norm(field: SpectralField, s: float = 0.0) -> float:
    """((2 pi)^-d sum_xi |xi|^(2s) |u_hat(xi)|^2)^(1/2)."""
    if field.n_modes == 0:
        return 0.0
    w = field.xi_sq.astype(float) ** s
    tot = float(np.sum(w * np.sum(np.abs(field.coeffs) ** 2, axis=1)))
    return math.sqrt(tot / (2 * math.pi) ** field.d)


def subtract(a: SpectralField, b: SpectralField) -> SpectralField:
    return a - b


def grid_points(d: int, M: int) -> np.ndarray:
    """1-D node coordinates x_j = -pi + 2 pi j / M."""
    return -math.pi + 2 * math.pi * np.arange(M) / M


def _sign(xi: np.ndarray) -> np.ndarray:
    return np.where(xi.sum(axis=1) % 2 == 0, 1.0, -1.0)


def sample_on_grid(field: SpectralField, M: int) -> np.ndarray:
    """Real values at the uniform grid; shape (M,)*d, plus a trailing component axis for vectors."""
    if M < 2 * field.N + 2:
        raise AliasingRisk(f"{M} points per dimension cannot resolve band N={field.N} (need >= {2 * field.N + 2})")
    d, comps = field.d, field.components
    dense = np.zeros((comps,) + (M,) * d, complex)
    if field.n_modes:
        idx = tuple((field.xi % M).T)
        phase = _sign(field.xi)
        for k in range(comps):
            dense[k][idx] = field.coeffs[:, k] * phase
    vals = np.fft.ifftn(dense, axes=tuple(range(1, d + 1))) * (M ** d / (2 * math.pi) ** d)
    scale = max(1.0, float(np.abs(vals.real).max(initial=0.0)))
    if np.abs(vals.imag).max(initial=0.0) > REAL_TOL * scale:
        raise NonRealResult("grid values have a non-negligible imaginary part")
    out = np.moveaxis(vals.real, 0, -1)
    return out[..., 0] if comps == 1 else out


def grid_to_coeffs(samples, N: int, d: int | None = None) -> SpectralField:
    """Discrete Fourier analysis of real grid samples, scaled to the integral convention."""
    u = np.asarray(samples, dtype=float)
    if d is None:
        if u.ndim in (2, 3) and len(set(u.shape)) == 1:
            d = u.ndim
        elif u.ndim in (3, 4) and u.shape[-1] == u.ndim - 1:
            d = u.ndim - 1
        else:
            raise ShapeMismatch(f"cannot infer dimension from sample shape {u.shape}")
    vec = u.ndim == d + 1
    M = u.shape[0]
    if u.shape[:d] != (M,) * d:
        raise ShapeMismatch(f"samples must be on a cubic grid, got {u.shape}")
    if M < 2 * N + 2:
        raise AliasingRisk(f"{M} points per dimension cannot resolve band N={N}")
    comps = u.shape[-1] if vec else 1
    u = u.reshape((M,) * d + (comps,))
    U = np.fft.fftn(u, axes=tuple(range(d))) * (2 * math.pi / M) ** d
    scale = max(1.0, float(np.abs(U).max(initial=0.0)))
    if np.abs(U[(0,) * d]).max() > MEAN_TOL * scale:
        raise MeanNotZero("grid samples have a non-zero mean")
    xi = band_modes(d, N)
    c = U[tuple((xi % M).T)] * _sign(xi)[:, None]
    # symmetrize so the stored field is exactly conjugate-symmetric
    c = 0.5 * (c + np.conj(c[::-1]))
    return SpectralField(d, comps, N, xi, c)


def random_field(seed: int, N: int, decay_exponent: float, components: int = 1, d: int = 2,
                 amplitude: float | None = None) -> SpectralField:
    """Pseudo-random real field with |u_hat(xi)| = C |xi|^-decay exactly, C = (2 pi)^d by default.

    Each conjugate pair gets a uniform random phase and, for vectors, a
    random real unit direction.
    """
    if N < 1:
        raise DataError("random_field needs N >= 1")
    rng = np.random.default_rng(seed)
    C = (2 * math.pi) ** d if amplitude is None else float(amplitude)
    xi = half_modes(d, N)
    mag = C * np.sqrt(np.einsum("ij,ij->i", xi, xi).astype(float)) ** (-float(decay_exponent))
    phase = np.exp(2j * math.pi * rng.random(xi.shape[0]))
    if components == 1:
        dirs = np.ones((xi.shape[0], 1))
    else:
        dirs = rng.standard_normal((xi.shape[0], components))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return SpectralField.from_half(d, N, xi, (mag * phase)[:, None] * dirs)


def write_field_json(field: SpectralField, path, header: dict | None = None) -> None:
    doc = dict(header or {})
    doc.update(field.to_dict())
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_field_json(path) -> SpectralField:
    with open(path) as fh:
        return SpectralField.from_dict(json.load(fh))


def samples_csv(values: np.ndarray, d: int, names: list[str] | None = None) -> str:
    """One row per grid point in lexicographic (C) order: coordinates then values."""
    M = values.shape[0]
    x = grid_points(d, M)
    coords = np.stack([g.ravel() for g in np.meshgrid(*([x] * d), indexing="ij")], axis=1)
    vals = values.reshape(M ** d, -1)
    if names is None:
        names = ["u"] if vals.shape[1] == 1 else [f"u{k + 1}" for k in range(vals.shape[1])]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{k + 1}" for k in range(d)] + names)
    for row_x, row_v in zip(coords, vals):
        w.writerow([f"{v:.17g}" for v in row_x] + [f"{v:.17g}" for v in row_v])
    return buf.getvalue()
