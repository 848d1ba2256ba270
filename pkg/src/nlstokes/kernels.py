"""Radial kernel profiles, moment normalization and horizon rescaling.

A profile lives on the unit ball; :class:`KernelSet` bundles the four
kernels used by the nonlocal Stokes operators together with the horizon
``delta``.  Rescaled kernels are

    omega_delta(r)       = delta**-(d+2) * omega(r/delta)
    omega_hat_delta(r)   = delta**-(d+1) * omega_hat(r/delta)
    omega_tilde_delta(r) = delta**-(d+2) * omega_tilde(r/delta)
    omega_bar_delta(r)   = delta**-d     * omega_bar(r/delta)

which keeps every moment normalization invariant under rescaling.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np
from scipy.special import beta as beta_fn

from .errors import ConfigError, DivergentMoment, NormalizationError, ValidationError

NORMALIZATION_RTOL = 1e-10

FAMILIES = ("constant", "polynomial_bump", "fractional", "custom")
_ALIASES = {
    "const": "constant",
    "indicator": "constant",
    "bump": "polynomial_bump",
    "polynomialbump": "polynomial_bump",
    "fractional_truncated": "fractional",
    "fractionaltruncated": "fractional",
    "tabulated": "custom",
}


class Role(str, enum.Enum):
    DIFFUSION = "diffusion"
    GRADIENT = "gradient"
    RELAXATION = "relaxation"
    MOLLIFIER = "mollifier"


# (moment order k, target as a function of d, rescaling exponent as a function of d)
_ROLE_TABLE = {
    Role.DIFFUSION: (2, lambda d: 2.0 * d, lambda d: d + 2),
    Role.GRADIENT: (1, lambda d: float(d), lambda d: d + 1),
    Role.RELAXATION: (2, lambda d: float(d), lambda d: d + 2),
    Role.MOLLIFIER: (0, lambda d: 1.0, lambda d: d),
}

_ROLE_ATTR = {
    Role.DIFFUSION: "omega",
    Role.GRADIENT: "omega_hat",
    Role.RELAXATION: "omega_tilde",
    Role.MOLLIFIER: "omega_bar",
}


def canonical_family(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    key = _ALIASES.get(key.replace("_", ""), _ALIASES.get(key, key))
    if key not in FAMILIES:
        raise ConfigError(f"unknown kernel family {name!r}")
    return key


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def role_scaling_exponent(role: Role | str, d: int) -> int:
    return _ROLE_TABLE[Role(role)][2](d)


def role_moment_target(role: Role | str, d: int) -> tuple[int, float]:
    """(k, target) such that the normalized profile has M_k = target."""
    k, target, _ = _ROLE_TABLE[Role(role)]
    return k, target(d)


@dataclass(frozen=True)
class RadialKernelProfile:
    """Non-negative radial profile supported on the unit ball.

    ``family`` selects the shape:

    * ``constant``: 1 on [0, 1]
    * ``polynomial_bump``: (1 - r^2)^power
    * ``fractional``: r^-(d + 2 alpha), alpha in (0, 1)
    * ``custom``: piecewise-linear interpolation of (table_r, table_v)

    and ``amplitude`` multiplies it.  ``smoothness`` is the Sobolev index
    gamma used when the profile serves as a mollifier.
    """

    family: str
    d: int
    amplitude: float = 1.0
    alpha: float | None = None
    power: float = 2.0
    table_r: tuple[float, ...] = ()
    table_v: tuple[float, ...] = ()
    smoothness: float | None = None
    support_radius: float = field(default=1.0, init=False)

    def __post_init__(self):
        fam = canonical_family(self.family)
        object.__setattr__(self, "family", fam)
        if self.d not in (2, 3):
            raise ValidationError(f"dimension must be 2 or 3, got {self.d}")
        if not (self.amplitude >= 0.0 and math.isfinite(self.amplitude)):
            raise ValidationError(f"amplitude must be finite and non-negative, got {self.amplitude}")
        if fam == "fractional":
            if self.alpha is None or not (0.0 < self.alpha < 1.0):
                raise ValidationError(f"fractional profile needs alpha in (0,1), got {self.alpha}")
        elif self.alpha is not None:
            raise ValidationError("alpha is only meaningful for the fractional family")
        if fam == "polynomial_bump" and not self.power > 0:
            raise ValidationError("polynomial_bump power must be positive")
        if fam == "custom":
            r = np.asarray(self.table_r, dtype=float)
            v = np.asarray(self.table_v, dtype=float)
            if r.ndim != 1 or r.size < 2 or r.shape != v.shape:
                raise ValidationError("custom profile needs matching table_r/table_v of length >= 2")
            if r[0] != 0.0 or r[-1] > 1.0 or np.any(np.diff(r) <= 0):
                raise ValidationError("custom table_r must start at 0, increase strictly and end <= 1")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValidationError("custom table values must be finite and non-negative")
            object.__setattr__(self, "table_r", tuple(float(x) for x in r))
            object.__setattr__(self, "table_v", tuple(float(x) for x in v))
        if self.smoothness is None:
            object.__setattr__(self, "smoothness", _default_smoothness(self))

    @property
    def is_bounded(self) -> bool:
        return self.family != "fractional"

    @property
    def singular_exponent(self) -> float | None:
        return None if self.alpha is None else self.d + 2.0 * self.alpha

    def shape(self, r):
        r = np.asarray(r, dtype=float)
        inside = (r >= 0) & (r <= 1.0)
        if self.family == "constant":
            out = np.ones_like(r)
        elif self.family == "polynomial_bump":
            out = np.clip(1.0 - r * r, 0.0, None) ** self.power
        elif self.family == "fractional":
            with np.errstate(divide="ignore"):
                out = np.where(r > 0, r ** -(self.d + 2.0 * self.alpha), np.inf)
        else:
            out = np.interp(r, self.table_r, self.table_v, right=0.0)
        return np.where(inside, out, 0.0)

    def __call__(self, r):
        return self.amplitude * self.shape(r)

    def with_amplitude(self, amplitude: float) -> "RadialKernelProfile":
        return replace(self, amplitude=float(amplitude))

    def moment(self, k: int) -> float:
        return compute_moment(self, k)

    def params(self) -> dict[str, Any]:
        p: dict[str, Any] = {"amplitude": self.amplitude}
        if self.family == "fractional":
            p["alpha"] = self.alpha
        if self.family == "polynomial_bump":
            p["power"] = self.power
        if self.family == "custom":
            p["r"] = list(self.table_r)
            p["values"] = list(self.table_v)
        p["gamma"] = self.smoothness
        return p

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "params": self.params()}


def _default_smoothness(p: RadialKernelProfile) -> float:
    # An indicator-like jump at r = 1 puts the profile in H^s for s < 1/2;
    # (1 - r^2)^power vanishes like (1 - r)^power, gaining `power` orders.
    if p.family == "polynomial_bump":
        return p.power + 0.49
    if p.family == "custom":
        return 0.49 if p.table_v[-1] > 0 or p.table_r[-1] < 1.0 else 1.49
    if p.family == "fractional":
        return 0.0
    return 0.49


def compute_moment(profile: RadialKernelProfile, k: int, d: int | None = None) -> float:
    """Integral of ``profile(|x|) |x|^k`` over the unit ball of R^d.

    Closed forms for every family; the piecewise-linear custom profile is
    integrated exactly segment by segment.
    """
    d = profile.d if d is None else d
    if d != profile.d:
        raise ValidationError(f"profile built for d={profile.d}, moment requested for d={d}")
    if k < 0:
        raise ValidationError("moment order must be >= 0")
    A = profile.amplitude
    S = sphere_area(d)
    n = k + d - 1  # radial power after the polar Jacobian
    fam = profile.family
    if fam == "fractional":
        expo = n - (d + 2.0 * profile.alpha)
        if expo <= -1.0:
            raise DivergentMoment(
                f"moment k={k} diverges for fractional alpha={profile.alpha} (needs k > 2*alpha)")
        return A * S / (expo + 1.0)
    if A == 0.0:
        return 0.0
    if fam == "constant":
        return A * S / (n + 1)
    if fam == "polynomial_bump":
        return A * S * 0.5 * float(beta_fn((n + 1) / 2.0, profile.power + 1.0))
    r = np.asarray(profile.table_r)
    v = np.asarray(profile.table_v)
    slope = np.diff(v) / np.diff(r)
    c0 = v[:-1] - slope * r[:-1]
    a, b = r[:-1], r[1:]
    seg = c0 * (b ** (n + 1) - a ** (n + 1)) / (n + 1) + slope * (b ** (n + 2) - a ** (n + 2)) / (n + 2)
    return A * S * float(seg.sum())


def make_profile(family: str, d: int, **params) -> RadialKernelProfile:
    fam = canonical_family(family)
    kw: dict[str, Any] = {"family": fam, "d": d, "amplitude": float(params.pop("amplitude", 1.0))}
    if "alpha" in params:
        kw["alpha"] = float(params.pop("alpha"))
    if "power" in params:
        kw["power"] = float(params.pop("power"))
    if "r" in params or "values" in params:
        kw["table_r"] = tuple(params.pop("r"))
        kw["table_v"] = tuple(params.pop("values"))
    if "gamma" in params:
        g = params.pop("gamma")
        kw["smoothness"] = None if g is None else float(g)
    if params:
        raise ConfigError(f"unknown profile parameters {sorted(params)}")
    return RadialKernelProfile(**kw)


def normalize(family: str | RadialKernelProfile, d: int, role: Role | str, **params) -> RadialKernelProfile:
    """Return the profile of ``family`` with amplitude fixed by the role's moment target.

    Diffusion: M_2 = 2d.  Gradient: M_1 = d.  Relaxation: M_2 = d.  Mollifier: M_0 = 1.
    """
    role = Role(role)
    if isinstance(family, RadialKernelProfile):
        base = family.with_amplitude(1.0)
    else:
        params.pop("amplitude", None)
        base = make_profile(family, d, **params)
    if role is Role.MOLLIFIER and not base.is_bounded:
        raise DivergentMoment("a mollifier profile must be bounded")
    k, target = role_moment_target(role, d)
    mom = compute_moment(base, k, d)
    if mom <= 0:
        raise ValidationError(f"{base.family} profile has vanishing moment M_{k}; cannot normalize")
    return base.with_amplitude(target / mom)


@dataclass(frozen=True)
class KernelSet:
    """The four rescaled kernels plus horizon and dimension.

    ``m`` and ``M`` bound the dimension-normalized second moment of the
    relaxation kernel, ``(1/(2d)) * M_2(omega_tilde)``; that is the quantity
    entering the relaxation symbol exactly as ``(1/(2d)) * M_2(omega) = 1``
    enters the diffusion symbol.
    """

    d: int
    delta: float
    omega: RadialKernelProfile
    omega_hat: RadialKernelProfile
    omega_tilde: RadialKernelProfile
    omega_bar: RadialKernelProfile | None = None
    m: float | None = None
    M: float | None = None
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValidationError(f"dimension must be 2 or 3, got {self.d}")
        if not (0.0 < self.delta < 1.0):
            raise ValidationError(f"delta must lie in (0,1), got {self.delta}")
        for role in Role:
            prof = getattr(self, _ROLE_ATTR[role])
            if prof is None:
                continue
            if prof.d != self.d:
                raise ValidationError(f"{role.value} profile built for d={prof.d}, kernel set has d={self.d}")
            if role is Role.MOLLIFIER and not prof.is_bounded:
                raise DivergentMoment("a mollifier profile must be bounded")
            k, _ = role_moment_target(role, self.d)
            compute_moment(prof, k)  # raises DivergentMoment when infinite
        mu = self.relaxation_moment / (2.0 * self.d)
        if self.m is None:
            object.__setattr__(self, "m", mu)
        if self.M is None:
            object.__setattr__(self, "M", mu)
        if self.strict:
            self.check_normalization()

    @property
    def relaxation_moment(self) -> float:
        return compute_moment(self.omega_tilde, 2)

    @property
    def gamma(self) -> float | None:
        return None if self.omega_bar is None else self.omega_bar.smoothness

    def profile(self, role: Role | str) -> RadialKernelProfile | None:
        return getattr(self, _ROLE_ATTR[Role(role)])

    def normalization_residuals(self) -> dict[str, float]:
        """Relative deviation of each moment from its normalization target."""
        out = {}
        for role in Role:
            prof = self.profile(role)
            if prof is None or role is Role.RELAXATION:
                continue
            k, target = role_moment_target(role, self.d)
            out[role.value] = abs(compute_moment(prof, k) - target) / target
        return out

    def check_normalization(self) -> None:
        for name, err in self.normalization_residuals().items():
            if not err <= NORMALIZATION_RTOL:
                raise NormalizationError(f"{name} kernel violates its moment normalization (rel. error {err:.3e})")
        mu = self.relaxation_moment / (2.0 * self.d)
        if not (0.0 < self.m <= self.M):
            raise NormalizationError(f"relaxation bounds need 0 < m <= M, got m={self.m}, M={self.M}")
        slack = NORMALIZATION_RTOL * max(1.0, mu)
        if not (self.m - slack <= mu <= self.M + slack):
            raise NormalizationError(f"relaxation moment {mu} outside [m, M] = [{self.m}, {self.M}]")

    def with_delta(self, delta: float) -> "KernelSet":
        return replace(self, delta=float(delta))

    def to_dict(self) -> dict[str, Any]:
        kernels = {attr: self.profile(role).to_dict()
                   for role, attr in _ROLE_ATTR.items() if self.profile(role) is not None}
        return {"d": self.d, "delta": self.delta, "m": self.m, "M": self.M, "kernels": kernels}

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], strict: bool = True) -> "KernelSet":
        try:
            d = int(doc["d"])
            delta = float(doc["delta"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"kernel set document needs numeric 'd' and 'delta': {exc}") from None
        specs = dict(doc.get("kernels", {}))
        return build_kernel_set(d, delta, strict=strict, m=doc.get("m"), M=doc.get("M"), **specs)


def _profile_from_spec(spec, d: int, role: Role) -> RadialKernelProfile:
    """Spec is a family name or {"family": ..., "params": {...}}.

    Without an explicit amplitude the profile is normalized for its role;
    an explicit amplitude is taken verbatim (and then validated by the set).
    """
    if isinstance(spec, RadialKernelProfile):
        return spec
    if isinstance(spec, str):
        return normalize(spec, d, role)
    if not isinstance(spec, Mapping) or "family" not in spec:
        raise ConfigError(f"bad kernel spec for {role.value}: {spec!r}")
    params = dict(spec.get("params", {}))
    if params.get("amplitude") is not None:
        return make_profile(spec["family"], d, **params)
    params.pop("amplitude", None)
    return normalize(spec["family"], d, role, **params)


def build_kernel_set(d: int, delta: float, omega="constant", omega_hat="constant",
                     omega_tilde="constant", omega_bar="constant", *, strict: bool = True,
                     m: float | None = None, M: float | None = None) -> KernelSet:
    """Assemble a KernelSet from family names or spec dicts (``omega_bar=None`` drops the mollifier)."""
    return KernelSet(
        d=d,
        delta=float(delta),
        omega=_profile_from_spec(omega, d, Role.DIFFUSION),
        omega_hat=_profile_from_spec(omega_hat, d, Role.GRADIENT),
        omega_tilde=_profile_from_spec(omega_tilde, d, Role.RELAXATION),
        omega_bar=None if omega_bar is None else _profile_from_spec(omega_bar, d, Role.MOLLIFIER),
        m=None if m is None else float(m),
        M=None if M is None else float(M),
        strict=strict,
    )


PRESETS = ("constant", "polynomial_bump", "fractional")


def preset(name: str, d: int, delta: float, alpha: float = 0.5) -> KernelSet:
    """Named kernel sets used throughout the test and sweep harness.

    ``fractional`` swaps only the diffusion kernel for r^-(d+2 alpha); the
    gradient kernel needs a finite first moment, which alpha >= 1/2 forbids.
    """
    name = canonical_family(name)
    if name == "fractional":
        return build_kernel_set(d, delta, omega={"family": "fractional", "params": {"alpha": alpha}})
    if name not in PRESETS:
        raise ConfigError(f"no preset kernel set named {name!r}")
    return build_kernel_set(d, delta, name, name, name, name)


def rescale_evaluate(kernels: KernelSet, role: Role | str, r) -> np.ndarray | float:
    """delta-rescaled kernel value at distance ``r`` (zero outside the horizon)."""
    role = Role(role)
    prof = kernels.profile(role)
    if prof is None:
        raise ValidationError(f"kernel set has no {role.value} kernel")
    delta = kernels.delta
    scale = delta ** -role_scaling_exponent(role, kernels.d)
    r_arr = np.asarray(r, dtype=float)
    out = scale * prof(r_arr / delta)
    out = np.where(r_arr > delta, 0.0, out)
    return float(out) if out.ndim == 0 else out
