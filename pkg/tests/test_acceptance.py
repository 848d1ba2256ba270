"""Acceptance suite: one group of tests per numbered criterion.

A per-criterion PASS/FAIL line is printed in the terminal summary (see
conftest.py) and, for each test, on stdout (visible with ``-s``).
"""
import math
import time

import numpy as np
import pytest

from nlstokes.fields import SpectralField, grid_to_coeffs, random_field, sample_on_grid, sobolev_norm
from nlstokes.kernels import preset
from nlstokes.lab import SLOPE_WINDOW, ac_diagram, band_sweep, delta_sweep, make_case
from nlstokes.solver import assemble_mode_matrix, invert_mode_matrix
from nlstokes.symbols import SymbolTable, certify_bounds, lattice_norms_sq

from oracles import lu_inverse, symbol_oracle

DELTAS = (0.2, 0.1, 0.05, 0.025)
BAND = {2: 32, 3: 16}
MIN_R2 = 0.98


def report(k, ok, detail):
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}")


def in_window(rate):
    return rate is not None and SLOPE_WINDOW[0] <= rate <= SLOPE_WINDOW[1]


_sweeps = {}


def sweep(case_name, d, family="constant", variant="nonlocal", **case_kw):
    key = (case_name, d, family, variant, tuple(sorted(case_kw.items())))
    if key not in _sweeps:
        case = make_case(case_name, d, **case_kw)
        t0 = time.perf_counter()
        rep = delta_sweep(case, preset(family, d, 0.1), DELTAS, BAND[d], variant)
        rep.meta["seconds"] = time.perf_counter() - t0
        _sweeps[key] = rep
    return _sweeps[key]


@pytest.mark.criterion(1)
@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("case", ["single-mode-shear", "random"])
def test_c1_velocity_rate(d, case):
    rep = sweep(case, d)
    rate, r2 = rep.rate("u_L2"), rep.fitted["u_L2"][2]
    ok = in_window(rate) and r2 >= MIN_R2 and rep.meta["seconds"] < 60
    report(1, ok, f"d={d} {case}: slope {rate:.4f} R2 {r2:.6f} ({rep.meta['seconds']:.2f}s)")
    assert ok


@pytest.mark.criterion(2)
@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("case", ["single-mode-shear", "random", "with-divergence-data"])
def test_c2_pressure_rate(d, case):
    rep = sweep(case, d)
    if case == "single-mode-shear":
        # the shear flow has p_delta = 0 exactly, so the error series is identically zero
        ok = bool(rep.exact.get("p_L2"))
        report(2, ok, f"d={d} {case}: pressure error zero to round-off")
    else:
        rate, r2 = rep.rate("p_L2"), rep.fitted["p_L2"][2]
        ok = in_window(rate) and r2 >= MIN_R2
        report(2, ok, f"d={d} {case}: p slope {rate:.4f} R2 {r2:.6f}")
    assert ok


@pytest.mark.criterion(3)
@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("family", ["constant", "polynomial_bump", "fractional"])
def test_c3_symbol_bounds(d, family):
    rep = certify_bounds(preset(family, d, 0.1, alpha=0.5), 64, deltas=[0.05, 0.1, 0.5])
    q_ok = all(r["margin"] > 0 for r in rep.rows if r["check_name"] == "q_positive")
    ok = rep.passed and q_ok and len(rep.rows) > 0
    worst = min(rep.worst_margins().values())
    report(3, ok, f"d={d} {family}: {len(rep.rows)} checks, {len(rep.failures())} failures, worst margin {worst:.3e}")
    assert ok, rep.failures()[:5]


@pytest.mark.criterion(4)
@pytest.mark.parametrize("d", [2, 3])
def test_c4_inverse_vs_lu(d):
    rng = np.random.default_rng(2024 + d)
    families = ["constant", "polynomial_bump", "fractional"]
    tables = {}
    dev = ident = 0.0
    for _ in range(1000):
        fam = families[rng.integers(3)]
        delta = float(rng.choice([0.025, 0.05, 0.1, 0.2, 0.5]))
        xi = rng.integers(-16, 17, size=d)
        if not xi.any():
            xi[0] = 1
        key = (fam, delta)
        if key not in tables:
            tables[key] = SymbolTable(preset(fam, d, delta))
        sym = tables[key].get(int(xi @ xi))
        A = assemble_mode_matrix(sym, xi, delta)
        B = invert_mode_matrix(sym, xi, delta)
        dev = max(dev, np.abs(B - lu_inverse(A)).max())
        ident = max(ident, np.abs(A @ B - np.eye(d + 1)).max())
    ok = dev < 1e-12 and ident < 1e-12
    report(4, ok, f"d={d}: max |B - LU^-1| {dev:.2e}, max |AB - I| {ident:.2e}")
    assert ok


@pytest.mark.criterion(5)
@pytest.mark.parametrize("family", ["constant", "polynomial_bump", "fractional"])
def test_c5_quadrature_oracle(family):
    rng = np.random.default_rng(5)
    worst = 0.0
    for k in range(20):
        d = 2 + k % 2
        delta = float(rng.choice([0.025, 0.05, 0.1, 0.2, 0.5]))
        xi_sq = int(rng.choice(lattice_norms_sq(d, 64)))
        ks = preset(family, d, delta)
        got = SymbolTable(ks).get(xi_sq)
        ref = symbol_oracle(ks, math.sqrt(xi_sq))
        for a, b in zip((got.lam, got.b, got.c, got.d_moll), ref):
            worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    ok = worst < 1e-9
    report(5, ok, f"{family}: max relative deviation {worst:.2e} over 20 (delta, |xi|) points")
    assert ok


@pytest.mark.criterion(6)
@pytest.mark.parametrize("family", ["constant", "polynomial_bump"])
def test_c6_mollifier_bounds(family):
    rep = certify_bounds(preset(family, 3, 0.1), 64, deltas=[0.05, 0.1, 0.5])
    rows = [r for r in rep.rows if r["check_name"] in ("d_low_upper", "d_upper")]
    # re-check the stated constants directly rather than through the report's bound column
    ok = bool(rows)
    for r in rows:
        a2 = r["delta"] ** 2 * r["xi_sq"]
        if a2 < 1:
            ok &= r["d_moll"] <= a2 / 6 + 1e-8
        ok &= r["d_moll"] <= 2 + 1e-8
    report(6, ok, f"d=3 {family}: {len(rows)} mollifier checks")
    assert ok


@pytest.mark.criterion(7)
@pytest.mark.parametrize("d", [2, 3])
def test_c7_mollified_rate(d):
    rep = sweep("random", d, variant="mollified")
    gamma = preset("constant", d, 0.1).gamma
    name = "u_H%g" % gamma
    target = min(2.0, 2.0 - gamma + 1.0)
    rate, r2 = rep.rate(name), rep.fitted[name][2]
    ok = abs(rate - target) <= 0.2 and r2 >= MIN_R2
    report(7, ok, f"d={d}: H^{gamma} slope {rate:.4f} (target {target})")
    assert ok


@pytest.mark.criterion(8)
@pytest.mark.parametrize("d", [2, 3])
def test_c8_fractional_pickup(d):
    case = make_case("random-decaying", d, decay=d / 2 + 0.01, master_band=BAND[d])
    rep = delta_sweep(case, preset("fractional", d, 0.1, alpha=0.5), DELTAS, BAND[d], "fractional")
    ratio = dict(zip(rep.params(), rep.values("pickup_ratio")))
    q = ratio[0.025] / ratio[0.2]
    ok = 0.5 <= q <= 2.0 and all(np.isfinite(list(ratio.values())))
    report(8, ok, f"d={d}: ratio {ratio[0.2]:.4f} at delta=0.2, {ratio[0.025]:.4f} at delta=0.025")
    assert ok


@pytest.mark.criterion(9)
def test_c9_corner_i():
    case = make_case("random-decaying", 2, master_band=128)
    ac = ac_diagram(case, preset("constant", 2, 0.1), DELTAS, (4, 8, 16, 32), N_fixed=16, delta_fixed=0.1)
    s = ac.summary()
    ok = s["checks"]["corner_i_slope"]["pass"]
    report(9, ok, f"corner (i) slope {s['checks']['corner_i_slope']['rate']:.4f}")
    assert ok
    ok = s["checks"]["diagonal_converges"]["pass"] and s["checks"]["triangle"]["pass"]
    report(9, ok, "diagonal refinement converges and satisfies the triangle bound")
    assert ok


@pytest.mark.criterion(9)
@pytest.mark.parametrize("d", [2, 3])
def test_c9_band_rate(d):
    case = make_case("random-decaying", d, master_band=64 if d == 2 else 32)
    Ns = (4, 8, 16) if d == 3 else (4, 8, 16, 32)
    rep = band_sweep(case, preset("constant", d, 0.1), None, Ns)
    rate = rep.rate("u_L2")
    ok = rate >= 2.0
    report(9, ok, f"d={d}: N-sweep rate {rate:.4f}")
    assert ok


@pytest.mark.criterion(9)
@pytest.mark.parametrize("d", [2, 3])
def test_c9_band_limited_exact(d):
    case = make_case("random", d)
    rep = band_sweep(case, preset("constant", d, 0.1), None, (case.N, case.N + 2, case.N + 4))
    errs = rep.values("u_L2") + rep.values("p_L2")
    ok = max(errs) == 0.0
    report(9, ok, f"d={d}: truncation error once N covers the band: {max(errs):.1e}")
    assert ok


@pytest.mark.criterion(10)
@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("family", ["constant", "polynomial_bump", "fractional"])
def test_c10_stability(d, family):
    rep = sweep("random", d, family=family)
    r = rep.values("stability_ratio")
    ok = max(r) / min(r) < 2.0
    report(10, ok, f"d={d} {family}: stability ratio in [{min(r):.4f}, {max(r):.4f}]")
    assert ok


@pytest.mark.criterion(11)
@pytest.mark.parametrize("d", [2, 3])
def test_c11_transforms(d):
    f = random_field(11, 6 if d == 2 else 4, 1.0, components=d, d=d)
    M = 2 * f.N + 4
    vals = sample_on_grid(f, M)
    back = grid_to_coeffs(vals, f.N, d)
    rt = np.abs(back.coeffs - f.coeffs).max() / f.max_abs()
    l2 = math.sqrt(np.sum(vals ** 2) * (2 * math.pi / M) ** d)
    pl = abs(l2 - sobolev_norm(f)) / sobolev_norm(f)
    ok = rt < 1e-12 and pl < 1e-10
    report(11, ok, f"d={d}: round trip {rt:.1e}, Plancherel {pl:.1e}")
    assert ok


@pytest.mark.criterion(11)
def test_c11_sine_norm():
    amp = (2 * math.pi) ** 3 / 2
    s = SpectralField.from_modes(3, 1, {(0, 1, 0): -1j * amp, (0, -1, 0): 1j * amp})
    err = abs(sobolev_norm(s) - 2 * math.pi ** 1.5)
    vals = sample_on_grid(s, 8)
    x = -math.pi + 2 * math.pi * np.arange(8) / 8
    err_grid = np.abs(vals - np.sin(x)[None, :, None]).max()
    ok = err < 1e-12 and err_grid < 1e-12
    report(11, ok, f"|sin x2| = {sobolev_norm(s):.15f} vs 2 pi^1.5 = {2 * math.pi ** 1.5:.15f}")
    assert ok
