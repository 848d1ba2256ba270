import math

import numpy as np
import pytest

from nlstokes.errors import MissingMollifier, ValidationError
from nlstokes.kernels import build_kernel_set, preset, rescale_evaluate
from nlstokes.symbols import (BoundReport, REPORT_COLUMNS, SymbolTable, b_symbol, c_symbol, certify_bounds,
                              d_symbol, lambda_symbol, lattice_norms_sq, symbol_table)

from oracles import nested_symbol, symbol_oracle


@pytest.fixture(scope="module")
def const2():
    return SymbolTable(preset("constant", 2, 0.1))


def test_small_delta_values(const2):
    lam = lambda_symbol(const2, 1.0)
    assert 0.9995 <= lam <= 1.0
    assert 0.999 <= b_symbol(const2, 1.0) <= 1.0
    ks = const2.kernels
    assert ks.m / 2 <= c_symbol(const2, 1.0) <= ks.M


def test_mollifier_values(const2):
    assert 0.0 <= d_symbol(const2, 5.0) <= 0.25 / 6 + 1e-12
    tab = SymbolTable(preset("constant", 2, 0.5))
    assert 0.0 <= d_symbol(tab, 10.0) <= 2.0


def test_missing_mollifier():
    tab = SymbolTable(build_kernel_set(2, 0.1, omega_bar=None))
    with pytest.raises(MissingMollifier):
        d_symbol(tab, 1.0)
    assert tab.arrays([1, 2])[3] is None


def test_non_lattice_norm(const2):
    with pytest.raises(ValidationError):
        lambda_symbol(const2, 1.5)
    with pytest.raises(ValidationError):
        lambda_symbol(const2, -1.0)
    assert lambda_symbol(const2, math.sqrt(5)) == const2.get(5).lam


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("family", ["constant", "polynomial_bump", "fractional"])
@pytest.mark.parametrize("delta", [0.5, 0.1])
@pytest.mark.parametrize("xi_sq", [1, 2, 9, 50, 400, 2500])
def test_symbols_vs_radial_oracle(d, family, delta, xi_sq):
    ks = preset(family, d, delta, alpha=0.4)
    tab = SymbolTable(ks)
    got = tab.get(xi_sq)
    lam, b, c, dm = symbol_oracle(ks, math.sqrt(xi_sq))
    assert got.lam == pytest.approx(lam, rel=1e-10)
    assert got.b == pytest.approx(b, rel=1e-10)
    assert got.c == pytest.approx(c, rel=1e-10)
    assert got.d_moll == pytest.approx(dm, rel=1e-10)
    assert got.quadrature_error_estimate < 1e-8 * max(1.0, got.lam)


def test_diffusion_symbol_from_polar_definition():
    ks = preset("constant", 3, 0.5)
    lam = SymbolTable(ks).get(16).lam
    ref = nested_symbol(lambda r: rescale_evaluate(ks, "diffusion", r), 3, 0.5, 4.0, 0)
    assert lam == pytest.approx(ref, rel=1e-10)
    assert lam >= 0.25


@pytest.mark.parametrize("d, delta, xi", [(2, 0.5, 2.0), (3, 0.2, 3.0), (2, 0.1, 7.0)])
@pytest.mark.parametrize("role, kind", [("gradient", 1), ("relaxation", 0)])
def test_symbols_from_polar_definition(d, delta, xi, role, kind):
    ks = preset("polynomial_bump", d, delta)
    got = SymbolTable(ks).get(int(round(xi * xi)))
    ref = nested_symbol(lambda r: rescale_evaluate(ks, role, r), d, delta, xi, kind)
    assert (got.b if kind == 1 else got.c) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("d", [2, 3])
def test_small_argument_limit(d):
    # lambda -> |xi|^2, b -> |xi|, c -> |xi|^2 / 2 as delta|xi| -> 0
    tab = SymbolTable(preset("polynomial_bump", d, 1e-3))
    s = tab.get(4)
    assert s.lam == pytest.approx(4.0, rel=1e-6)
    assert s.b == pytest.approx(2.0, rel=1e-6)
    assert s.c == pytest.approx(2.0, rel=1e-6)
    assert s.q(1e-3) > 0


def test_table_cache_and_sharing():
    ks = preset("constant", 2, 0.2)
    assert symbol_table(ks) is symbol_table(ks)
    tab = SymbolTable(ks)
    tab.prepare([1, 4, 4, 9])
    assert len(tab) == 3
    lam, b, c, dm = tab.arrays(np.array([9, 1, 9]))
    assert lam[0] == lam[2] and lam[1] < lam[0]
    with pytest.raises(ValidationError):
        tab.prepare([-1])


@pytest.mark.parametrize("d, xi_max, expected", [
    (2, 2, [1, 2, 4]),
    (3, 2, [1, 2, 3, 4]),
    (2, 0, []),
])
def test_lattice_norms(d, xi_max, expected):
    assert list(lattice_norms_sq(d, xi_max)) == expected


def test_lattice_norms_exclude_non_sums():
    # 3 is not a sum of two squares, 7 is not a sum of three
    assert 3 not in lattice_norms_sq(2, 5)
    assert 7 not in lattice_norms_sq(3, 5)


def test_empty_report():
    rep = certify_bounds(preset("constant", 2, 0.1), 0)
    assert isinstance(rep, BoundReport) and rep.rows == [] and rep.passed


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("family", ["constant", "polynomial_bump", "fractional"])
def test_bounds_certified(d, family):
    rep = certify_bounds(preset(family, d, 0.1), 40, deltas=[0.05, 0.1, 0.5])
    assert rep.passed, rep.failures()[:3]
    names = set(rep.checks())
    assert {"lambda_upper", "c_upper", "q_positive", "lambda_high_lower", "lambda_low_lower",
            "b_low_lower", "b_upper", "d_upper", "d_lower", "d_low_upper"} <= names
    assert ("fractional_growth" in names) == (family == "fractional")
    assert min(rep.worst_margins().values()) > -1e-8


def test_fractional_growth_margin():
    rep = certify_bounds(preset("fractional", 2, 0.1), 64)
    rows = [r for r in rep.rows if r["check_name"] == "fractional_growth"]
    assert rows and all(r["margin"] > 0 for r in rows)
    # past the horizon scale lambda keeps growing, unlike the integrable kernels
    lam = [r["lambda"] for r in rows]
    assert lam[-1] > 4 * lam[0]


def test_corrupted_kernel_is_reported():
    ks = build_kernel_set(2, 0.1, omega={"family": "constant", "params": {"amplitude": 3.0}}, strict=False)
    rep = certify_bounds(ks, 20)
    assert not rep.passed
    assert {r["check_name"] for r in rep.failures()} >= {"lambda_upper"}


def test_report_csv(tmp_path):
    rep = certify_bounds(preset("constant", 2, 0.5), 3)
    text = rep.to_csv(tmp_path / "r.csv")
    lines = text.splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS)
    assert len(lines) == len(rep.rows) + 1
    assert (tmp_path / "r.csv").read_text() == text
    assert lines[1].split(",")[-1] in ("true", "false")
