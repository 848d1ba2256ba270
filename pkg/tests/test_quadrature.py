import math

import numpy as np
import pytest

from nlstokes.errors import DivergentMoment, QuadratureFailure
from nlstokes.kernels import make_profile, normalize
from nlstokes.quadrature import KIND_COS, KIND_SIN, angular_rule, radial_transform

from oracles import radial_oracle, w_cos, w_sin

PROFILES = [
    ("constant", {}),
    ("polynomial_bump", {}),
    ("polynomial_bump", {"power": 2.5}),
    ("custom", {"r": [0.0, 0.25, 0.6, 1.0], "values": [2.0, 1.0, 0.5, 0.25]}),
    ("fractional", {"alpha": 0.3}),
    ("fractional", {"alpha": 0.75}),
]
A_VALUES = [0.0, 1e-4, 0.05, 0.5, 1.0, 3.7, 12.0, 80.0]


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("x", [1e-3, 0.09, 0.11, 1.0, 7.5, 40.0])
def test_angular_rule_matches_closed_form(d, x):
    t, w, pref = angular_rule(d, x)
    assert pref * np.sum(w * (1 - np.cos(x * t))) == pytest.approx(w_cos(d, x), rel=1e-12)
    assert pref * np.sum(w * t * np.sin(x * t)) == pytest.approx(w_sin(d, x), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("kind", [KIND_COS, KIND_SIN])
@pytest.mark.parametrize("family, params", PROFILES)
def test_radial_transform_vs_oracle(backend, d, kind, family, params):
    prof = make_profile(family, d, amplitude=1.3, **params)
    if family == "fractional" and kind == KIND_SIN and prof.alpha >= 0.5:
        with pytest.raises(DivergentMoment):
            radial_transform(prof, kind, A_VALUES, backend=backend)
        return
    vals, errs, panels = radial_transform(prof, kind, A_VALUES, backend=backend)
    for a, v, e in zip(A_VALUES, vals, errs):
        ref = radial_oracle(prof, kind, a)
        assert v == pytest.approx(ref, rel=1e-10, abs=1e-14 * max(1.0, abs(ref)))
        assert e >= 0
    assert vals[0] == 0.0


@pytest.mark.parametrize("d", [2, 3])
def test_backends_agree(d):
    from nlstokes.quadrature import available_backends
    if len(available_backends()) < 2:
        pytest.skip("compiled backend not built")
    prof = normalize("polynomial_bump", d, "diffusion")
    a = np.linspace(0, 60, 41)
    v1 = radial_transform(prof, KIND_COS, a, backend="compiled")[0]
    v2 = radial_transform(prof, KIND_COS, a, backend="python")[0]
    np.testing.assert_allclose(v1, v2, rtol=1e-13, atol=1e-15)


def test_small_argument_series(backend):
    # R_cos(a) ~ a^2 M_2 / (2d): the second moment enters with 1/(2d) of the sphere average
    d = 3
    prof = normalize("constant", d, "diffusion")
    a = 1e-3
    val = radial_transform(prof, KIND_COS, [a], backend=backend)[0][0]
    assert val == pytest.approx(a * a * 2 * d / (2 * d), rel=1e-6)


def test_zero_amplitude_short_circuit(backend):
    prof = make_profile("constant", 2, amplitude=0.0)
    vals, errs, panels = radial_transform(prof, KIND_COS, [1.0, 2.0], backend=backend)
    assert np.all(vals == 0) and np.all(panels == 0)


def test_panel_budget(backend):
    # the (1 - r^2)^0.49 edge forces refinement near r = 1
    prof = make_profile("polynomial_bump", 2, amplitude=1.0, power=0.49)
    with pytest.raises(QuadratureFailure):
        radial_transform(prof, KIND_COS, [3.0], max_panels=4, backend=backend)
    vals, _, panels = radial_transform(prof, KIND_COS, [3.0], backend=backend)
    assert panels[0] > 4
    assert vals[0] == pytest.approx(radial_oracle(prof, KIND_COS, 3.0), rel=1e-10)


def test_unknown_backend():
    prof = make_profile("constant", 2)
    with pytest.raises((RuntimeError, ValueError)):
        radial_transform(prof, KIND_COS, [1.0], backend="fortran")
