import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corr1d.core import (ScatterResult, WaveguideParams, eta, polarizability, reflection_phase,
                         single_atom_power, single_atom_scatter)

from oracles import single_atom_r, single_atom_t

ratios = st.floats(0.0, 1.0)
detunings = st.floats(-50.0, 50.0)
scales = st.floats(0.01, 100.0)


def test_eta_lossless_resonance():
    p = WaveguideParams(gamma_w=1.0)
    assert eta(p, 0.0) == -1.0


def test_polarizability_decays_monotonically():
    p = WaveguideParams.from_ratio(0.3)
    mags = np.abs(polarizability(p, np.linspace(0, 1e3, 200)))
    assert np.all(np.diff(mags) < 0)
    assert mags[-1] < 1e-3


def test_eta_polarizability_identity_random():
    rng = np.random.default_rng(11)
    for _ in range(100):
        gt = rng.uniform(0.1, 10)
        p = WaveguideParams(gamma_w=rng.uniform(0, gt), gamma_l=0.0, k=rng.uniform(0.5, 2))
        p = WaveguideParams(gamma_w=p.gamma_w, gamma_l=gt - p.gamma_w, k=p.k)
        d = rng.uniform(-20, 20)
        assert abs(eta(p, d) - 1j * polarizability(p, d) * p.k / 2) < 1e-12


def test_single_atom_examples():
    p = WaveguideParams(gamma_w=1.0)
    s = single_atom_scatter(p, 0.0)
    assert s.t == 0 and s.r == -1
    s = single_atom_scatter(p, 1.0)
    assert abs(s.t - (0.5 - 0.5j)) < 1e-15
    assert abs(s.r - (-0.5 - 0.5j)) < 1e-15
    assert s.T == pytest.approx(0.5) and s.R == pytest.approx(0.5)
    s = single_atom_scatter(WaveguideParams(gamma_w=0.0, gamma_l=1.0), 3.7)
    assert s.t == 1 and s.r == 0


def test_single_atom_power_examples():
    assert single_atom_power(WaveguideParams(gamma_w=1.0), 0.0) == (0.0, 1.0)
    T, R = single_atom_power(WaveguideParams.from_ratio(0.5), 0.0)
    assert (T, R) == pytest.approx((0.25, 0.25), abs=1e-15)
    T, R = single_atom_power(WaveguideParams.from_ratio(0.5), 1e8)
    assert T == pytest.approx(1.0, abs=1e-15) and R < 1e-16


def test_reflection_phase_examples():
    p = WaveguideParams.from_ratio(0.7)
    for d in (0.0, 1.0, -2.5):
        R = single_atom_power(p, d)[1]
        assert abs(math.sqrt(R) * np.exp(1j * reflection_phase(p, d)) - eta(p, d)) < 1e-15
    # pi/4 up to the fixed offset of pi
    assert (reflection_phase(p, 1.0) - math.pi / 4) % (2 * math.pi) == pytest.approx(math.pi)
    assert reflection_phase(p, 0.8) == pytest.approx(-reflection_phase(p, -0.8))


def test_thickness_infinite_not_nan():
    s = single_atom_scatter(WaveguideParams(gamma_w=1.0), 0.0)
    assert s.D == math.inf
    D = ScatterResult(np.array([0.0, 0.5]), np.zeros(2)).D
    assert D[0] == math.inf and D[1] == pytest.approx(-math.log(0.25))


def test_params_validation():
    with pytest.raises(ValueError):
        WaveguideParams(gamma_w=0.0, gamma_l=0.0)
    with pytest.raises(ValueError):
        WaveguideParams(k=-1.0)
    with pytest.raises(ValueError):
        WaveguideParams.from_ratio(1.5)


def test_broadcasting():
    p = WaveguideParams.from_ratio(0.4)
    grid = np.linspace(-3, 3, 7)
    s = single_atom_scatter(p, grid)
    assert s.t.shape == (7,)
    for d, t in zip(grid, s.t):
        assert t == single_atom_scatter(p, d).t


@settings(max_examples=200, deadline=None)
@given(ratios, detunings)
def test_matches_oracle_and_t_is_one_plus_r(g, d):
    p = WaveguideParams.from_ratio(g)
    s = single_atom_scatter(p, d)
    assert abs(s.t - single_atom_t(p.gamma_w, p.gamma_t, d)) < 1e-12
    assert abs(s.r - single_atom_r(p.gamma_w, p.gamma_t, d)) < 1e-12
    assert abs(s.t - (1 + s.r)) < 1e-12


@settings(max_examples=200, deadline=None)
@given(ratios, detunings, st.floats(0.1, 10.0))
def test_power_balance_closed_form(g, d, gt):
    p = WaveguideParams.from_ratio(g, gamma_t=gt)
    T, R = single_atom_power(p, d)
    expected = 1 - 2 * p.gamma_l * p.gamma_w / (p.gamma_t ** 2 + d ** 2)
    assert abs(T + R - expected) < 1e-12
    s = single_atom_scatter(p, d)
    assert abs(s.T - T) < 1e-12 and abs(s.R - R) < 1e-12
    if p.gamma_l == 0:
        assert abs(T + R - 1) < 1e-12


@settings(max_examples=200, deadline=None)
@given(ratios, detunings, scales)
def test_scale_invariance(g, d, s):
    p = WaveguideParams.from_ratio(g)
    q = WaveguideParams(gamma_w=s * p.gamma_w, gamma_l=s * p.gamma_l)
    a, b = single_atom_scatter(p, d), single_atom_scatter(q, s * d)
    assert abs(a.t - b.t) < 1e-12 and abs(a.r - b.r) < 1e-12
    assert abs(eta(p, d) - eta(q, s * d)) < 1e-12
