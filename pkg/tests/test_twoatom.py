import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from corr1d.core import WaveguideParams, eta, single_atom_power, single_atom_scatter
from corr1d.errors import MftVanishes, NonconvergentSeries, ResonantDivergence
from corr1d.twoatom import (doppler_average_t, hyp2f1_1b, poisson_mft_thickness,
                            relative_deviation, strong_loss_product, two_atom_amplitude,
                            two_atom_average_analytic, two_atom_average_doppler, two_atom_series)

from oracles import doppler_pair_mc, hyp2f1_mpmath, pair_average_mc

# sup over separation of |T12 - T1 T2| / (gamma_w/gamma_t)^2 tends to 2 from below
STRONG_LOSS_C = 2.0


def test_lossless_resonant_pair_vanishes():
    p = WaveguideParams(gamma_w=1.0)
    assert two_atom_amplitude(p, 0.0, 0.0, 0.4) == 0


def test_resonant_divergence():
    p = WaveguideParams(gamma_w=1.0)
    # eta = -1 for both: denominator 1 - exp(2ikx) vanishes at kx = pi
    with pytest.raises(ResonantDivergence):
        two_atom_amplitude(p, 0.0, 0.0, np.pi)


def test_first_series_term_is_product():
    p = WaveguideParams.from_ratio(0.7)
    t1, t2 = single_atom_scatter(p, 0.3).t, single_atom_scatter(p, -1.1).t
    assert two_atom_series(p, 0.3, -1.1, 2.0, terms=1) == pytest.approx(t1 * t2, abs=1e-15)


def test_series_matches_closed_form():
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 50:
        p = WaveguideParams.from_ratio(rng.uniform(0.01, 1))
        d1, d2 = rng.uniform(-4, 4, 2)
        R1, R2 = single_atom_power(p, d1)[1], single_atom_power(p, d2)[1]
        if math.sqrt(R1 * R2) > 0.6:
            continue
        x = rng.uniform(0, 10)
        assert abs(two_atom_series(p, d1, d2, x, 50) - two_atom_amplitude(p, d1, d2, x)) < 1e-10
        checked += 1


def test_hypergeometric_series_vs_mpmath():
    rng = np.random.default_rng(1)
    for _ in range(30):
        b = 1j * rng.uniform(0, 0.5)
        z = 0.89 * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
        assert abs(hyp2f1_1b(b, z) - hyp2f1_mpmath(b, z)) < 1e-11
    with pytest.raises(NonconvergentSeries):
        hyp2f1_1b(0.1j, 1.0)


def test_series_and_quadrature_paths_agree():
    rng = np.random.default_rng(2)
    n = 0
    while n < 50:
        p = WaveguideParams.from_ratio(rng.uniform(0.01, 1))
        d, rho = rng.uniform(-3, 3), rng.uniform(0.01, 0.5)
        if abs(eta(p, d)) ** 2 > 0.9:
            continue
        a = two_atom_average_analytic(p, d, rho, method="series")
        b = two_atom_average_analytic(p, d, rho, method="quadrature")
        assert abs(a - b) < 1e-8
        n += 1


def test_quadrature_path_vs_mpmath_near_unit_circle():
    p = WaveguideParams.from_ratio(0.99)
    d, rho = 0.05, 0.3
    z = complex(eta(p, d)) ** 2
    assert abs(z) > 0.9
    t = complex(single_atom_scatter(p, d).t)
    ref = t * t * hyp2f1_mpmath(0.5j * rho, z)
    assert abs(two_atom_average_analytic(p, d, rho) - ref) < 1e-9


def test_low_density_limit():
    p = WaveguideParams.from_ratio(0.6)
    t = complex(single_atom_scatter(p, 0.4).t)
    assert abs(two_atom_average_analytic(p, 0.4, 1e-9) - t * t) < 1e-8


def test_analytic_average_vs_monte_carlo():
    rng = np.random.default_rng(3)
    for g, d, rho in ((0.4, 0.5, 0.3), (1.0, 1.2, 0.1), (0.8, -0.3, 0.5)):
        p = WaveguideParams.from_ratio(g)
        m, se = pair_average_mc(p.gamma_w, p.gamma_t, d, rho, 200_000, rng)
        a = two_atom_average_analytic(p, d, rho)
        assert abs(a.real - m.real) < 4 * se.real
        assert abs(a.imag - m.imag) < 4 * se.imag


def test_doppler_zero_width_is_exact():
    p = WaveguideParams.from_ratio(0.7)
    assert two_atom_average_doppler(p, 0.3, 0.0, 1.1) == two_atom_amplitude(p, 0.3, 0.3, 1.1)
    assert doppler_average_t(p, 0.3, 0.0) == single_atom_scatter(p, 0.3).t


def test_doppler_continuity_at_small_width():
    p = WaveguideParams(gamma_w=1.0)
    r = []
    for w in (0.0, 0.01):
        r.append(relative_deviation(two_atom_average_doppler(p, 0.5, w, 0.0),
                                    doppler_average_t(p, 0.5, w) ** 2))
    assert abs(r[1] - r[0]) < 1e-3


def test_doppler_single_atom_vs_quad():
    p = WaveguideParams.from_ratio(0.6)
    mean, width = 0.4, 3.0

    def f(d, part):
        w = math.exp(-0.5 * ((d - mean) / width) ** 2) / (math.sqrt(2 * math.pi) * width)
        return w * getattr(complex(single_atom_scatter(p, d).t), part)

    ref = complex(*(integrate.quad(f, -np.inf, np.inf, args=(part,), epsabs=1e-13)[0]
                    for part in ("real", "imag")))
    assert abs(doppler_average_t(p, mean, width) - ref) < 1e-10


def test_doppler_pair_vs_dblquad_and_mc():
    p = WaveguideParams.from_ratio(0.5)
    mean, width, x12 = 0.3, 2.0, 0.7
    xi = np.exp(2j * x12)

    def f(d2, d1, part):
        w = np.exp(-0.5 * (((d1 - mean) / width) ** 2 + ((d2 - mean) / width) ** 2))
        w /= 2 * np.pi * width ** 2
        e1, e2 = eta(p, d1), eta(p, d2)
        return w * getattr(complex((1 + e1) * (1 + e2) / (1 - e1 * e2 * xi)), part)

    lo, hi = mean - 12 * width, mean + 12 * width
    ref = complex(*(integrate.dblquad(f, lo, hi, lo, hi, args=(part,), epsabs=1e-10,
                                      epsrel=1e-10)[0] for part in ("real", "imag")))
    val = two_atom_average_doppler(p, mean, width, x12)
    assert abs(val - ref) < 1e-8 * abs(ref)
    m, se = doppler_pair_mc(p.gamma_w, p.gamma_t, mean, width, x12, 400_000,
                            np.random.default_rng(4))
    assert abs(val.real - m.real) < 4 * se.real and abs(val.imag - m.imag) < 4 * se.imag


def test_doppler_decorrelation_example():
    p = WaveguideParams(gamma_w=1.0)
    r = relative_deviation(two_atom_average_doppler(p, 0.0, 100.0, 0.0),
                           doppler_average_t(p, 0.0, 100.0) ** 2)
    assert r < 0.01


def test_relative_deviation_examples():
    assert relative_deviation(0.3 + 0.1j, 0.3 + 0.1j) == 0
    assert relative_deviation(0.6 + 0.2j, 0.3 + 0.1j) == pytest.approx(1.0)
    with pytest.raises(MftVanishes):
        relative_deviation(0.1, 0.0)


def test_deviation_grows_with_density():
    p = WaveguideParams(gamma_w=1.0)
    mft = complex(single_atom_scatter(p, 0.1).t) ** 2
    r = [relative_deviation(two_atom_average_analytic(p, 0.1, rho), mft)
         for rho in np.geomspace(0.01, 10, 13)]
    assert np.all(np.diff(r) > 0)


def test_poisson_thickness_examples():
    assert poisson_mft_thickness(WaveguideParams(gamma_w=1.0), 0.0, 0.0) == 0
    assert poisson_mft_thickness(WaveguideParams(gamma_w=1.0), 0.0, 1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        poisson_mft_thickness(WaveguideParams(), 0.0, -1.0)


def test_poisson_thickness_monte_carlo():
    rng = np.random.default_rng(5)
    p = WaveguideParams.from_ratio(0.5)
    for d in (0.0, 1.0):
        T1 = single_atom_power(p, d)[0]
        v = T1 ** rng.poisson(4.0, 400_000)
        m, se = v.mean(), v.std(ddof=1) / math.sqrt(v.size)
        # delta method for -ln<T>
        assert abs(-math.log(m) - poisson_mft_thickness(p, d, 4.0)) < 3 * se / m


def test_uniform_phase_factorization_and_additivity():
    rng = np.random.default_rng(6)
    p = WaveguideParams.from_ratio(0.8)
    d1, d2 = 0.4, -0.7
    x = rng.uniform(0, np.pi, 400_000)
    e1, e2 = eta(p, d1), eta(p, d2)
    t12 = (1 + e1) * (1 + e2) / (1 - e1 * e2 * np.exp(2j * x))
    n = x.size
    t1t2 = complex(single_atom_scatter(p, d1).t * single_atom_scatter(p, d2).t)
    assert abs(t12.mean().real - t1t2.real) < 4 * t12.real.std() / math.sqrt(n)
    assert abs(t12.mean().imag - t1t2.imag) < 4 * t12.imag.std() / math.sqrt(n)
    D = -np.log(np.abs(t12) ** 2)
    expected = -math.log(single_atom_power(p, d1)[0]) - math.log(single_atom_power(p, d2)[0])
    assert abs(D.mean() - expected) < 4 * D.std() / math.sqrt(n)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.001, 0.05), st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 2 * np.pi))
def test_strong_loss_factorization(g, d1, d2, x):
    p = WaveguideParams.from_ratio(g)
    T12 = abs(two_atom_amplitude(p, d1, d2, x)) ** 2
    assert abs(T12 - strong_loss_product(p, d1, d2)) <= STRONG_LOSS_C * g ** 2
