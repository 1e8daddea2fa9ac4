
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corr1d.core import WaveguideParams
from corr1d.ensembles import Spectrum
from corr1d.errors import PeakAtBoundary
from corr1d.meanfield import (SlabMedium, cls_shift, dip_fwhm, extract_peak_shift, mft_width,
                              mft_width_thin, refractive_index, slab_spectrum, slab_transmission)

from oracles import slab_collocation_extrapolated


def synthetic(grid, T, lnT=None, se=None):
    grid = np.asarray(grid, dtype=float)
    T = np.asarray(T, dtype=float)
    z = np.zeros_like(grid) if se is None else np.asarray(se, dtype=float)
    if lnT is None:
        with np.errstate(divide="ignore"):
            lnT = np.log(T)
    one = np.ones(grid.shape, dtype=int)
    return Spectrum(delta=grid, mean_t=np.sqrt(T) + 0j, stderr_t=z, mean_T=T, stderr_T=z,
                    mean_lnT=lnT, stderr_lnT=z, n_used=one, n_diverged=0 * one)


def test_refractive_index_limits():
    p = WaveguideParams.from_ratio(0.3)
    assert refractive_index(SlabMedium(0.0, 1.0, p), 0.4) == 1
    assert abs(refractive_index(SlabMedium(5.0, 1.0, p), 1e9) - 1) < 1e-8
    n = refractive_index(SlabMedium(5.0, 1.0, p), np.linspace(-10, 10, 101))
    assert np.all(n.imag > 0)


def test_susceptibility_at_resonance_is_imaginary():
    p = WaveguideParams.from_ratio(0.3)
    m = SlabMedium(2.0, 1.0, p)
    chi = m.susceptibility(0.0)
    assert chi.real == 0
    assert chi.imag == pytest.approx(2 * p.gamma_w * m.rho / (p.k * p.gamma_t))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(-20, 20), st.floats(0.01, 1.0))
def test_susceptibility_linear_in_density(rho, d, g):
    p = WaveguideParams.from_ratio(g)
    a = SlabMedium(rho, 1.0, p).susceptibility(d)
    b = SlabMedium(2 * rho, 1.0, p).susceptibility(d)
    assert abs(b - 2 * a) <= 1e-14 * max(1.0, abs(b))


def test_slab_limits():
    p = WaveguideParams.from_ratio(0.5)
    s = slab_transmission(SlabMedium(0.0, 3.0, p), 0.2)
    assert abs(s.t - 1) < 1e-15 and abs(s.r) < 1e-15
    s = slab_transmission(SlabMedium(4.0, 1e-9, p), 0.2)
    assert abs(s.t - 1) < 1e-7


@pytest.mark.slow
def test_slab_matches_collocation():
    p = WaveguideParams.from_ratio(0.1)
    m = SlabMedium(32 / np.pi, 4 * np.pi, p)
    worst = 0.0
    for d in np.linspace(-5, 5, 201):
        t, r = slab_collocation_extrapolated(m.rho, m.length, p.gamma_w, p.gamma_t, d, 512)
        s = slab_transmission(m, d)
        worst = max(worst, abs(t - s.t) / abs(s.t), abs(r - s.r) / abs(s.r))
    assert worst < 1e-6


def test_slab_power_balance():
    # an effective medium of lossless atoms still absorbs: Im chi > 0 away from rho = 0
    grid = np.linspace(-4, 4, 81)
    p = WaveguideParams(gamma_w=1.0)
    s = slab_transmission(SlabMedium(1.0, 2 * np.pi, p), grid)
    assert np.all(s.T + s.R < 1)
    s = slab_transmission(SlabMedium(1e-9, 2 * np.pi, p), grid)
    assert np.all(np.abs(s.T + s.R - 1) < 1e-7)


def test_cls_examples():
    p = WaveguideParams.from_ratio(0.2)
    base = p.gamma_w * 3.0 / 2
    for mm in (1, 2, 5):
        assert cls_shift(SlabMedium(3.0, mm * np.pi / 2, p)) == pytest.approx(base, rel=1e-14)
    assert cls_shift(SlabMedium(3.0, 3 * np.pi / 4, p)) == pytest.approx(
        base * (1 + 1 / (3 * np.pi / 2)), rel=1e-14)
    assert cls_shift(SlabMedium(3.0, 1e-6, p)) < 1e-10


def test_width_examples():
    p = WaveguideParams.from_ratio(0.2)
    assert mft_width(SlabMedium(0.0, 3.0, p)) == p.gamma_t
    w = [mft_width(SlabMedium(rho, 3.0, p)) for rho in np.linspace(0, 20, 41)]
    assert np.all(np.diff(w) > 0)
    diffs = []
    for rho in (1e-2, 5e-3, 2.5e-3):
        m = SlabMedium(rho, 3.0, p)
        diffs.append(abs(mft_width(m) - mft_width_thin(m)))
    # second-order remainder: quarters when rho halves
    assert diffs[0] / diffs[1] == pytest.approx(4, rel=0.02)
    assert diffs[1] / diffs[2] == pytest.approx(4, rel=0.02)


def test_peak_of_shifted_lorentzian():
    grid = np.arange(-3, 3.0001, 0.05)
    s, err = extract_peak_shift(synthetic(grid, 1 / (1 + (grid - 0.3) ** 2)))
    assert abs(s - 0.3) < 0.005
    s, _ = extract_peak_shift(synthetic(grid, 1 / (1 + grid ** 2)))
    assert abs(s) < 1e-12


def test_peak_uncertainty_propagates():
    grid = np.linspace(-2, 2, 41)
    T = 1 / (1 + (grid - 0.13) ** 2)
    _, e0 = extract_peak_shift(synthetic(grid, T))
    _, e1 = extract_peak_shift(synthetic(grid, T, se=np.full(grid.shape, 1e-3)))
    assert e0 == 0 and e1 > 0


def test_peak_accepts_point_sequence_and_descending_grid():
    grid = np.linspace(-2, 2, 41)
    spec = synthetic(grid, 1 / (1 + (grid + 0.4) ** 2))
    a = extract_peak_shift(spec)
    b = extract_peak_shift(spec.points)
    c = extract_peak_shift(list(reversed(spec.points)))
    assert a == b and a[0] == pytest.approx(c[0])


def test_peak_at_boundary():
    grid = np.linspace(-1, 1, 11)
    with pytest.raises(PeakAtBoundary):
        extract_peak_shift(synthetic(grid, np.exp(grid)))


@settings(max_examples=50, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(1e-3, 1e3))
def test_peak_shift_scale_invariant(x0, scale):
    grid = np.linspace(-3, 3, 61)
    T = 1 / (1 + (grid - x0) ** 2)
    a, _ = extract_peak_shift(synthetic(grid, T))
    b, _ = extract_peak_shift(synthetic(grid, scale * T))
    assert a == pytest.approx(b, abs=1e-12)


def test_slab_shift_reproduces_cls_at_low_density():
    p = WaveguideParams.from_ratio(0.01)
    for rho in (1e-3, 1e-2):
        m = SlabMedium(rho, np.pi, p)
        c = cls_shift(m)
        grid = np.linspace(-0.5, 0.5, 101)
        s, _ = extract_peak_shift(slab_spectrum(m, grid), observable="thickness")
        assert 0.9 < s / c < 1.1


def test_dip_fwhm_of_lorentzian():
    grid = np.linspace(-5, 5, 401)
    w, e = dip_fwhm(synthetic(grid, 1 - 1 / (1 + grid ** 2)))
    assert w == pytest.approx(2.0, abs=1e-3) and e == 0
    with pytest.raises(PeakAtBoundary):
        dip_fwhm(synthetic(grid[180:220], 1 - 1 / (1 + grid[180:220] ** 2)))
