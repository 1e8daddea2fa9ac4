"""Continuous-medium mean-field theory of a uniform atomic slab.

Truncating the correlation hierarchy at the single-atom level turns the atoms
filling ``[0, L]`` into a dielectric with susceptibility ``chi = alpha * rho``
(no local-field correction in 1D). The slab then acts as a Fabry-Perot etalon,
whose resonance is shifted by the cooperative Lamb shift.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import ScatterResult, WaveguideParams, polarizability
from .ensembles import Spectrum, SpectrumPoint
from .errors import PeakAtBoundary

OBSERVABLES = ("transmission", "thickness")


@dataclass(frozen=True)
class SlabMedium:
    """Uniform line density ``rho`` of atoms filling ``[0, length]``."""

    rho: float
    length: float
    params: WaveguideParams = WaveguideParams()

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("density must be non-negative")
        if not self.length > 0:
            raise ValueError("slab length must be positive")

    def susceptibility(self, delta):
        return polarizability(self.params, delta) * self.rho


def refractive_index(m: SlabMedium, delta):
    """``n = sqrt(1 + alpha rho)`` on the branch with ``Im(n k) > 0``.

    On the branch cut (``1 + chi`` real and negative) the value is the limit from
    ``Im chi -> 0+``, i.e. ``+i sqrt|1 + chi|``.
    """
    n = np.sqrt(1.0 + m.susceptibility(delta) + 0j)
    flip = (n.imag < 0) | ((n.imag == 0) & (n.real < 0))
    return np.where(flip, -n, n)[()]


def slab_transmission(m: SlabMedium, delta) -> ScatterResult:
    """Amplitudes of the slab with the same conventions as the dipole solver.

    ``t`` multiplies ``exp(ikx)`` beyond the slab and ``r`` multiplies
    ``exp(-ikx)`` before it.
    """
    k = m.params.k
    n = refractive_index(m, delta)
    r0 = (1.0 - n) / (1.0 + n)
    e2 = np.exp(2j * n * k * m.length)
    den = 1.0 - r0 ** 2 * e2
    t = (1.0 - r0 ** 2) * np.exp(1j * (n - 1.0) * k * m.length) / den
    r = r0 * (1.0 - e2) / den
    return ScatterResult(t=np.asarray(t)[()], r=np.asarray(r)[()])


def cls_shift(m: SlabMedium) -> float:
    """Cooperative Lamb shift ``(gamma_w rho / 2k)(1 - sin(2kL) / 2kL)``."""
    p = m.params
    x = 2.0 * p.k * m.length
    return float(p.gamma_w * m.rho / (2 * p.k) * (1.0 - np.sin(x) / x))


def mft_width(m: SlabMedium) -> float:
    """Resonance half width at half maximum of the effective-medium slab."""
    p = m.params
    kl = p.k * m.length
    factor = (1.0 + 2.0 * kl ** 2 - np.cos(2 * kl)) / (2 * kl)
    return float(p.gamma_t * np.sqrt(1.0 + p.gamma_w * m.rho / (p.gamma_t * p.k) * factor))


def mft_width_thin(m: SlabMedium) -> float:
    """First-order density expansion of :func:`mft_width`."""
    p = m.params
    kl = p.k * m.length
    return float(p.gamma_t + p.gamma_w * m.rho / p.k * (1.0 + 2.0 * kl ** 2 - np.cos(2 * kl)) / (4 * kl))


def slab_spectrum(m: SlabMedium, delta_grid) -> Spectrum:
    """Slab transmission cast as a noise-free :class:`Spectrum`."""
    grid = np.asarray(delta_grid, dtype=float)
    t = np.atleast_1d(slab_transmission(m, grid).t).astype(complex)
    T = np.abs(t) ** 2
    with np.errstate(divide="ignore"):
        lnT = np.log(T)
    zeros = np.zeros(grid.shape)
    ones = np.ones(grid.shape, dtype=int)
    return Spectrum(delta=grid, mean_t=t, stderr_t=zeros, mean_T=T, stderr_T=zeros,
                    mean_lnT=lnT, stderr_lnT=zeros.copy(), n_used=ones,
                    n_diverged=np.zeros(grid.shape, dtype=int), mean_atoms=m.rho * m.length)


def _columns(spectrum, observable):
    if isinstance(spectrum, Spectrum):
        x = spectrum.delta
        if observable == "transmission":
            return x, spectrum.mean_T, spectrum.stderr_T
        return x, -spectrum.mean_lnT, spectrum.stderr_lnT
    pts: Sequence[SpectrumPoint] = list(spectrum)
    x = np.array([q.delta for q in pts], dtype=float)
    if observable == "transmission":
        return x, np.array([q.mean_T for q in pts]), np.array([q.stderr_T for q in pts])
    return x, -np.array([q.mean_lnT for q in pts]), np.array([q.stderr_lnT for q in pts])


def extract_peak_shift(spectrum: Union[Spectrum, Sequence[SpectrumPoint]],
                       observable: str = "transmission"):
    """Detuning of the spectral maximum and its standard error.

    Parameters
    ----------
    spectrum : Spectrum or sequence of SpectrumPoint
        Needs at least 5 points on a strictly monotone detuning grid.
    observable : {"transmission", "thickness"}
        Maximize ``mean_T``, or the optical thickness ``-mean_lnT``. The latter
        locates the extinction resonance, where transmitted light is dimmest.

    Returns
    -------
    shift, uncertainty : float
        Vertex of the parabola through the grid maximum and its two neighbours;
        the uncertainty propagates the per-point standard errors through the
        vertex formula, assuming independent points.

    Raises
    ------
    PeakAtBoundary
        If the grid maximum sits at either end of the grid.
    """
    if observable not in OBSERVABLES:
        raise ValueError(f"unknown observable {observable!r}; expected one of {OBSERVABLES}")
    x, y, s = (np.asarray(a, dtype=float) for a in _columns(spectrum, observable))
    if x.size < 5:
        raise ValueError("peak extraction needs at least 5 grid points")
    dx = np.diff(x)
    if np.all(dx < 0):
        x, y, s = x[::-1], y[::-1], s[::-1]
    elif not np.all(dx > 0):
        raise ValueError("detuning grid must be strictly monotone")
    i = int(np.nanargmax(np.where(np.isnan(y), -np.inf, y)))
    if i == 0 or i == x.size - 1:
        raise PeakAtBoundary(
            f"maximum at grid edge delta={x[i]:g}; widen the grid")
    xs, ys, ss = x[i - 1:i + 2], y[i - 1:i + 2], s[i - 1:i + 2]
    if not np.all(np.isfinite(ys)):
        raise ValueError("non-finite spectrum values next to the maximum")
    # centre the abscissa for conditioning
    u = xs - xs[1]
    vinv = np.linalg.inv(np.vander(u, 3))
    a, b, _ = vinv @ ys
    if a >= 0:
        return float(xs[1]), float("nan")
    vertex = -b / (2 * a)
    grad = -vinv[1] / (2 * a) + b / (2 * a * a) * vinv[0]
    err = float(np.sqrt(np.sum((grad * np.nan_to_num(ss)) ** 2)))
    return float(xs[1] + vertex), err


def _crossing(x0, x1, y0, y1, s0, s1, level):
    f = (level - y0) / (y1 - y0)
    slope = (y1 - y0) / (x1 - x0)
    # interpolation error from the bracketing points' standard errors
    err = np.hypot((1 - f) * s0, f * s1) / abs(slope)
    return x0 + f * (x1 - x0), err


def dip_fwhm(spectrum: Spectrum, baseline: float = 1.0):
    """Full width of the transmission dip at half depth and its standard error.

    The half-depth level is ``(baseline + min mean_T) / 2``; the width spans the
    outermost grid crossings of that level, located by linear interpolation.
    """
    x = np.asarray(spectrum.delta, dtype=float)
    y = np.asarray(spectrum.mean_T, dtype=float)
    s = np.nan_to_num(np.asarray(spectrum.stderr_T, dtype=float))
    if x.size < 5 or not np.all(np.diff(x) > 0):
        raise ValueError("dip width needs at least 5 points on an increasing grid")
    level = 0.5 * (baseline + np.nanmin(y))
    below = np.flatnonzero(y < level)
    lo, hi = below[0], below[-1]
    if lo == 0 or hi == x.size - 1:
        raise PeakAtBoundary("dip reaches the grid edge; widen the grid")
    left, el = _crossing(x[lo - 1], x[lo], y[lo - 1], y[lo], s[lo - 1], s[lo], level)
    right, er = _crossing(x[hi], x[hi + 1], y[hi], y[hi + 1], s[hi], s[hi + 1], level)
    return float(right - left), float(np.hypot(el, er))
