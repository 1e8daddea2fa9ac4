"""Two-atom transmission and its ensemble averages.

For two atoms the composite transmission is a geometric series in recurrent
photon exchanges,

    t12 = t1 t2 / (1 - eta1 eta2 exp(2 i k x12)),

whose averages over separations and Doppler detunings decide whether the
independent-atom (mean-field) product ``<t1><t2>`` holds.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy import integrate, special

from .core import WaveguideParams, eta, single_atom_power, single_atom_scatter
from .errors import (MftVanishes, NonconvergentSeries, QuadratureFailure,
                     ResonantDivergence)

SERIES_RADIUS = 0.9
_SERIES_TOL = 1e-13
_SERIES_MAX_TERMS = 20000


def two_atom_amplitude(p: WaveguideParams, d1: float, d2: float, x12: float) -> complex:
    """Closed-form pair transmission, overall propagation phase omitted."""
    t1 = single_atom_scatter(p, d1).t
    t2 = single_atom_scatter(p, d2).t
    den = 1.0 - eta(p, d1) * eta(p, d2) * np.exp(2j * p.k * x12)
    if abs(den) <= 1e-14:
        raise ResonantDivergence("pair denominator vanishes (lossless resonant pair)")
    return complex(t1 * t2 / den)


def two_atom_series(p: WaveguideParams, d1: float, d2: float, x12: float,
                    terms: int = 50) -> complex:
    """Truncation of the pair series after ``terms`` photon round trips.

    ``terms=1`` is the mean-field product ``t1 t2``; each further term adds one
    recurrent scattering event.
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    t1 = single_atom_scatter(p, d1).t
    t2 = single_atom_scatter(p, d2).t
    q = complex(eta(p, d1) * eta(p, d2) * np.exp(2j * p.k * x12))
    return complex(t1 * t2 * np.sum(q ** np.arange(terms)))


def hyp2f1_1b(b: complex, z: complex) -> complex:
    """Power series of ``2F1(1, b; 1 + b; z) = sum_n b/(b+n) z^n`` for ``|z| < 1``."""
    if abs(z) >= 1.0:
        raise NonconvergentSeries(f"|z| = {abs(z):.6f} outside the unit disc")
    total = 0j
    zn = 1.0 + 0j
    az = abs(z)
    for n in range(_SERIES_MAX_TERMS):
        term = b / (b + n) * zn if n else 1.0
        total += term
        # remaining tail is bounded by |term| * |z| / (1 - |z|)
        if n and abs(term) * az / (1.0 - az) <= _SERIES_TOL * abs(total):
            return total
        zn *= z
    raise NonconvergentSeries(f"no convergence after {_SERIES_MAX_TERMS} terms at |z|={az:.6f}")


def _quad_complex(f, a, b, points=None, epsabs=1e-12, epsrel=1e-10, limit=2000):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, points=points, epsabs=epsabs, epsrel=epsrel,
                                      limit=limit, complex_func=True)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(str(exc)) from exc
    return complex(val)


def exponential_phase_weight(rho_over_k: float, phi):
    """Round-trip phase density ``2 k x12`` folded onto ``[0, 2 pi)``.

    Nearest-neighbour separations are exponential with rate ``rho``; folding the
    geometric tail of the unbounded density yields a normalized density on one
    period.
    """
    lam = rho_over_k / 2.0
    return lam * np.exp(-lam * np.asarray(phi)) / (-np.expm1(-2 * np.pi * lam))


def two_atom_average_analytic(p: WaveguideParams, delta: float, rho: float,
                              method: str = "auto") -> complex:
    """Pair transmission averaged over exponentially distributed separations.

    Equals ``t^2 * 2F1(1, i rho/2k; 1 + i rho/2k; eta^2)``. The series is used
    for ``|eta^2| <= 0.9``; otherwise, or if it fails to converge, the periodic
    phase integral is evaluated by adaptive quadrature.
    """
    if rho <= 0:
        raise ValueError("density must be positive")
    if method not in ("auto", "series", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    t = complex(single_atom_scatter(p, delta).t)
    z = complex(eta(p, delta)) ** 2
    b = 1j * rho / (2 * p.k)
    if method == "series" or (method == "auto" and abs(z) <= SERIES_RADIUS):
        try:
            return t * t * hyp2f1_1b(b, z)
        except NonconvergentSeries:
            if method == "series":
                raise
    if t == 0:
        return 0j
    rk = rho / p.k

    def integrand(phi):
        return exponential_phase_weight(rk, phi) / (1.0 - z * np.exp(1j * phi))

    peak = (-np.angle(z)) % (2 * np.pi)
    points = [peak] if 0 < peak < 2 * np.pi else None
    return t * t * _quad_complex(integrand, 0.0, 2 * np.pi, points=points)


def gaussian_resolvent(a, mean: float, width: float):
    """``integral f(d) / (i d - a) dd`` for Gaussian ``f`` and ``Re(a) >= 0``.

    Closed form through the Faddeeva function.
    """
    a = np.asarray(a, dtype=complex)
    arg = (1j * np.conj(a) - mean) / (np.sqrt(2.0) * width)
    return -np.sqrt(np.pi / 2.0) / width * np.conj(special.wofz(arg))


def doppler_average_t(p: WaveguideParams, delta_mean: float, delta_width: float,
                      method: str = "faddeeva", order: int = 64) -> complex:
    """Single-atom transmission averaged over Gaussian detunings."""
    if delta_width < 0:
        raise ValueError("Doppler width must be non-negative")
    if delta_width == 0:
        return complex(single_atom_scatter(p, delta_mean).t)
    if method == "faddeeva":
        return complex(1.0 + p.gamma_w * gaussian_resolvent(p.gamma_t, delta_mean, delta_width))
    if method == "hermite":
        nodes, weights = np.polynomial.hermite.hermgauss(order)
        d = delta_mean + np.sqrt(2.0) * delta_width * nodes
        return complex(np.sum(weights * single_atom_scatter(p, d).t) / np.sqrt(np.pi))
    raise ValueError(f"unknown method {method!r}")


def two_atom_average_doppler(p: WaveguideParams, delta_mean: float, delta_width: float,
                             x12: float, method: str = "faddeeva", order: int = 64) -> complex:
    """Pair transmission at fixed separation averaged over i.i.d. Gaussian detunings.

    ``method="faddeeva"`` does the inner detuning integral in closed form and the
    outer one by adaptive quadrature; ``method="hermite"`` uses a tensorized
    Gauss-Hermite rule of the given order, accurate only when the Doppler width
    is not much larger than the linewidth.
    """
    if delta_width < 0:
        raise ValueError("Doppler width must be non-negative")
    if delta_width == 0:
        return two_atom_amplitude(p, delta_mean, delta_mean, x12)
    xi = np.exp(2j * p.k * x12)
    if method == "hermite":
        nodes, weights = np.polynomial.hermite.hermgauss(order)
        d = delta_mean + np.sqrt(2.0) * delta_width * nodes
        w = weights / np.sqrt(np.pi)
        d1, d2 = np.meshgrid(d, d, indexing="ij")
        t1 = single_atom_scatter(p, d1).t
        t2 = single_atom_scatter(p, d2).t
        pair = t1 * t2 / (1.0 - eta(p, d1) * eta(p, d2) * xi)
        return complex(w @ pair @ w)
    if method != "faddeeva":
        raise ValueError(f"unknown method {method!r}")

    def outer(u):
        d2 = delta_mean + delta_width * u
        c = eta(p, d2) * xi
        inner = 1.0 + p.gamma_w * (1.0 + c) * gaussian_resolvent(
            p.gamma_t + c * p.gamma_w, delta_mean, delta_width)
        return np.exp(-0.5 * u * u) / np.sqrt(2 * np.pi) * single_atom_scatter(p, d2).t * inner

    centre = -delta_mean / delta_width
    span = 12.0
    points = [centre] if -span < centre < span else None
    return _quad_complex(outer, -span, span, points=points, epsabs=1e-13, epsrel=1e-10)


def relative_deviation(exact: complex, mft: complex) -> float:
    """``|exact - mft| / |mft|``; undefined when the mean-field value vanishes."""
    if abs(mft) <= 1e-14:
        raise MftVanishes("mean-field amplitude vanishes")
    return float(abs(exact - mft) / abs(mft))


def poisson_mft_thickness(p: WaveguideParams, delta, nbar):
    """Mean-field optical thickness ``-ln <T1^N>`` for Poisson atom number ``N``."""
    nbar = np.asarray(nbar, dtype=float)
    if np.any(nbar < 0):
        raise ValueError("mean atom number must be non-negative")
    delta = np.asarray(delta, dtype=float)
    return ((2 * p.gamma_t - p.gamma_w) * nbar * p.gamma_w / (p.gamma_t ** 2 + delta ** 2))[()]


def strong_loss_product(p: WaveguideParams, d1: float, d2: float):
    """Independent-atom pair power transmission ``T1 * T2``."""
    return single_atom_power(p, d1)[0] * single_atom_power(p, d2)[0]
