"""Physical parameters and single-atom scattering in a one-dimensional waveguide.

Units: lengths are measured in 1/k and rates in units of the total linewidth
``gamma_t`` unless a caller builds :class:`WaveguideParams` with other scales.
Every function broadcasts over numpy arrays of detunings.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Detunings are plain real numbers (or arrays of them); kept as an alias for
# signatures.
Detuning = float


@dataclass(frozen=True)
class WaveguideParams:
    """Waveguide and atom constants.

    Parameters
    ----------
    gamma_w : float
        Decay rate into the guided mode.
    gamma_l : float
        Loss rate out of the waveguide.
    k : float
        Wavenumber of the resonant light.
    d0 : complex
        Incident field amplitude.
    """

    gamma_w: float = 1.0
    gamma_l: float = 0.0
    k: float = 1.0
    d0: complex = 1.0

    def __post_init__(self):
        if not (self.k > 0 and np.isfinite(self.k)):
            raise ValueError(f"k must be positive and finite, got {self.k}")
        if self.gamma_w < 0 or self.gamma_l < 0:
            raise ValueError("decay rates must be non-negative")
        if not self.gamma_t > 0:
            raise ValueError("total linewidth gamma_t must be positive")
        if self.d0 == 0:
            raise ValueError("incident amplitude d0 must be nonzero")

    @property
    def gamma_t(self) -> float:
        return self.gamma_w + self.gamma_l

    @classmethod
    def from_ratio(cls, gamma_w_over_gamma_t: float, gamma_t: float = 1.0, k: float = 1.0,
                   d0: complex = 1.0) -> "WaveguideParams":
        """Build parameters from the coupling fraction ``gamma_w/gamma_t``."""
        if not 0.0 <= gamma_w_over_gamma_t <= 1.0:
            raise ValueError("gamma_w/gamma_t must lie in [0, 1]")
        gamma_w = gamma_w_over_gamma_t * gamma_t
        return cls(gamma_w=gamma_w, gamma_l=gamma_t - gamma_w, k=k, d0=d0)

    @property
    def coupling_ratio(self) -> float:
        return self.gamma_w / self.gamma_t

    @property
    def wavelength(self) -> float:
        return 2 * np.pi / self.k


@dataclass(frozen=True)
class ScatterResult:
    """Complex transmission and reflection amplitudes."""

    t: complex
    r: complex

    @property
    def T(self):
        return np.abs(self.t) ** 2

    @property
    def R(self):
        return np.abs(self.r) ** 2

    @property
    def D(self):
        """Optical thickness ``-ln T``; infinite (never NaN) where T = 0."""
        T = np.asarray(self.T, dtype=float)
        with np.errstate(divide="ignore"):
            D = -np.log(T)
        return D if D.ndim else float(D)


def eta(p: WaveguideParams, delta) -> complex:
    """Single-atom reflection amplitude ``gamma_w / (i delta - gamma_t)``."""
    return p.gamma_w / (1j * np.asarray(delta, dtype=float) - p.gamma_t)


def polarizability(p: WaveguideParams, delta) -> complex:
    """Waveguide polarizability ``-2 gamma_w / [k (delta + i gamma_t)]``."""
    delta = np.asarray(delta, dtype=float)
    return -2.0 * p.gamma_w / (p.k * (delta + 1j * p.gamma_t))


def single_atom_scatter(p: WaveguideParams, delta) -> ScatterResult:
    delta = np.asarray(delta, dtype=float)
    den = 1j * delta - p.gamma_t
    r = p.gamma_w / den
    # equals ((gamma_w - gamma_t) + i delta) / den, with t = 1 + r exact
    t = 1.0 + r
    return ScatterResult(t=t[()], r=r[()])


def single_atom_power(p: WaveguideParams, delta):
    """Power coefficients ``(T, R)`` of one atom, from the closed-form Lorentzians."""
    delta = np.asarray(delta, dtype=float)
    den = p.gamma_t ** 2 + delta ** 2
    T = ((p.gamma_t - p.gamma_w) ** 2 + delta ** 2) / den
    R = p.gamma_w ** 2 / den
    return T[()], R[()]


def reflection_phase(p: WaveguideParams, delta):
    """Phase ``phi`` with ``eta = sqrt(R) * exp(i phi)`` holding exactly.

    This is the argument of ``1/(i delta - gamma_t)``, i.e. ``arctan(delta/gamma_t)``
    shifted by pi. Only sums of two such phases enter pair transmission, so the
    offset cancels modulo 2 pi.
    """
    delta = np.asarray(delta, dtype=float)
    return np.arctan2(-delta, -p.gamma_t * np.ones_like(delta))[()]
