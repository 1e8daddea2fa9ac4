"""Steady-state coupled point dipoles in a 1D waveguide.

Each atom j is driven by the incident plane wave and by the guided field of all
other atoms,

    P_j = alpha_j d0 exp(i k x_j) + eta_j sum_{l != j} exp(i k |x_j - x_l|) P_l,

and the total field is ``d0 exp(ikx) + (ik/2) sum_l exp(ik|x - x_l|) P_l``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ScatterResult, WaveguideParams, eta, polarizability
from .errors import GridTooClose, SingularSystem

#: Minimum allowed atom separation, in units of 1/k.
MIN_SEPARATION = 1e-9

_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class Configuration:
    """One stochastic realization: sorted atom positions and per-atom detunings."""

    positions: np.ndarray
    detunings: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.positions, dtype=float))
        d = np.asarray(self.detunings, dtype=float)
        if d.ndim == 0:
            d = np.full(x.shape, float(d))
        if x.ndim != 1 or d.shape != x.shape:
            raise ValueError("positions and detunings must be 1D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(d))):
            raise ValueError("positions and detunings must be finite")
        if x.size > 1 and np.min(np.diff(x)) < MIN_SEPARATION:
            raise ValueError(
                "positions must be sorted ascending with separation >= "
                f"{MIN_SEPARATION:g}/k"
            )
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "detunings", d)

    @classmethod
    def uniform_detuning(cls, positions, delta: float) -> "Configuration":
        x = np.asarray(positions, dtype=float)
        return cls(x, np.full(x.shape, float(delta)))

    @property
    def n_atoms(self) -> int:
        return self.positions.size

    def __len__(self):
        return self.positions.size

    def shifted(self, dx: float) -> "Configuration":
        return Configuration(self.positions + dx, self.detunings)

    def mirrored(self) -> "Configuration":
        """Reflect through the origin (reverses propagation direction)."""
        return Configuration(-self.positions[::-1], self.detunings[::-1])


@dataclass(frozen=True)
class DipoleAmplitudes:
    p: np.ndarray


def _kernel(k, x):
    K = np.exp(1j * k * np.abs(x[:, None] - x[None, :]))
    np.fill_diagonal(K, 0.0)
    return K


def solve_dipoles(p: WaveguideParams, c: Configuration) -> DipoleAmplitudes:
    """Solve ``(I - M) P = alpha * drive`` by LU with partial pivoting."""
    x = c.positions
    if x.size == 0:
        return DipoleAmplitudes(np.zeros(0, dtype=complex))
    eta_j = eta(p, c.detunings)
    A = np.eye(x.size, dtype=complex) - eta_j[:, None] * _kernel(p.k, x)
    b = polarizability(p, c.detunings) * p.d0 * np.exp(1j * p.k * x)
    try:
        sol = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc), condition=np.inf) from exc
    resid = np.linalg.norm(A @ sol - b)
    if not np.isfinite(resid) or resid > _RESIDUAL_TOL * max(np.linalg.norm(b), 1e-300):
        cond = np.linalg.cond(A)
        raise SingularSystem(
            f"coupled-dipole residual {resid:.3e} exceeds tolerance (condition ~ {cond:.3e})",
            condition=cond,
        )
    return DipoleAmplitudes(sol)


def fields(p: WaveguideParams, c: Configuration, amps: DipoleAmplitudes) -> ScatterResult:
    """Far-field amplitudes; ``t`` multiplies ``exp(ikx)`` beyond the last atom and
    ``r`` multiplies ``exp(-ikx)`` before the first."""
    x = c.positions
    pref = 1j * p.k / (2 * p.d0)
    t = 1.0 + pref * np.sum(np.exp(-1j * p.k * x) * amps.p)
    r = pref * np.sum(np.exp(1j * p.k * x) * amps.p)
    return ScatterResult(complex(t), complex(r))


def field_profile(p: WaveguideParams, c: Configuration, amps: DipoleAmplitudes, xs) -> np.ndarray:
    """Total field divided by ``d0`` on the grid ``xs``."""
    xs = np.asarray(xs, dtype=float)
    x = c.positions
    if x.size and np.min(np.abs(xs[..., None] - x)) < MIN_SEPARATION:
        raise GridTooClose("grid point within the minimum separation of an atom")
    scattered = np.exp(1j * p.k * np.abs(xs[..., None] - x)) @ amps.p if x.size else 0.0
    return np.exp(1j * p.k * xs) + (1j * p.k / (2 * p.d0)) * scattered


def scatter(p: WaveguideParams, c: Configuration) -> ScatterResult:
    """Convenience: solve and return far-field amplitudes."""
    return fields(p, c, solve_dipoles(p, c))


def scatter_stack(p: WaveguideParams, positions, detunings):
    """Solve many configurations with a common atom number at once.

    ``positions`` has shape ``(B, N)`` and ``detunings`` ``(B, G, N)``: B
    configurations, each swept over G detuning rows. Returns ``t, r`` of shape
    ``(B, G)`` and a boolean mask of rows whose residual check failed.
    """
    x = np.asarray(positions, dtype=float)
    d = np.asarray(detunings, dtype=float)
    B, G, N = d.shape
    if N == 0:
        return (np.ones((B, G), dtype=complex), np.zeros((B, G), dtype=complex),
                np.zeros((B, G), dtype=bool))
    K = np.exp(1j * p.k * np.abs(x[:, :, None] - x[:, None, :]))
    K[:, np.arange(N), np.arange(N)] = 0.0
    A = np.eye(N, dtype=complex) - eta(p, d)[..., None] * K[:, None]
    drive = p.d0 * np.exp(1j * p.k * x)
    b = polarizability(p, d) * drive[:, None, :]
    P = np.linalg.solve(A, b[..., None])[..., 0]
    resid = np.linalg.norm(np.einsum("bgij,bgj->bgi", A, P) - b, axis=-1)
    scale = np.maximum(np.linalg.norm(b, axis=-1), 1e-300)
    bad = ~(resid <= _RESIDUAL_TOL * scale)
    pref = 1j * p.k / (2 * p.d0)
    t = 1.0 + pref * np.einsum("bgj,bj->bg", P, np.exp(-1j * p.k * x))
    r = pref * np.einsum("bgj,bj->bg", P, np.exp(1j * p.k * x))
    return t, r, bad


def scatter_batch(p: WaveguideParams, positions, detunings):
    """Transmission and reflection for one set of positions and many detuning rows.

    ``detunings`` has shape ``(G, N)``; returns complex arrays ``t, r`` of shape
    ``(G,)``.
    """
    x = np.asarray(positions, dtype=float)
    d = np.atleast_2d(np.asarray(detunings, dtype=float))
    try:
        t, r, bad = scatter_stack(p, x[None], d[None])
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc), condition=np.inf) from exc
    if np.any(bad):
        g = int(np.flatnonzero(bad[0])[0])
        raise SingularSystem(f"coupled-dipole residual exceeds tolerance at grid row {g}")
    return t[0], r[0]
