"""Transfer-matrix description of scattering by atoms along the waveguide.

Matrices act on ``(right-going, left-going)`` local field values. An atom at
``x_j`` maps the pair just left of it onto the pair just right of it, and
``propagation_matrix`` carries both amplitudes across free space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ScatterResult, WaveguideParams, eta
from .dipole import Configuration
from .errors import NoTransmissionSolution, SingularAtomMatrix

# |1 + eta| below this marks a lossless atom driven exactly on resonance.
MIRROR_TOL = 1e-12
_DET_TOL = 1e-12


@dataclass(frozen=True)
class TransferMatrix:
    """2x2 matrix plus the optical coordinates ``k*x`` of the span it covers.

    The span is needed to strip the trivial free-propagation phase and to refer
    the reflection amplitude to the coordinate origin.
    """

    m: np.ndarray
    kx_left: float = 0.0
    kx_right: float = 0.0

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        # self acts after other, i.e. self lies to the right
        return TransferMatrix(self.m @ other.m, other.kx_left, self.kx_right)

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.m))

    def _check_unimodular(self):
        # rounding of the entries alone contributes ~eps*|m|^2 to the determinant
        scale = max(1.0, float(np.sum(np.abs(self.m) ** 2)))
        if abs(self.det - 1.0) > _DET_TOL * scale:
            raise ValueError(f"transfer matrix determinant {self.det} differs from 1")
        return self


def atom_matrix(p: WaveguideParams, delta: float, x: float = 0.0) -> TransferMatrix:
    """Transfer matrix of a single atom at ``x`` with detuning ``delta``."""
    e = complex(eta(p, delta))
    if abs(e + 1.0) < MIRROR_TOL:
        raise SingularAtomMatrix(
            "lossless atom on exact resonance reflects totally; use the dipole solver "
            "or offset the detuning"
        )
    m = np.array([[2 * e + 1, e], [-e, 1.0]], dtype=complex) / (e + 1)
    return TransferMatrix(m, p.k * x, p.k * x)._check_unimodular()


def propagation_matrix(p: WaveguideParams, x_from: float, x_to: float) -> TransferMatrix:
    ph = np.exp(1j * p.k * (x_to - x_from))
    m = np.array([[ph, 0.0], [0.0, 1.0 / ph]], dtype=complex)
    return TransferMatrix(m, p.k * x_from, p.k * x_to)._check_unimodular()


def composite(p: WaveguideParams, c: Configuration, x_left: float | None = None,
              x_right: float | None = None) -> TransferMatrix:
    """Ordered product of propagation and atom matrices spanning ``[x_left, x_right]``."""
    x = c.positions
    if x_left is None:
        x_left = float(x[0]) if x.size else 0.0
    if x_right is None:
        x_right = float(x[-1]) if x.size else x_left
    if x.size and not (x_left <= x[0] and x_right >= x[-1]):
        raise ValueError("span must enclose every atom")
    total = TransferMatrix(np.eye(2, dtype=complex), p.k * x_left, p.k * x_left)
    here = x_left
    for xj, dj in zip(x, c.detunings):
        total = atom_matrix(p, dj, xj) @ propagation_matrix(p, here, xj) @ total
        here = xj
    return propagation_matrix(p, here, x_right) @ total


def extract_scatter(tm: TransferMatrix) -> ScatterResult:
    """Transmission and reflection for a wave incident from the left.

    Assumes a unimodular matrix (products of atom and propagation matrices).

    ``t`` has the free-propagation phase across the span divided out, so an
    empty span gives ``t = 1``; ``r`` multiplies ``exp(-ikx)`` globally.
    """
    m = tm.m
    if abs(m[1, 1]) < 1e-14:
        raise NoTransmissionSolution("m22 vanishes; no incoming-wave solution")
    # m11 - m12 m21 / m22 = det(m) / m22, and every matrix built here is unimodular;
    # the reduced form avoids cancellation when the entries are large
    t = np.exp(-1j * (tm.kx_right - tm.kx_left)) / m[1, 1]
    r = -m[1, 0] / m[1, 1] * np.exp(2j * tm.kx_left)
    return ScatterResult(complex(t), complex(r))


def scatter(p: WaveguideParams, c: Configuration) -> ScatterResult:
    if c.n_atoms == 0:
        return ScatterResult(1.0 + 0j, 0j)
    return extract_scatter(composite(p, c))


def scatter_stack(p: WaveguideParams, positions, detunings):
    """Transfer-matrix route for ``B`` configurations of ``N`` atoms at once.

    Shapes as in :func:`corr1d.dipole.scatter_stack`. Rows containing a totally
    reflecting atom (lossless, on resonance) get ``t = 0`` and the reflection of
    the partial stack terminated by that mirror.
    """
    x = np.asarray(positions, dtype=float)
    d = np.asarray(detunings, dtype=float)
    B, G, N = d.shape
    t = np.ones((B, G), dtype=complex)
    r = np.zeros((B, G), dtype=complex)
    if N == 0:
        return t, r
    e = eta(p, d)
    mirror = np.abs(e + 1.0) < MIRROR_TOL
    e = np.where(mirror, 0.0, e)
    done = np.zeros((B, G), dtype=bool)
    # rows of the running product: (m11, m12) and (m21, m22)
    top = np.zeros((B, G, 2), dtype=complex)
    bot = np.zeros((B, G, 2), dtype=complex)
    top[..., 0] = 1.0
    bot[..., 1] = 1.0
    here = x[:, 0]
    for j in range(N):
        ph = np.exp(1j * p.k * (x[:, j] - here))[:, None, None]
        top *= ph
        bot /= ph
        here = x[:, j]
        hit = mirror[..., j] & ~done
        if np.any(hit):
            th, bh = top[hit], bot[hit]
            r[hit] = -(th[:, 0] + bh[:, 0]) / (th[:, 1] + bh[:, 1])
            t[hit] = 0.0
            done |= hit
        ej = e[..., j, None]
        inv = 1.0 / (ej + 1.0)
        top, bot = ((2 * ej + 1) * top + ej * bot) * inv, (bot - ej * top) * inv
    live = ~done
    m22 = bot[..., 1]
    if np.any(np.abs(m22[live]) < 1e-14):
        raise NoTransmissionSolution("m22 vanishes; no incoming-wave solution")
    span = np.exp(-1j * p.k * (x[:, -1] - x[:, 0]))[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(live, span / m22, t)
        r = np.where(live, -bot[..., 0] / m22, r)
    r = r * np.exp(2j * p.k * x[:, 0])[:, None]
    return t, r


def scatter_batch(p: WaveguideParams, positions, detunings):
    """Vectorized counterpart of :func:`corr1d.dipole.scatter_batch`."""
    x = np.asarray(positions, dtype=float)
    d = np.atleast_2d(np.asarray(detunings, dtype=float))
    t, r = scatter_stack(p, x[None], d[None])
    return t[0], r[0]
