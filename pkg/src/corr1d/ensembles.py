"""Random atomic configurations and Monte Carlo averaging of transmission spectra.

Classical (and ideal-BEC) atoms are placed independently and uniformly.
Zero-temperature free fermions, equivalently a Tonks gas, are drawn from

    |Psi|^2  ~  prod_{i<j} sin^2(pi (x_i - x_j) / L),

the full-shell Slater determinant with periodic orbitals, by Metropolis
sampling. Doppler broadening enters as quasi-static Gaussian per-atom detunings.

Reproducibility: realization ``i`` of a run with master seed ``s`` draws from
``numpy.random.default_rng(SeedSequence(s, spawn_key=(i,)))``; fermionic chains
share one generator seeded with ``spawn_key=(FERMION_STREAM,)``. Work is split in fixed
blocks and merged by realization index, so results do not depend on the number
of worker threads.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numba
import numpy as np

from . import dipole, transfer
from .core import WaveguideParams, eta, single_atom_scatter
from .dipole import MIN_SEPARATION, Configuration
from .errors import ChainNotEquilibrated, Corr1dError
from .twoatom import doppler_average_t

log = logging.getLogger(__name__)

KINDS = ("classical-uniform", "fermionic", "custom")
SOLVERS = ("dipole", "transfer")
FERMION_STREAM = 2 ** 32 - 1
T_FLOOR = 1e-300
BLOCK_SIZE = 32
MAX_CHAINS = 64


@dataclass(frozen=True)
class EnsembleSpec:
    """Statistical description of the atomic cloud.

    Exactly one of ``n_atoms`` (fixed number) and ``nbar`` (Poisson mean) is set;
    for ``kind="custom"`` the fixed ``positions`` are used in every realization.
    """

    kind: str = "classical-uniform"
    box_length: float = 4 * np.pi
    n_atoms: Optional[int] = None
    nbar: Optional[float] = None
    doppler_width: float = 0.0
    base_detuning: float = 0.0
    n_realizations: int = 1
    seed: int = 0
    positions: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}; expected one of {KINDS}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.doppler_width < 0:
            raise ValueError("doppler_width must be non-negative")
        if self.kind == "custom":
            if self.positions is None:
                raise ValueError("custom ensembles need explicit positions")
            object.__setattr__(self, "positions", tuple(float(v) for v in self.positions))
            object.__setattr__(self, "n_atoms", len(self.positions))
            return
        if (self.n_atoms is None) == (self.nbar is None):
            raise ValueError("give exactly one of n_atoms and nbar")
        if self.nbar is not None:
            if self.kind == "fermionic":
                raise ValueError("a fermionic ensemble needs a fixed atom number")
            if self.nbar < 0:
                raise ValueError("nbar must be non-negative")
        elif self.n_atoms < 0:
            raise ValueError("n_atoms must be non-negative")

    @property
    def mean_atoms(self) -> float:
        return float(self.nbar if self.nbar is not None else self.n_atoms)

    @property
    def density(self) -> float:
        return self.mean_atoms / self.box_length


@dataclass(frozen=True)
class SpectrumPoint:
    delta: float
    mean_t: complex
    mean_T: float
    mean_lnT: float
    stderr_T: float
    stderr_lnT: float
    n_used: int
    n_diverged: int


@dataclass
class Spectrum:
    """Per-detuning ensemble statistics, stored column-wise."""

    delta: np.ndarray
    mean_t: np.ndarray
    stderr_t: np.ndarray
    mean_T: np.ndarray
    stderr_T: np.ndarray
    mean_lnT: np.ndarray
    stderr_lnT: np.ndarray
    n_used: np.ndarray
    n_diverged: np.ndarray
    mean_atoms: float = 0.0
    failures: list = field(default_factory=list)

    def __len__(self):
        return self.delta.size

    def __iter__(self) -> Iterator[SpectrumPoint]:
        return iter(self.points)

    @property
    def points(self) -> list:
        return [
            SpectrumPoint(float(self.delta[i]), complex(self.mean_t[i]), float(self.mean_T[i]),
                          float(self.mean_lnT[i]), float(self.stderr_T[i]),
                          float(self.stderr_lnT[i]), int(self.n_used[i]), int(self.n_diverged[i]))
            for i in range(self.delta.size)
        ]

    def scaled_thickness(self, coupling_ratio: float):
        """``-<ln T> / (2 N gamma_w/gamma_t)`` and its standard error."""
        scale = 2.0 * self.mean_atoms * coupling_ratio
        if scale == 0:
            nan = np.full(self.delta.shape, np.nan)
            return nan, nan
        return -self.mean_lnT / scale, self.stderr_lnT / scale


def realization_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _atom_number(spec: EnsembleSpec, rng) -> int:
    if spec.nbar is not None:
        return int(rng.poisson(spec.nbar))
    return int(spec.n_atoms)


def _doppler_detunings(spec: EnsembleSpec, n: int, rng) -> np.ndarray:
    if spec.doppler_width > 0:
        return spec.base_detuning + spec.doppler_width * rng.standard_normal(n)
    return np.full(n, float(spec.base_detuning))


def sample_uniform(spec: EnsembleSpec, rng: np.random.Generator) -> Configuration:
    """Independent uniform positions on ``[0, L]`` with Gaussian per-atom detunings."""
    if spec.kind != "classical-uniform":
        raise ValueError("sample_uniform needs a classical-uniform ensemble")
    n = _atom_number(spec, rng)
    while True:
        x = np.sort(rng.uniform(0.0, spec.box_length, n))
        # coincidences have probability ~1e-9 per pair; redraw rather than merge
        if n < 2 or np.min(np.diff(x)) >= MIN_SEPARATION:
            break
    return Configuration(x, _doppler_detunings(spec, n, rng))


def _log_sine(u, L):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(np.sin(np.pi * u / L)))


def fermion_log_prob(x, L: float) -> float:
    """``ln |Psi|^2`` up to a constant for full-shell periodic free fermions."""
    x = np.asarray(x, dtype=float)
    i, j = np.triu_indices(x.size, 1)
    return float(2.0 * np.sum(_log_sine(x[i] - x[j], L)))


def slater_probability(x, L: float) -> float:
    """``|det phi_n(x_j)|^2`` with plane-wave orbitals; reference evaluator.

    For even N the momenta are half-integer multiples of 2 pi/L so the shell is
    symmetric; either way the result equals ``4^(N(N-1)/2) * prod sin^2``
    divided by ``L^N``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    m = np.arange(n) - (n - 1) / 2.0
    phi = np.exp(2j * np.pi * np.outer(m, x) / L) / np.sqrt(L)
    return float(np.abs(np.linalg.det(phi)) ** 2)


@numba.njit(cache=True)
def _sweep_kernel(x, kicks, log_u, L):
    """Sequential single-particle Metropolis moves on ``x`` (chains x particles), in place.

    Numerator and denominator of the acceptance ratio
    ``prod_j sin^2(a_new - b_j) / sin^2(a_old - b_j)`` are accumulated as
    products (each factor is at most 1) and folded into a log before underflow.
    """
    C, N = x.shape
    w = np.pi / L
    sn = np.sin(w * x)
    cs = np.cos(w * x)
    accepted = 0
    for i in range(N):
        for c in range(C):
            prop = (x[c, i] + kicks[i, c]) % L
            sp = np.sin(w * prop)
            cp = np.cos(w * prop)
            si = sn[c, i]
            ci = cs[c, i]
            num = 1.0
            den = 1.0
            logr = 0.0
            for j in range(N):
                if j == i:
                    continue
                num *= abs(sp * cs[c, j] - cp * sn[c, j])
                den *= abs(si * cs[c, j] - ci * sn[c, j])
                if num < 1e-150 or den < 1e-150:
                    logr += np.log(num) - np.log(den)
                    num = 1.0
                    den = 1.0
            if log_u[i, c] < 2.0 * (logr + np.log(num) - np.log(den)):
                x[c, i] = prop
                sn[c, i] = sp
                cs[c, i] = cp
                accepted += 1
    return accepted


class FermionicSampler:
    """Metropolis sampler of ``|Psi|^2`` running ``n_chains`` chains in lock step.

    Single-particle Gaussian moves with periodic wrap. The step starts at
    ``L/(4N)`` and adapts toward ``target_acceptance`` during burn-in, then stays
    fixed. Configurations are emitted every ``thin`` sweeps, cycling over chains.
    """

    def __init__(self, n_atoms: int, box_length: float, rng: np.random.Generator,
                 n_chains: int = 1, burn_in_sweeps: Optional[int] = None, thin: int = 10,
                 target_acceptance: float = 0.4):
        if n_atoms < 1:
            raise ValueError("need at least one atom")
        self.n = int(n_atoms)
        self.L = float(box_length)
        self.rng = rng
        self.n_chains = int(n_chains)
        self.burn_in_sweeps = 100 * self.n if burn_in_sweeps is None else int(burn_in_sweeps)
        self.thin = int(thin)
        self.target = target_acceptance
        self.step = self.L / (4 * self.n)
        lattice = (np.arange(self.n) + 0.5) * self.L / self.n
        jitter = rng.uniform(-0.25, 0.25, (self.n_chains, self.n)) * self.L / self.n
        self.x = (lattice[None, :] + jitter) % self.L
        self.acceptance = np.nan
        self._equilibrated = False

    def sweep(self) -> float:
        """One Metropolis update of every particle in every chain; returns acceptance."""
        C, N = self.n_chains, self.n
        kicks = self.step * self.rng.standard_normal((N, C))
        log_u = np.log(self.rng.uniform(size=(N, C)))
        accepted = _sweep_kernel(self.x, kicks, log_u, self.L)
        return accepted / (C * N)

    def burn_in(self):
        window = []
        for s in range(self.burn_in_sweeps):
            a = self.sweep()
            window.append(a)
            if len(window) == 10:
                rate = float(np.mean(window))
                self.step = min(self.step * np.exp(rate - self.target), self.L / 2)
                window.clear()
        rates = [self.sweep() for _ in range(max(10, self.thin))]
        self.acceptance = float(np.mean(rates))
        self._check()
        self._equilibrated = True

    def _check(self):
        if not 0.1 <= self.acceptance <= 0.9:
            raise ChainNotEquilibrated(
                f"Metropolis acceptance {self.acceptance:.3f} outside [0.1, 0.9] after adaptation"
            )

    def draw(self, n_configs: int) -> np.ndarray:
        """Sorted positions, shape ``(n_configs, N)``; realization ``i`` comes from
        chain ``i % n_chains``."""
        if not self._equilibrated:
            self.burn_in()
        rounds = -(-n_configs // self.n_chains)
        out = np.empty((rounds * self.n_chains, self.n))
        rates = []
        for r in range(rounds):
            for _ in range(self.thin):
                rates.append(self.sweep())
            out[r * self.n_chains:(r + 1) * self.n_chains] = np.sort(self.x, axis=1)
        self.acceptance = float(np.mean(rates))
        self._check()
        return out[:n_configs]


def sample_fermionic(spec: EnsembleSpec, rng: np.random.Generator) -> Configuration:
    """One configuration from a freshly equilibrated single chain."""
    if spec.kind != "fermionic":
        raise ValueError("sample_fermionic needs a fermionic ensemble")
    sampler = FermionicSampler(spec.n_atoms, spec.box_length, rng)
    x = sampler.draw(1)[0]
    return Configuration(x, _doppler_detunings(spec, spec.n_atoms, rng))


def generate_configurations(spec: EnsembleSpec, burn_in_sweeps: Optional[int] = None) -> list:
    """All realizations of a run, deterministic in ``spec.seed``."""
    R = spec.n_realizations
    if spec.kind == "custom":
        x = np.asarray(spec.positions, dtype=float)
        return [Configuration(x, _doppler_detunings(spec, x.size, realization_rng(spec.seed, i)))
                for i in range(R)]
    if spec.kind == "classical-uniform":
        return [sample_uniform(spec, realization_rng(spec.seed, i)) for i in range(R)]
    if spec.n_atoms == 0:
        return [Configuration(np.zeros(0), np.zeros(0)) for _ in range(R)]
    chains = min(R, MAX_CHAINS)
    chain_rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(FERMION_STREAM,)))
    sampler = FermionicSampler(spec.n_atoms, spec.box_length, chain_rng, n_chains=chains,
                               burn_in_sweeps=burn_in_sweeps)
    xs = sampler.draw(R)
    log.debug("fermionic chains: %d, acceptance %.3f, step %.4g", chains, sampler.acceptance,
              sampler.step)
    return [Configuration(xs[i], _doppler_detunings(spec, spec.n_atoms, realization_rng(spec.seed, i)))
            for i in range(R)]


def _stack_group(p, xs, ds, solver):
    """Solve one equal-N group; returns t (B, G) and per-config failure messages."""
    msgs = [None] * xs.shape[0]
    if solver == "transfer":
        try:
            t, _ = transfer.scatter_stack(p, xs, ds)
            return t, msgs
        except Corr1dError:
            pass
    else:
        try:
            t, _, bad = dipole.scatter_stack(p, xs, ds)
        except np.linalg.LinAlgError:
            pass
        else:
            t = np.where(bad, np.nan + 0j, t)
            for b in np.flatnonzero(bad.any(axis=1)):
                msgs[b] = "coupled-dipole residual exceeds tolerance"
            return t, msgs
    # a singular member spoils the stacked call; isolate it
    scatter_batch = dipole.scatter_batch if solver == "dipole" else transfer.scatter_batch
    t = np.full(ds.shape[:2], np.nan + 0j)
    for b in range(xs.shape[0]):
        try:
            t[b], _ = scatter_batch(p, xs[b], ds[b])
        except Corr1dError as exc:
            msgs[b] = str(exc)
            t[b] = np.nan
    return t, msgs


def _solve_block(p, configs, offsets_grid, solver):
    """Returns t array (B, G) and list of (block-local index, message) failures."""
    G = offsets_grid.size
    t = np.full((len(configs), G), np.nan + 0j)
    failures = []
    sizes = np.array([c.n_atoms for c in configs], dtype=int)
    for n in np.unique(sizes):
        idx = np.flatnonzero(sizes == n)
        xs = np.array([configs[i].positions for i in idx]).reshape(idx.size, n)
        ds = offsets_grid[None, :, None] + np.array(
            [configs[i].detunings for i in idx]).reshape(idx.size, 1, n)
        tg, msgs = _stack_group(p, xs, ds, solver)
        if n:
            # a lossless resonant atom reflects totally: transmission is exactly zero
            mirror = np.any(np.abs(eta(p, ds) + 1.0) < transfer.MIRROR_TOL, axis=2)
            tg = np.where(mirror & ~np.isnan(tg), 0j, tg)
        t[idx] = tg
        failures.extend((int(i), m) for i, m in zip(idx, msgs) if m is not None)
    failures.sort()
    return t, failures


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads is None:
        env = os.environ.get("CORR1D_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def realization_amplitudes(p: WaveguideParams, spec: EnsembleSpec, delta_grid,
                           solver: str = "dipole", threads: Optional[int] = None,
                           configs: Optional[Sequence[Configuration]] = None):
    """Per-realization transmission amplitudes, shape ``(R, G)``.

    The detuning grid shifts every atom's detuning; Doppler offsets drawn for a
    realization are reused across the grid. Failed realizations are NaN rows;
    the list of ``(index, seed, message)`` failures is returned alongside.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    grid = np.asarray(delta_grid, dtype=float)
    if configs is None:
        configs = generate_configurations(spec)
    # per-atom detunings relative to the grid value
    shifted = [Configuration(c.positions, c.detunings - spec.base_detuning) for c in configs]
    blocks = [shifted[i:i + BLOCK_SIZE] for i in range(0, len(shifted), BLOCK_SIZE)]
    n_threads = resolve_threads(threads)
    if n_threads == 1:
        results = [_solve_block(p, blk, grid, solver) for blk in blocks]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(lambda blk: _solve_block(p, blk, grid, solver), blocks))
    t = np.concatenate([res[0] for res in results], axis=0) if results else np.zeros((0, grid.size))
    failures = []
    for bi, (_, fails) in enumerate(results):
        for local, msg in fails:
            idx = bi * BLOCK_SIZE + local
            failures.append((idx, spec.seed, msg))
    return t, failures


def spectrum_statistics(t: np.ndarray, delta_grid, mean_atoms: float = 0.0,
                        t_floor: float = T_FLOOR, failures=None) -> Spectrum:
    """Means and standard errors of ``t``, ``T`` and ``ln T`` per grid point."""
    grid = np.asarray(delta_grid, dtype=float)
    ok = ~np.isnan(t)
    T = np.abs(t) ** 2
    finite_lnT = ok & (T >= t_floor)
    n_ok = ok.sum(axis=0)
    n_used = finite_lnT.sum(axis=0)

    def mean_se(v, mask):
        n = mask.sum(axis=0)
        vv = np.where(mask, v, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            m = vv.sum(axis=0) / n
            dev = np.where(mask, v - m, 0.0)
            var = (np.abs(dev) ** 2).sum(axis=0) / (n - 1)
            se = np.sqrt(var / n)
        se = np.where(n > 1, se, np.where(n == 1, 0.0, np.nan))
        return m, se

    mean_t, se_t = mean_se(t, ok)
    mean_T, se_T = mean_se(T, ok)
    with np.errstate(divide="ignore"):
        lnT = np.log(np.where(finite_lnT, T, 1.0))
    mean_lnT, se_lnT = mean_se(lnT, finite_lnT)
    # every realization diverged: the optical thickness is infinite
    mean_lnT = np.where(n_used == 0, -np.inf, mean_lnT)
    return Spectrum(
        delta=grid,
        mean_t=np.asarray(mean_t, dtype=complex),
        stderr_t=np.asarray(se_t, dtype=float),
        mean_T=np.asarray(mean_T, dtype=float),
        stderr_T=np.asarray(se_T, dtype=float),
        mean_lnT=np.asarray(mean_lnT, dtype=float),
        stderr_lnT=np.asarray(se_lnT, dtype=float),
        n_used=n_used.astype(int),
        n_diverged=(t.shape[0] - n_used).astype(int),
        mean_atoms=mean_atoms,
        failures=list(failures or []),
    )


def average_transmission(p: WaveguideParams, spec: EnsembleSpec, delta_grid,
                         solver: str = "dipole", threads: Optional[int] = None,
                         t_floor: float = T_FLOOR,
                         configs: Optional[Sequence[Configuration]] = None) -> Spectrum:
    """Ensemble-averaged transmission spectrum from an exact solver."""
    t, failures = realization_amplitudes(p, spec, delta_grid, solver, threads, configs)
    for idx, seed, msg in failures:
        log.warning("realization %d (seed %d) skipped: %s", idx, seed, msg)
    return spectrum_statistics(t, delta_grid, spec.mean_atoms, t_floor, failures)


def mft_product(p: WaveguideParams, delta, n, doppler_width: float = 0.0,
                method: str = "faddeeva"):
    """Mean-field transmission ``<t1>^n`` for independent atoms."""
    delta = np.asarray(delta, dtype=float)
    if doppler_width == 0:
        t1 = single_atom_scatter(p, delta).t
    else:
        t1 = np.vectorize(lambda d: doppler_average_t(p, d, doppler_width, method))(delta)
    return (np.asarray(t1, dtype=complex) ** n)[()]


def mft_power(p: WaveguideParams, delta, spec: EnsembleSpec, method: str = "faddeeva"):
    """Mean-field ``T`` for the ensemble's atom-number law.

    Fixed ``N``: ``|<t1>|^(2N)``. Poisson ``N``: its average ``exp(-nbar (1 - |<t1>|^2))``.
    """
    T1 = np.abs(mft_product(p, delta, 1, spec.doppler_width, method)) ** 2
    if spec.nbar is not None:
        return np.exp(-spec.nbar * (1.0 - T1))
    return T1 ** spec.n_atoms
