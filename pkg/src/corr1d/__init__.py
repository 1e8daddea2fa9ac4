"""Light transmission through correlated atomic ensembles in a 1D waveguide.

Exact coupled-dipole and transfer-matrix solvers, Monte Carlo ensembles of
classical and fermionic atoms, two-atom analytics and the effective-medium
mean-field theory they are compared against.
"""
from .core import (ScatterResult, WaveguideParams, eta, polarizability, reflection_phase,
                   single_atom_power, single_atom_scatter)
from .dipole import Configuration, scatter as dipole_scatter, solve_dipoles
from .ensembles import (EnsembleSpec, FermionicSampler, Spectrum, SpectrumPoint,
                        average_transmission, generate_configurations, mft_power, mft_product,
                        sample_fermionic, sample_uniform)
from .errors import Corr1dError
from .meanfield import (SlabMedium, cls_shift, dip_fwhm, extract_peak_shift, mft_width,
                        mft_width_thin, refractive_index, slab_transmission)
from .transfer import TransferMatrix, scatter as transfer_scatter
from .twoatom import (doppler_average_t, two_atom_amplitude, two_atom_average_analytic,
                      two_atom_average_doppler)

__version__ = "0.1.0"

__all__ = [
    "ScatterResult", "WaveguideParams", "eta", "polarizability", "reflection_phase",
    "single_atom_power", "single_atom_scatter", "Configuration", "dipole_scatter",
    "solve_dipoles", "EnsembleSpec", "FermionicSampler", "Spectrum", "SpectrumPoint",
    "average_transmission", "generate_configurations", "mft_power", "mft_product",
    "sample_fermionic", "sample_uniform", "Corr1dError", "SlabMedium", "cls_shift", "dip_fwhm",
    "extract_peak_shift", "mft_width", "mft_width_thin", "refractive_index",
    "slab_transmission", "TransferMatrix", "transfer_scatter", "doppler_average_t",
    "two_atom_amplitude", "two_atom_average_analytic", "two_atom_average_doppler",
]
