"""Transport quantification for time-periodic flows and SDEs.

Assembles sparse generator discretizations on time-augmented phase space,
solves for leading eigenpairs to extract coherent families and escape-rate
bounds, and validates the bounds with flux calculations and direct
stochastic simulation.
"""

from .augmented import AugmentedGenerator, assemble_hybrid, assemble_ulam, fourier_diff_matrix
from .coherent import CoherentFamily, decay_rate_bound, evolve_slice, family_from_eigenpair
from .fields import VectorField, bickley_jet, double_gyre, make_field, rotating_interval
from .generator import GeneratorMatrix, assemble, assemble_diffusion, assemble_drift
from .grid import AugmentedGrid, BoxPartition, CollocationTime, UlamTime
from .spectral import EigenPair, SpectrumReport, companion_scan, eigs
from .stochastic import (
    EnsembleSpec,
    TransferMatrix,
    em_step,
    escape_estimate,
    sample_transfer_matrix,
)
from .transport import (
    BoundaryPatch,
    MovingBoundaryFamily,
    bordered_gram_identity_check,
    box_family_flux,
    circle_family,
    cumulative_outflow,
    instantaneous_augmented_outflow,
    interval_family,
    survivor_evolve,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedGenerator", "AugmentedGrid", "BoundaryPatch", "BoxPartition",
    "CoherentFamily", "CollocationTime", "EigenPair", "EnsembleSpec",
    "GeneratorMatrix", "MovingBoundaryFamily", "SpectrumReport",
    "TransferMatrix", "UlamTime", "VectorField",
    "assemble", "assemble_diffusion", "assemble_drift", "assemble_hybrid",
    "assemble_ulam", "bickley_jet", "bordered_gram_identity_check",
    "box_family_flux", "circle_family", "companion_scan", "cumulative_outflow",
    "decay_rate_bound", "double_gyre", "eigs", "em_step", "escape_estimate",
    "evolve_slice", "family_from_eigenpair", "fourier_diff_matrix",
    "instantaneous_augmented_outflow", "interval_family", "make_field",
    "rotating_interval", "sample_transfer_matrix", "survivor_evolve",
]
