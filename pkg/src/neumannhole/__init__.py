"""Spectra of the magnetic Neumann Laplacian on planar domains with a small hole.

P1 finite elements on nested structured meshes, the resolvent Hausdorff
distance between spectra, the identification operators between the full and
perforated domain, and numerical checks of the supporting inequalities.
"""
from .assembly import FormPair, assemble
from .coupling import CouplingPair, closeness_report, estimate_delta
from .eigen import SpectralResult, solve_lowest
from .experiments import SweepConfig, SweepResult, fit_rate, run_sweep, split_ring_study
from .geometry import DomainSpec, HoleSpec, Mesh, check_property_star, triangulate
from .potential import PotentialModel, gauge_shift
from .spectra import SpectrumSet, dbar, hausdorff, match_eigenvalues

__version__ = "0.1.0"

__all__ = [
    "CouplingPair", "DomainSpec", "FormPair", "HoleSpec", "Mesh", "PotentialModel",
    "SpectralResult", "SpectrumSet", "SweepConfig", "SweepResult", "assemble",
    "check_property_star", "closeness_report", "dbar", "estimate_delta", "fit_rate",
    "gauge_shift", "hausdorff", "match_eigenvalues", "run_sweep", "solve_lowest",
    "split_ring_study", "triangulate",
]
