"""Eyring-Kramers asymptotics for Witten Laplacians with degenerate critical points."""

__version__ = "0.1.0"

from .errors import (AssumptionError, ConvergenceError, DegenerateEKError, FloorError, InvariantError,
                     ParseError, ResolutionError)
from .potential import CriticalPoint, PotentialSpec, nu_stats, parse_spec
from .labeling import LabelingResult, label_from_oracle, label_spec
from .asymptotics import AsymptoticLaw, asymptotic_law, eyring_kramers, k_index, mu_exponent, z_prefactor
from .laplace import LaplaceProblem, laplace_leading, laplace_quadrature
from .graded import graded_cluster
from .triple_well import triple_well_matrix
from .spectrum import SpectralTable, assemble, smallest_eigs, sweep
from .verify import compare, fit_law

__all__ = [
    "AssumptionError", "ConvergenceError", "DegenerateEKError", "FloorError", "InvariantError", "ParseError",
    "ResolutionError", "CriticalPoint", "PotentialSpec", "nu_stats", "parse_spec", "LabelingResult",
    "label_from_oracle", "label_spec", "AsymptoticLaw", "asymptotic_law", "eyring_kramers", "k_index",
    "mu_exponent", "z_prefactor", "LaplaceProblem", "laplace_leading", "laplace_quadrature", "graded_cluster",
    "triple_well_matrix", "SpectralTable", "assemble", "smallest_eigs", "sweep", "compare", "fit_law",
]
