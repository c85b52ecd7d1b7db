"""Quasi-nonlocal QC coupling for a periodic next-nearest-neighbour chain.

Energies, gradients and Hessians of the atomistic and coupled models,
Newton solves, consistency/stability estimators and existence certificates.
"""

from .calculus import BondFunctional, dual_norm, lp_norm
from .chain import ChainConfig, Deformation
from .potentials import lennard_jones, lennard_jones_cutoff, morse, potential_from_spec
from .qc import RegionPartition, make_partition

__all__ = [
    "BondFunctional",
    "ChainConfig",
    "Deformation",
    "RegionPartition",
    "dual_norm",
    "lennard_jones",
    "lennard_jones_cutoff",
    "lp_norm",
    "make_partition",
    "morse",
    "potential_from_spec",
]
__version__ = "0.1.0"
