"""Indefinite theta series of arbitrary signature via generalized error functions."""

from .chains import (
    CubicalCollection,
    PositionCertificate,
    SimplicialCollection,
    certify,
    good_position_cubical,
    good_position_simplicial,
    intersection_number_cubical,
    phi,
    phi_cubical,
    phi_simplicial,
)
from .generf import E, ErrorFunctionEvaluator, GeneralizedErf, eq_oracle, eq_recursive
from .quadspace import BilinearSpace, NegativeFrame, majorant_matrix, orthonormalize_negative
from .theta import (
    Coset,
    EvenLattice,
    QExpansion,
    TauPoint,
    ThetaValue,
    completed_theta,
    enumerate_coset,
    holomorphic_theta,
    lowering_fd,
    shadow_value,
    siegel_theta,
)

__version__ = "0.1.0"
