"""Positive-commutator (Mourre) estimates for sparse-bump discrete Schroedinger operators."""

__version__ = '0.1.0'

from .errors import (ArgumentError, CapacityError, NumericError, PlacementError,
                     UnsupportedCombinationError)
from .lattice import (Boundary, EigenSystem, LatticeBox, LatticeOperator, Symmetry,
                      build_conjugate_operator, build_diagonal, build_identity,
                      build_laplacian, build_position, build_shift, bulk_commutator,
                      commutator, eigendecompose, laplacian_boundary_correction,
                      operator_norm)
from .potential import (BumpProfile, CouplingDistribution, PotentialSpec, Realization,
                        build_support, check_hypothesis, make_bump_profile,
                        sample_realization)
from .mourre import (build_cutoff, lambda_threshold_scan, lemma1_check, mourre_check,
                     torus_scan)
from .spectral import (density_of_states, make_weyl_vector, predict_essential_spectrum,
                       weyl_residual_check)
