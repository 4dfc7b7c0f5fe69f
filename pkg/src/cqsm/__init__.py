"""Numerical spectral analysis of chiral-quark-soliton Dirac operators.

Builds discretized Hamiltonians with operator-valued mass terms on a
periodic grid, computes gap eigenvalues, and turns the model's structural
properties (grading symmetry, spectral pairing, eigenvalue-count bounds,
angular-momentum sector reduction, unitary equivalence) into testable
numerical checks.
"""

__version__ = "0.1.0"

from .algebra import (DiracAlgebra, IsoSpinTriple, XiOperator,
                      grading_matrix, kron_identity_triple, pauli_triple,
                      verify_triple, weyl_matrices, xi_operator)
from .fields import (AmplitudeScaled, ConstantField, CustomRadialProfile,
                     ExpProfile, HedgehogField, MassFieldConfig, MixedProfile,
                     PlanarField, Profile, RationalProfile, eval_PhiF,
                     eval_T, eval_UF, eval_VF, eval_profile, grad_profile,
                     vf_radial)
from .grid import GridSpec, gaussian_state, random_state
from .operators import (DiracHamiltonian, FieldTransform, GradingOperator,
                        K3Operator, MagneticHamiltonian, assemble_H,
                        assemble_H_eps, assemble_HB, apply_XF, dense_matrix)
