"""Spectral detection and recovery for the spiked tensor model on bosonic Fock spaces."""

from .errors import (ConfigError, ContractViolation, ConvergenceError, DegenerateOperatorError,
                     DegenerateStartError, InvalidArgument, SizeError)
from .fock import (DensityMatrix, FockVector, OccupationBasis, annihilation_stack, apply_monomial, basis_state,
                   enumerate_basis, fock_dimension, product_state, single_particle_density_matrix, tensor_to_fock)
from .hamiltonian import (HamiltonianOperator, build_even, build_hamiltonian, build_odd, materialize_dense,
                          quantum_expectation, tilde_tensor)
from .spectral import (SpectralThresholds, detect, lambda_for_ratio, leading_eigenpair, randomized_rounding,
                       recover, thresholds)
from .tensors import (COMPLEX, REAL, DenseTensor, Ensemble, SignalVector, SpikedInstance, correlation,
                      make_spiked, sample_gaussian_tensor, sample_instance, sample_signal, symmetrize,
                      tensor_power_step)

__version__ = "0.1.0"
