"""Exact reduced dynamics of a damped cavity mode (RWA independent-oscillator model).

The environment enters the cavity's evolution only through three real
functions of time, Omega(t), Lambda(t) and N(t).  This package computes them
from a bath of discrete modes, evolves cavity states with the resulting
superoperator or with closed forms, evaluates Wigner functions and the Ramsey
phase-fitting protocol, and checks all of it against brute-force many-body
propagation.
"""
__version__ = "0.1.0"

from .bath import (BathSpec, SpectralDensitySpec, ValidityReport, bath_from_dict, build_bath,
                   load_bath, thermal_occupations, validate_bath)
from .coefficients import (CoefficientTrajectory, accumulate, coefficients_born_markov,
                           coefficients_normal_mode, coefficients_volterra, compute_trajectory,
                           read_trajectory_csv, time_grid, write_trajectory_csv)
from .errors import EtaVanishesError, LeakageWarning, NumericalError, ValidationError
from .evolution import (FockDensityMatrix, SuperoperatorParams, apply, characteristic_fn,
                        moments, natural_orbits, superop_params, trace_distance)
from .oracle import ManyBodyConfig, compare, gaussian_moments, reduce_exact
from .propagator import Blocks, OneExcitationMatrix, assemble, blocks, propagate
from .states import (CatSpec, SqueezeParams, assemble_density, asymptotic_state, evolve_cat,
                     evolve_coherent, evolve_fock_finite_T, evolve_fock_zero_T,
                     evolve_generalized_coherent, evolve_offdiagonal, evolve_squeezed,
                     evolve_thermal)
from .wigner import (PhaseGrid, ProtocolReading, fit_omega, protocol_deltaP,
                     wigner_coherent_closed, wigner_scan, wigner_value)
