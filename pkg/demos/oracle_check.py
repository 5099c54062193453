"""Closed-form evolution against brute-force many-body propagation.

A two-mode warm bath is small enough to propagate the full cavity + bath
state exactly and trace the bath out.  The reduced states agree with the
superoperator built from Omega, Lambda and N.
"""
import math

from rwacavity import BathSpec, time_grid
from rwacavity.coefficients import coefficients_normal_mode
from rwacavity.evolution import apply, superop_params
from rwacavity.oracle import ManyBodyConfig, compare, reduce_exact
from rwacavity.states import CatSpec, cat_state, fock_state

bath = BathSpec.from_modes(1.0, [(0.8, 0.1), (1.3, 0.15)], beta=1.0)
traj = coefficients_normal_mode(bath, time_grid(6.0, 0.01))
times = [1.0, 3.0, 6.0]

for name, rho0 in (("|2>", fock_state(2, 20)), ("even cat", cat_state(CatSpec(1.0), 20))):
    reduced = reduce_exact(ManyBodyConfig(bath, rho0), times)
    for t, red in zip(times, reduced):
        rep = compare(red, apply(superop_params(traj, t), rho0))
        print(f"{name:9s} t={t:3.1f}  trace distance {rep['trace_distance']:.2e}  "
              f"d<n> {rep['d_mean_n']:.2e}")
