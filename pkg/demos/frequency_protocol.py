"""Reading the accumulated phase Omega(t) with a two-level probe.

The cavity holds a decaying coherent state.  Scanning the phase of an
injected displacement, the parity signal Delta P peaks where the probe
cancels the field, which gives Omega(t) mod 2 pi.
"""
import math

import numpy as np

from rwacavity import BathSpec, time_grid
from rwacavity.coefficients import coefficients_normal_mode
from rwacavity.wigner import fit_omega, omega_error, protocol_deltaP_closed

bath = BathSpec.from_modes(1.0, [(0.9, 0.05), (1.0, 0.05), (1.1, 0.05)], math.inf)
traj = coefficients_normal_mode(bath, time_grid(20.0, 0.01))
sigma0 = 2.0

Omega, Lambda, _ = traj.at(6.0)
phis = np.linspace(0, 2 * math.pi, 9)
print("Delta P across the probe phase at t=6:")
for phi, dp in zip(phis, protocol_deltaP_closed(sigma0, Lambda, Omega, phis)):
    print(f"  Phi = {phi:5.3f}  Delta P = {dp:.6f}")

times = np.linspace(0.5, 19.5, 20)
fit = fit_omega(sigma0, traj, times, phase_resolution=1e-3)
truth = np.array([traj.at(t)[0] for t in times])
print(f"\nrecovered Omega on {times.size} times, worst error {omega_error(fit.wrapped, truth).max():.2e}")
print(f"unwrapped Omega(19.5) = {fit.unwrapped[-1]:.6f} (true {truth[-1]:.6f})")
