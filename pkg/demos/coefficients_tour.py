"""Damping coefficients of a cavity coupled to a few bath modes.

Computes the exact trajectory two ways (normal modes, and the memory
integro-differential equation) and compares both with the second-order
Born-Markov expansion.
"""
import math

import numpy as np

from rwacavity import BathSpec, time_grid
from rwacavity.coefficients import (coefficients_born_markov, coefficients_normal_mode,
                                    coefficients_volterra)

# an asymmetric spectrum, so the frequency shift Omega - t is nonzero
bath = BathSpec.from_modes(1.0, [(0.85, 0.05), (1.0, 0.05), (1.2, 0.06)], beta=1.0)
times = time_grid(20.0, 0.01)

exact = coefficients_normal_mode(bath, times)
memory = coefficients_volterra(bath, times, substeps=4)
weak = coefficients_born_markov(bath, times)

print(f"{'t':>6} {'Lambda':>12} {'Omega - t':>12} {'N':>12} {'lambda':>12}")
for t in (1.0, 5.0, 10.0, 20.0):
    i = int(round(t / 0.01))
    print(f"{t:6.1f} {exact.Lambda[i]:12.6f} {exact.Omega[i] - t:12.6f} "
          f"{exact.Nexc[i]:12.6f} {exact.lam[i]:12.6f}")

gap = max(np.max(np.abs(exact.Lambda - memory.Lambda)), np.max(np.abs(exact.Nexc - memory.Nexc)))
print(f"\nnormal-mode vs memory-kernel route: max gap {gap:.2e}")
print(f"Born-Markov Lambda at t=5: {weak.Lambda[500]:.6f} (exact {exact.Lambda[500]:.6f})")

# at zero temperature lambda' and lambda coincide; here the bath is warm
print(f"max |lambda' - lambda| at beta=1: {np.max(np.abs(exact.extras['lambda_prime'] - exact.lam)):.3e}")
cold = coefficients_normal_mode(bath.with_beta(math.inf), times)
print(f"max |lambda' - lambda| at beta=inf: {np.max(np.abs(cold.extras['lambda_prime'] - cold.lam)):.3e}")
