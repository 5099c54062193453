"""Number-basis building blocks shared by the state, Wigner and oracle code.

Matrix elements of the displacement operator are evaluated in closed form
(generalized Laguerre polynomials), so ``displacement_matrix`` is exact
entrywise inside the truncated space rather than a cropped ``expm``.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import expm
from scipy.special import eval_genlaguerre, gammaln


def annihilation(cutoff: int) -> np.ndarray:
    """Truncated lowering operator on ``cutoff + 1`` number states."""
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), k=1)


def number_diagonal(cutoff: int) -> np.ndarray:
    return np.arange(cutoff + 1, dtype=float)


def coherent_amplitudes(sigma: complex, cutoff: int) -> np.ndarray:
    """Fock amplitudes of |sigma>, computed in the log domain."""
    n = np.arange(cutoff + 1)
    sigma = complex(sigma)
    if sigma == 0:
        out = np.zeros(cutoff + 1, dtype=complex)
        out[0] = 1.0
        return out
    log_mod = -0.5 * abs(sigma) ** 2 + n * np.log(abs(sigma)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mod) * np.exp(1j * n * np.angle(sigma))


def displacement_element_table(alpha: complex, rows: int, cols: int) -> np.ndarray:
    """<m|D(alpha)|n> for m < rows, n < cols."""
    alpha = complex(alpha)
    x = abs(alpha) ** 2
    m = np.arange(rows)[:, None]
    n = np.arange(cols)[None, :]
    lo = np.minimum(m, n)
    diff = np.abs(m - n)
    # sqrt(lo!/hi!) |alpha|^diff e^{-x/2} L_lo^{diff}(x), times a phase
    log_mag = 0.5 * (gammaln(lo + 1) - gammaln(lo + diff + 1)) - 0.5 * x
    if x > 0:
        log_mag = log_mag + diff * np.log(np.sqrt(x))
        phase = np.where(m >= n, np.exp(1j * np.angle(alpha) * diff),
                         np.exp(1j * np.angle(-np.conj(alpha)) * diff))
    else:
        phase = np.ones_like(log_mag, dtype=complex)
        log_mag = np.where(diff == 0, log_mag, -np.inf)
    lag = eval_genlaguerre(lo, diff, x)
    return np.exp(log_mag) * lag * phase


def displacement_matrix(alpha: complex, cutoff: int) -> np.ndarray:
    return displacement_element_table(alpha, cutoff + 1, cutoff + 1)


def squeeze_matrix(zeta: complex, cutoff: int) -> np.ndarray:
    """S(zeta) = exp((zeta a^dag^2 - zeta^* a^2)/4) on the truncated basis.

    With zeta = xi e^{i phi}, <a^2> of the squeezed vacuum is e^{i phi} sinh(xi)/2.
    Entries near the top of the basis are polluted by truncation; callers pad
    the basis and crop afterwards.
    """
    a = annihilation(cutoff)
    ad = a.conj().T
    return expm((zeta * ad @ ad - np.conj(zeta) * a @ a) / 4.0)


def conjugate(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return op @ rho @ op.conj().T
