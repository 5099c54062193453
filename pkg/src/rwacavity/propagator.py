"""Exact one-excitation dynamics of the cavity + bath Hamiltonian.

The Heisenberg solution is linear, a_nu(t) = sum_sigma Z_{nu sigma}(t) a_sigma(0),
with Z(t) = exp(-i h t) for the real-symmetric frequency/coupling matrix h
(index 0 is the cavity).  One diagonalization gives Z at any time.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .bath import BathSpec, require_valid
from .errors import EtaVanishesError, NumericalError

ETA_THRESHOLD = 1e-12


@dataclass(frozen=True)
class OneExcitationMatrix:
    h: np.ndarray

    @cached_property
    def _eig(self) -> tuple[np.ndarray, np.ndarray]:
        try:
            w, v = np.linalg.eigh(self.h)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigendecomposition failed: {exc}") from exc
        return w, v

    @property
    def eigenfrequencies(self) -> np.ndarray:
        return self._eig[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        """Columns are the normal modes; row 0 is the cavity component."""
        return self._eig[1]

    @property
    def size(self) -> int:
        return self.h.shape[0]

    def evolution_rows(self, times: np.ndarray) -> np.ndarray:
        """Cavity row Z_{0 sigma}(t) for many times at once, shape (nt, M+1).

        Z is symmetric, so this is also the column Z_{sigma 0}.
        """
        w, v = self._eig
        phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), w))
        return (phases * v[0]) @ v.T

    def evolution_stack(self, times: np.ndarray) -> np.ndarray:
        """Full Z(t) for many times, shape (nt, M+1, M+1)."""
        w, v = self._eig
        phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), w))
        return np.einsum("am,tm,bm->tab", v, phases, v, optimize=True)


def assemble(b: BathSpec) -> OneExcitationMatrix:
    require_valid(b)
    h = np.diag(np.concatenate(([b.omega], b.frequencies)))
    h[0, 1:] = b.couplings
    h[1:, 0] = b.couplings
    return OneExcitationMatrix(h)


@dataclass(frozen=True)
class SinglePropagator:
    t: float
    Z: np.ndarray

    @property
    def eta(self) -> complex:
        return complex(self.Z[0, 0])

    def unitarity_defect(self) -> float:
        return float(np.linalg.norm(self.Z.conj().T @ self.Z - np.eye(self.Z.shape[0])))


def propagate(m: OneExcitationMatrix, t: float) -> SinglePropagator:
    if t < 0:
        raise ValueError("t must be nonnegative")
    w, v = m.eigenfrequencies, m.eigenvectors
    Z = (v * np.exp(-1j * w * t)) @ v.T
    return SinglePropagator(float(t), Z)


@dataclass(frozen=True)
class Blocks:
    """Named pieces of Z and the derived couplings of the Heisenberg solution.

    a(t)   = eta a(0) + sum_k gamma_k a_k(0)
    a_k(t) = eta_k a(t) + sum_l gamma_kl a_l(0)
    """

    eta: complex
    gamma: np.ndarray
    Delta: np.ndarray
    Gamma: np.ndarray
    eta_k: np.ndarray
    gamma_kl: np.ndarray

    def sum_rule_defects(self) -> dict[str, float]:
        """Residuals of the three unitarity identities between the blocks."""
        g, G, D, eta = self.gamma, self.Gamma, self.Delta, self.eta
        return {
            "gamma_norm": abs(np.vdot(g, g).real - (1 - abs(eta) ** 2)),
            "gamma_Gamma": float(np.max(np.abs(G.conj() @ g + eta * D.conj()), initial=0.0)),
            "beta_k": float(np.max(np.abs(self.gamma_kl.conj() @ g + self.eta_k.conj()),
                                   initial=0.0)),
        }


def blocks(p: SinglePropagator) -> Blocks:
    Z = p.Z
    eta = complex(Z[0, 0])
    if abs(eta) < ETA_THRESHOLD:
        raise EtaVanishesError(p.t, abs(eta))
    gamma = Z[0, 1:]
    Delta = Z[1:, 0]
    Gamma = Z[1:, 1:]
    eta_k = Delta / eta
    gamma_kl = Gamma - np.outer(eta_k, gamma)
    return Blocks(eta, gamma, Delta, Gamma, eta_k, gamma_kl)
