"""Closed-form evolution of special initial states.

Everything here depends on the environment only through the three scalars
(Omega, Lambda, N) at the evaluation time; pass ``traj.at(t)`` to use a
computed trajectory.  ``assemble_density`` turns any result into a number
basis density matrix, which is how the closed forms are checked against
``evolution.apply``.

Coherent amplitudes follow sigma(t) = sigma0 exp(-i Omega - Lambda).  The
squeeze operator is S(zeta) = exp((zeta a^dag^2 - zeta^* a^2)/4), so for
zeta = xi e^{i phi} the usual squeezing parameter is r = xi/2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from .errors import LeakageWarning, NumericalError, ValidationError
from .evolution import FockDensityMatrix
from .fock import coherent_amplitudes, displacement_element_table, squeeze_matrix

WEIGHT_TAIL = 1e-12
LEAKAGE_BUDGET = 1e-6
DOMAIN_SLACK = 1e-12


def overlap(b: complex, a: complex) -> complex:
    """<b|a> = exp(-|a|^2/2 - |b|^2/2 + b^* a)."""
    return complex(np.exp(-0.5 * abs(a) ** 2 - 0.5 * abs(b) ** 2 + np.conj(b) * a))


# -- coherent and Fock states ------------------------------------------------

def evolve_coherent(sigma0: complex, Omega: float, Lambda: float) -> complex:
    return complex(sigma0) * complex(np.exp(complex(-Lambda, -Omega)))


def evolve_fock_zero_T(m: int, Lambda: float) -> np.ndarray:
    """Binomial weights p_{k,m}, k = 0..m, of an initial |m> at zero temperature."""
    if m < 0:
        raise ValidationError("m must be nonnegative", key="m")
    k = np.arange(m + 1)
    p = math.exp(-2 * Lambda)
    q = -math.expm1(-2 * Lambda)
    logw = (gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1)
            + xlogy(k, p) + xlogy(m - k, q))
    return np.exp(logw)


def _fock_log_weight(m: int, s: np.ndarray, T: float, N: float) -> np.ndarray:
    # P_{m,s} = sum_j C(m,j) C(s,j) T^j (1+N-T)^{m-j} N^{s-j} / (1+N)^{m+s+1}
    s = np.asarray(s)[:, None]
    j = np.arange(m + 1)[None, :]
    valid = j <= s
    jj = np.where(valid, j, 0)
    ss = np.maximum(s, jj)
    terms = (gammaln(m + 1) - gammaln(jj + 1) - gammaln(m - jj + 1)
             + gammaln(ss + 1) - gammaln(jj + 1) - gammaln(ss - jj + 1)
             + xlogy(jj, T) + xlogy(m - jj, 1 + N - T) + xlogy(ss - jj, N))
    terms = np.where(valid, terms, -np.inf)
    with np.errstate(divide="ignore"):
        return logsumexp(terms, axis=1) - (m + s[:, 0] + 1) * math.log1p(N)


def evolve_fock_finite_T(m: int, Lambda: float, N: float,
                         s_max: int | None = None) -> np.ndarray:
    """Weights P_{m,s} of U(t)|m><m| = sum_s P_{m,s} |s><s|.

    Without ``s_max`` the list is extended until the missing tail is below
    ``WEIGHT_TAIL``.  At N = 0 this is the binomial of ``evolve_fock_zero_T``.
    """
    if m < 0:
        raise ValidationError("m must be nonnegative", key="m")
    if N < 0:
        raise ValidationError("N must be nonnegative", key="N")
    T = math.exp(-2 * Lambda)
    if s_max is not None:
        return np.exp(_fock_log_weight(m, np.arange(s_max + 1), T, N))
    if N == 0:
        return evolve_fock_zero_T(m, Lambda)
    size = m + 32
    while True:
        w = np.exp(_fock_log_weight(m, np.arange(size), T, N))
        if 1 - w.sum() < WEIGHT_TAIL and w[-1] < WEIGHT_TAIL:
            return w
        size *= 2


def fock_weights(m: int, Lambda: float, N: float = 0.0) -> np.ndarray:
    return evolve_fock_zero_T(m, Lambda) if N == 0 else evolve_fock_finite_T(m, Lambda, N)


class DisplacedFockMixture(NamedTuple):
    """sum_k weights[k] D(sigma)|k><k|D(sigma)^dag."""

    sigma: complex
    weights: np.ndarray


def evolve_generalized_coherent(m: int, sigma0: complex, Omega: float, Lambda: float,
                                N: float = 0.0) -> DisplacedFockMixture:
    """Initial D(sigma0)|m>: the displacement follows sigma(t), the number part decays."""
    return DisplacedFockMixture(evolve_coherent(sigma0, Omega, Lambda),
                                fock_weights(m, Lambda, N))


# -- coherent dyads and cats --------------------------------------------------

class OffDiagonal(NamedTuple):
    """prefactor |sigma_t><sigmap_t|."""

    prefactor: complex
    sigma_t: complex
    sigmap_t: complex


def evolve_offdiagonal(sigma0: complex, sigma0p: complex, Omega: float,
                       Lambda: float) -> OffDiagonal:
    """U(t)|sigma0><sigma0p| at zero temperature.

    The prefactor <sigma0p|sigma0>/<sigmap(t)|sigma(t)> is taken in the log
    domain: exp((1 - e^{-2 Lambda}) (-|s|^2/2 - |s'|^2/2 + s'^* s)).
    """
    s, sp = complex(sigma0), complex(sigma0p)
    expo = -math.expm1(-2 * Lambda) * (-0.5 * abs(s) ** 2 - 0.5 * abs(sp) ** 2
                                       + np.conj(sp) * s)
    return OffDiagonal(complex(np.exp(expo)), evolve_coherent(s, Omega, Lambda),
                       evolve_coherent(sp, Omega, Lambda))


@dataclass(frozen=True)
class CatSpec:
    sigma0: complex
    parity: str = "even"

    def __post_init__(self):
        if self.parity not in ("even", "odd"):
            raise ValidationError(f"parity must be 'even' or 'odd', got {self.parity!r}",
                                  key="parity")
        object.__setattr__(self, "sigma0", complex(self.sigma0))
        if self.parity == "odd" and self.sigma0 == 0:
            raise ValidationError("odd cat needs sigma0 != 0", key="sigma0")

    @property
    def sign(self) -> int:
        return 1 if self.parity == "even" else -1


def _cat_norm_factor(sigma: complex, sign: int) -> float:
    """1 + sign <-sigma|sigma>, accurate when the overlap is near 1."""
    x = 2 * abs(sigma) ** 2
    return 2 - (-math.expm1(-x)) if sign > 0 else -math.expm1(-x)


class CatEvolution(NamedTuple):
    p_same: float
    p_other: float
    sigma_t: complex
    parity: str


def evolve_cat(cat: CatSpec, Omega: float, Lambda: float) -> CatEvolution:
    """Zero-temperature cat: a mixture of the two parity cats at sigma(t).

    With r = <-sigma0|sigma0>/<-sigma(t)|sigma(t)> = exp(-2(|sigma0|^2 - |sigma(t)|^2)),
    p_same = (1 +- <-s_t|s_t>)(1 + r) / (2 (1 +- <-s0|s0>)) and
    p_other = (1 -+ <-s_t|s_t>)(1 - r) / (2 (1 +- <-s0|s0>)).
    """
    sign = cat.sign
    st = evolve_coherent(cat.sigma0, Omega, Lambda)
    gap = 2 * abs(cat.sigma0) ** 2 * -math.expm1(-2 * Lambda)
    one_minus_r = -math.expm1(-gap)
    denom = 2 * _cat_norm_factor(cat.sigma0, sign)
    p_same = _cat_norm_factor(st, sign) * (2 - one_minus_r) / denom
    p_other = _cat_norm_factor(st, -sign) * one_minus_r / denom
    return CatEvolution(p_same, p_other, st, cat.parity)


# -- squeezed states ---------------------------------------------------------

@dataclass(frozen=True)
class SqueezeParams:
    """zeta = xi e^{i phi}; gamma parameterizes the thermal admixture (inf = pure)."""

    xi: float
    phi: float = 0.0
    gamma: float = math.inf

    def __post_init__(self):
        if not self.xi >= 0:
            raise ValidationError(f"xi must be >= 0, got {self.xi}", key="xi")
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be > 0, got {self.gamma}", key="gamma")

    @property
    def zeta(self) -> complex:
        return self.xi * complex(np.exp(1j * self.phi))

    @property
    def coth_half_gamma(self) -> float:
        return 1.0 if math.isinf(self.gamma) else 1.0 / math.tanh(self.gamma / 2)

    def orbit_weights(self, count: int) -> np.ndarray:
        """e^{-n gamma}(1 - e^{-gamma}) for n < count."""
        out = np.zeros(count)
        if math.isinf(self.gamma):
            out[0] = 1.0
            return out
        n = np.arange(count)
        return np.exp(-n * self.gamma) * -math.expm1(-self.gamma)

    def second_moments(self) -> dict[str, complex]:
        """<a^2> and <{a, a^dag}> of S(zeta) rho_gamma S(zeta)^dag."""
        c = self.coth_half_gamma
        return {"mean_a2": 0.5 * complex(np.exp(1j * self.phi)) * math.sinh(self.xi) * c,
                "mean_anticomm": math.cosh(self.xi) * c}


class SqueezedEvolution(NamedTuple):
    sigma_t: complex
    squeeze: SqueezeParams
    moments: dict


def evolve_squeezed(sigma0: complex, zeta0: SqueezeParams, Omega: float, Lambda: float,
                    N: float = 0.0) -> SqueezedEvolution:
    """Evolve D(sigma0) S(zeta0) rho_gamma S^dag D^dag; the result has the same form.

    <a^2> picks up exp(-2 i Omega - 2 Lambda) and the anticommutator relaxes as
    e^{-2 Lambda} A0 + (1 - e^{-2 Lambda}) + 2N.  Then tanh xi(t) = 2|<a^2>|/A and
    coth(gamma(t)/2) = sqrt(A^2 - 4|<a^2>|^2).  ``moments`` holds the directly
    propagated second moments for comparison with the rebuilt state.
    """
    if N < 0:
        raise ValidationError("N must be nonnegative", key="N")
    m0 = zeta0.second_moments()
    decay = math.exp(-2 * Lambda)
    a2 = complex(np.exp(complex(-2 * Lambda, -2 * Omega))) * m0["mean_a2"]
    anti = decay * m0["mean_anticomm"] - math.expm1(-2 * Lambda) + 2 * N
    ratio = 2 * abs(a2) / anti
    det = anti ** 2 - 4 * abs(a2) ** 2
    if ratio >= 1 + DOMAIN_SLACK or det < 1 - DOMAIN_SLACK:
        raise NumericalError(f"squeeze parameters left their domain "
                             f"(tanh xi = {ratio:.15g}, coth(gamma/2)^2 = {det:.15g})")
    xi = math.atanh(min(ratio, 1.0)) if ratio < 1 else math.inf
    coth_half = math.sqrt(max(det, 1.0))
    # coth(g/2) = c  <=>  g = 2 arccoth(c) = ln((c+1)/(c-1))
    gamma = math.inf if coth_half - 1 <= DOMAIN_SLACK else math.log((coth_half + 1) / (coth_half - 1))
    phi = zeta0.phi - 2 * Omega if zeta0.xi > 0 else 0.0
    return SqueezedEvolution(evolve_coherent(sigma0, Omega, Lambda),
                             SqueezeParams(xi, math.remainder(phi, 2 * math.pi), gamma),
                             {"mean_a2": a2, "mean_anticomm": anti})


# -- thermal states ------------------------------------------------------------

class ThermalEvolution(NamedTuple):
    M_t: float
    T_inst: float | None


def instantaneous_temperature(occupation: float, frequency: float) -> float:
    """T such that a mode of ``frequency`` holds ``occupation`` quanta (hbar = k_B = 1)."""
    if occupation <= 0:
        return 0.0
    return frequency / math.log1p(1 / occupation)


def evolve_thermal(nbar0: float, Lambda: float, N: float, frequency: float | None = None,
                   occupation: str = "M") -> ThermalEvolution:
    """Thermal input with mean nbar0: M(t) = nbar0 e^{-2 Lambda} + N.

    With a ``frequency`` (omega + delta at t) the instantaneous temperature is
    also returned, from M(t) by default or from N(t) with ``occupation="N"``.
    """
    if nbar0 < 0:
        raise ValidationError("nbar0 must be nonnegative", key="nbar0")
    M = nbar0 * math.exp(-2 * Lambda) + N
    if frequency is None:
        return ThermalEvolution(M, None)
    if occupation not in ("M", "N"):
        raise ValidationError("occupation must be 'M' or 'N'", key="occupation")
    return ThermalEvolution(M, instantaneous_temperature(M if occupation == "M" else N,
                                                         frequency))


def thermal_weights(nbar: float, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    if nbar == 0:
        return (n == 0).astype(float)
    return np.exp(n * math.log(nbar / (1 + nbar)) - math.log1p(nbar))


def asymptotic_state(n_inf: float, cutoff: int) -> FockDensityMatrix:
    """Geometric thermal state of mean ``n_inf``."""
    if n_inf < 0:
        raise ValidationError("n_inf must be nonnegative", key="n_inf")
    w = thermal_weights(n_inf, cutoff)
    return FockDensityMatrix(np.diag(w).astype(complex), max(0.0, 1 - float(w.sum())))


# -- number-basis assembly -----------------------------------------------------

def coherent_state(sigma: complex, cutoff: int) -> FockDensityMatrix:
    psi = coherent_amplitudes(sigma, cutoff)
    return _finish(np.outer(psi, psi.conj()))


def fock_state(m: int, cutoff: int) -> FockDensityMatrix:
    if not 0 <= m <= cutoff:
        raise ValidationError(f"Fock level {m} outside 0..{cutoff}", key="m")
    rho = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    rho[m, m] = 1
    return FockDensityMatrix(rho)


def displaced_fock_mixture(sigma: complex, weights, cutoff: int) -> FockDensityMatrix:
    weights = np.asarray(weights, dtype=float)
    cols = displacement_element_table(sigma, cutoff + 1, weights.size)
    return _finish((cols * weights) @ cols.conj().T)


def generalized_coherent_state(m: int, sigma: complex, cutoff: int) -> FockDensityMatrix:
    w = np.zeros(m + 1)
    w[m] = 1
    return displaced_fock_mixture(sigma, w, cutoff)


def cat_state(cat: CatSpec, cutoff: int) -> FockDensityMatrix:
    psi = coherent_amplitudes(cat.sigma0, cutoff) + cat.sign * coherent_amplitudes(-cat.sigma0,
                                                                                  cutoff)
    norm = 2 * _cat_norm_factor(cat.sigma0, cat.sign)
    return _finish(np.outer(psi, psi.conj()) / norm)


def dyad(sigma: complex, sigmap: complex, cutoff: int) -> np.ndarray:
    """|sigma><sigmap| (not a state; used for the off-diagonal law)."""
    return np.outer(coherent_amplitudes(sigma, cutoff), coherent_amplitudes(sigmap, cutoff).conj())


def squeezed_state(sigma: complex, sq: SqueezeParams, cutoff: int,
                   pad: int | None = None) -> FockDensityMatrix:
    """D(sigma) S(zeta) (1 - e^{-gamma}) e^{-gamma n} S^dag D^dag.

    S is exponentiated on a padded basis and cropped; the displacement uses
    exact matrix elements from the padded basis into the target one.
    """
    if pad is None:
        pad = max(40, cutoff, int(8 * math.cosh(sq.xi)))
    big = cutoff + pad
    S = squeeze_matrix(sq.zeta, big)
    w = sq.orbit_weights(big + 1)
    core = (S * w) @ S.conj().T
    D = displacement_element_table(sigma, cutoff + 1, big + 1)
    return _finish(D @ core @ D.conj().T)


def thermal_state(nbar: float, cutoff: int) -> FockDensityMatrix:
    return asymptotic_state(nbar, cutoff)


def _finish(rho: np.ndarray) -> FockDensityMatrix:
    rho = 0.5 * (rho + rho.conj().T)
    return FockDensityMatrix(rho, max(0.0, 1 - float(np.trace(rho).real)))


def assemble_density(result, cutoff: int, parity: str | None = None) -> FockDensityMatrix:
    """Number-basis density matrix of a closed-form result.

    Accepts a complex amplitude (coherent state), a ``DisplacedFockMixture``, a
    bare weight array (diagonal state), a ``CatEvolution``, an ``OffDiagonal``
    (returned as its matrix, not normalized), a ``SqueezedEvolution`` or a
    ``ThermalEvolution``.  A ``LeakageWarning`` is issued when more than
    ``LEAKAGE_BUDGET`` of the trace falls outside the cutoff.
    """
    if isinstance(result, (complex, float, int)) and not isinstance(result, bool):
        out = coherent_state(result, cutoff)
    elif isinstance(result, DisplacedFockMixture):
        out = displaced_fock_mixture(result.sigma, result.weights, cutoff)
    elif isinstance(result, np.ndarray):
        w = np.zeros(cutoff + 1)
        k = min(result.size, cutoff + 1)
        w[:k] = result[:k]
        out = FockDensityMatrix(np.diag(w).astype(complex), max(0.0, 1 - float(w.sum())))
    elif isinstance(result, CatEvolution):
        same = CatSpec(result.sigma_t, result.parity)
        flip = "odd" if result.parity == "even" else "even"
        rho = result.p_same * cat_state(same, cutoff).rho
        if result.p_other > 0:
            rho = rho + result.p_other * cat_state(CatSpec(result.sigma_t, flip), cutoff).rho
        out = _finish(rho)
    elif isinstance(result, OffDiagonal):
        return FockDensityMatrix(result.prefactor * dyad(result.sigma_t, result.sigmap_t, cutoff))
    elif isinstance(result, SqueezedEvolution):
        out = squeezed_state(result.sigma_t, result.squeeze, cutoff)
    elif isinstance(result, ThermalEvolution):
        out = thermal_state(result.M_t, cutoff)
    else:
        raise ValidationError(f"cannot assemble {type(result).__name__}", key="state")
    if out.leakage > LEAKAGE_BUDGET:
        warnings.warn(f"{out.leakage:.2e} of the trace lies above cutoff {cutoff}",
                      LeakageWarning, stacklevel=2)
    return out


# -- initial states from config ------------------------------------------------

STATE_TYPES = ("vacuum", "coherent", "fock", "generalized_coherent", "cat", "squeezed",
               "thermal", "custom")


def _complex(value, key: str) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    try:
        return complex(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{key} must be a number or [re, im]", key=key) from None


def state_from_dict(d: dict, cutoff: int) -> FockDensityMatrix:
    """Initial density matrix from a ``{"type": ..., params}`` mapping."""
    kind = d.get("type")
    if kind not in STATE_TYPES:
        raise ValidationError(f"state type must be one of {STATE_TYPES}, got {kind!r}",
                              key="state.type")

    def need(name):
        if name not in d:
            raise ValidationError(f"{kind} state needs {name!r}", key=f"state.{name}")
        return d[name]

    if kind == "vacuum":
        return fock_state(0, cutoff)
    if kind == "coherent":
        return coherent_state(_complex(need("sigma"), "state.sigma"), cutoff)
    if kind == "fock":
        return fock_state(int(need("n")), cutoff)
    if kind == "generalized_coherent":
        return generalized_coherent_state(int(need("n")),
                                          _complex(need("sigma"), "state.sigma"), cutoff)
    if kind == "cat":
        return cat_state(CatSpec(_complex(need("sigma"), "state.sigma"),
                                 d.get("parity", "even")), cutoff)
    if kind == "squeezed":
        sq = SqueezeParams(float(need("xi")), float(d.get("phi", 0.0)),
                           float(d.get("gamma", math.inf)))
        return squeezed_state(_complex(d.get("sigma", 0.0), "state.sigma"), sq, cutoff)
    if kind == "thermal":
        return thermal_state(float(need("nbar")), cutoff)
    rho = FockDensityMatrix.from_dict(need("rho"))
    return rho.resized(cutoff)
