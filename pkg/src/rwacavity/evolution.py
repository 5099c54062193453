"""Evolution superoperator of the exact master equation in the number basis.

With M = a^dag a (.), P = (.) a^dag a, J = a (.) a^dag and R = a^dag (.) a, the
map rho(0) -> rho(t) factorizes as

    U(t) = v exp(w R) exp(x M) exp(y P) exp(z J)

where every scalar depends on the environment only through Omega(t),
Lambda(t) and N(t).  Each factor is applied to a truncated density matrix by
shifting along its diagonals, so nothing of size (n+1)^2 x (n+1)^2 is built.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .coefficients import CoefficientTrajectory
from .errors import LeakageWarning, ValidationError
from .fock import displacement_matrix

TOP_POPULATION_BUDGET = 1e-8


@dataclass
class FockDensityMatrix:
    """Truncated density matrix on number states 0..cutoff.

    ``leakage`` records probability that an operation pushed above the
    cutoff and discarded.
    """

    rho: np.ndarray
    leakage: float = 0.0

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
            raise ValidationError("density matrix must be square", key="rho")
        self.rho = rho

    @property
    def cutoff(self) -> int:
        return self.rho.shape[0] - 1

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))

    def top_population(self) -> float:
        return float(self.rho[-1, -1].real)

    def populations(self) -> np.ndarray:
        return np.diag(self.rho).real.copy()

    def check(self, trace_tol: float = 1e-10, herm_tol: float = 1e-12,
              eig_floor: float = -1e-10) -> "FockDensityMatrix":
        """Raise ValidationError unless the density-matrix invariants hold."""
        if self.hermiticity_defect() > herm_tol:
            raise ValidationError(f"not Hermitian (defect {self.hermiticity_defect():.2e})",
                                  key="rho")
        if abs(self.trace - 1) > trace_tol:
            raise ValidationError(f"trace {self.trace:.12f} != 1", key="rho")
        if self.eigenvalues()[0] < eig_floor:
            raise ValidationError(f"negative eigenvalue {self.eigenvalues()[0]:.2e}", key="rho")
        return self

    def resized(self, cutoff: int) -> "FockDensityMatrix":
        """Pad with zeros or crop (cropped weight is added to ``leakage``)."""
        n = cutoff + 1
        out = np.zeros((n, n), dtype=complex)
        k = min(n, self.rho.shape[0])
        out[:k, :k] = self.rho[:k, :k]
        lost = max(0.0, self.trace - float(np.trace(out).real))
        return FockDensityMatrix(out, self.leakage + lost)

    def to_dict(self) -> dict:
        return {"cutoff": self.cutoff,
                "rho_re": self.rho.real.tolist(),
                "rho_im": self.rho.imag.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FockDensityMatrix":
        try:
            re = np.asarray(d["rho_re"], dtype=float)
            im = np.asarray(d["rho_im"], dtype=float)
        except KeyError as exc:
            raise ValidationError(f"density matrix needs {exc.args[0]!r}",
                                  key=exc.args[0]) from None
        if re.shape != im.shape:
            raise ValidationError("rho_re and rho_im shapes differ", key="rho_im")
        out = cls(re + 1j * im)
        if "cutoff" in d and int(d["cutoff"]) != out.cutoff:
            raise ValidationError("cutoff does not match matrix size", key="cutoff")
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "FockDensityMatrix":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "FockDensityMatrix":
        return cls.from_json(Path(path).read_text())


def trace_distance(a, b) -> float:
    ra = a.rho if isinstance(a, FockDensityMatrix) else np.asarray(a)
    rb = b.rho if isinstance(b, FockDensityMatrix) else np.asarray(b)
    diff = ra - rb
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


# -- superoperator parameters ----------------------------------------------

@dataclass(frozen=True)
class SuperoperatorParams:
    """Scalars of U(t) = v e^{wR} e^{xM} e^{yP} e^{zJ}, built from (Omega, Lambda, N).

    ``zprime`` is the J coefficient after moving e^{zJ} to the left of
    e^{xM} e^{yP}: zprime = z e^{-(x+y)} = (1+N) ((1+N) e^{2 Lambda} - 1).
    """

    Omega: float
    Lambda: float
    N: float

    def __post_init__(self):
        if self.N < 0:
            raise ValidationError(f"N(t) = {self.N} < 0 (corrupted trajectory)", key="N")

    @property
    def v(self) -> float:
        return 1.0 / (1.0 + self.N)

    @property
    def w(self) -> float:
        return self.N / (1.0 + self.N)

    @property
    def x(self) -> complex:
        # -ln(1+N): fixed by <a>(t) = e^{-i Omega - Lambda} <a>(0) and by trace preservation
        return complex(-self.Lambda - math.log1p(self.N), -self.Omega)

    @property
    def y(self) -> complex:
        return self.x.conjugate()

    @property
    def z(self) -> float:
        return -math.expm1(-2 * self.Lambda - math.log1p(self.N))

    @property
    def zprime(self) -> float:
        return (1 + self.N) * math.expm1(2 * self.Lambda + math.log1p(self.N))

    @property
    def x_tilde(self) -> complex:
        """Zero-temperature x (= x at N = 0)."""
        return complex(-self.Lambda, -self.Omega)

    @property
    def y_tilde(self) -> complex:
        return self.x_tilde.conjugate()

    @property
    def z_tilde(self) -> float:
        return -math.expm1(-2 * self.Lambda)

    @property
    def sigma_factor(self) -> complex:
        """exp(-i Omega - Lambda): the factor multiplying <a> and coherent amplitudes."""
        return complex(np.exp(complex(-self.Lambda, -self.Omega)))


def superop_params(traj: CoefficientTrajectory, t: float) -> SuperoperatorParams:
    return SuperoperatorParams(*traj.at(t))


# -- structured kernels ----------------------------------------------------

def _log_binom(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _lowering_series(rho: np.ndarray, z: complex) -> np.ndarray:
    """sum_k z^k/k! a^k rho (a^dag)^k."""
    size = rho.shape[0]
    out = rho.copy()
    if z == 0:
        return out
    idx = np.arange(size)
    for k in range(1, size):
        m = idx[: size - k]
        amp = np.exp(0.5 * _log_binom(m + k, k))
        out[: size - k, : size - k] += (z ** k) * np.outer(amp, amp) * rho[k:, k:]
    return out


def _raising_series(rho: np.ndarray, w: float) -> np.ndarray:
    """sum_k w^k/k! (a^dag)^k rho a^k, truncated at the cutoff."""
    size = rho.shape[0]
    out = rho.copy()
    if w == 0:
        return out
    idx = np.arange(size)
    for k in range(1, size):
        m = idx[k:]
        amp = np.exp(0.5 * _log_binom(m, k))
        out[k:, k:] += (w ** k) * np.outer(amp, amp) * rho[: size - k, : size - k]
    return out


def _phase_scale(rho: np.ndarray, x: complex, y: complex) -> np.ndarray:
    n = np.arange(rho.shape[0])
    return rho * np.exp(x * n)[:, None] * np.exp(y * n)[None, :]


def apply(params: SuperoperatorParams, rho: FockDensityMatrix,
          order: str = "standard") -> FockDensityMatrix:
    """Evolve ``rho`` with U(t).

    ``order="standard"`` applies e^{zJ}, then e^{xM} e^{yP}, then e^{wR};
    ``order="reordered"`` applies e^{xM} e^{yP}, then e^{z'J}, then e^{wR}.
    Both are the same map; the standard order is better conditioned at large
    Lambda.  Weight raised above the cutoff by e^{wR} is reported in
    ``leakage``.
    """
    if not isinstance(rho, FockDensityMatrix):
        rho = FockDensityMatrix(rho)
    w = params.w
    if rho.cutoff == 0 and w > 0:
        raise ValidationError("cutoff 0 cannot hold any thermally raised weight", key="cutoff")
    if rho.top_population() > TOP_POPULATION_BUDGET:
        warnings.warn(f"input top-level population {rho.top_population():.2e} exceeds "
                      f"{TOP_POPULATION_BUDGET:g}; truncation errors likely",
                      LeakageWarning, stacklevel=2)
    x, y = params.x, params.y
    r = rho.rho
    if order == "standard":
        r = _lowering_series(r, params.z)
        r = _phase_scale(r, x, y)
    elif order == "reordered":
        r = _phase_scale(r, x, y)
        r = _lowering_series(r, params.zprime)
    else:
        raise ValidationError(f"unknown order {order!r}", key="order")
    diag = np.diag(r).real
    untruncated = params.v * float(np.sum(diag * (1 - w) ** -(np.arange(diag.size) + 1.0)))
    r = params.v * _raising_series(r, w)
    kept = float(np.trace(r).real)
    return FockDensityMatrix(r, rho.leakage + max(0.0, untruncated - kept))


# -- analysis --------------------------------------------------------------

def natural_orbits(rho: FockDensityMatrix) -> list[tuple[float, np.ndarray]]:
    """Eigen-decomposition of rho, largest occupation first."""
    r = rho.rho if isinstance(rho, FockDensityMatrix) else np.asarray(rho)
    vals, vecs = np.linalg.eigh(0.5 * (r + r.conj().T))
    order = np.argsort(-vals, kind="stable")
    return [(float(vals[i]), vecs[:, i]) for i in order]


def moments(rho: FockDensityMatrix) -> dict[str, complex | float]:
    """<a>, <a^dag a>, <a^2> and <{a, a^dag}> by trace contractions."""
    r = rho.rho if isinstance(rho, FockDensityMatrix) else np.asarray(rho)
    n = np.arange(r.shape[0])
    mean_a = complex(np.sum(np.sqrt(n[1:]) * np.diag(r, -1)))
    mean_a2 = complex(np.sum(np.sqrt(n[1:-1] * n[2:]) * np.diag(r, -2))) if r.shape[0] > 2 else 0j
    mean_n = float(np.sum(n * np.diag(r).real))
    trace = float(np.trace(r).real)
    return {"mean_a": mean_a, "mean_n": mean_n, "mean_a2": mean_a2,
            "mean_anticomm": 2 * mean_n + trace}


def displace(rho: FockDensityMatrix, sigma: complex) -> FockDensityMatrix:
    """D(sigma) rho D(sigma)^dag with exact matrix elements inside the cutoff."""
    r = rho.rho if isinstance(rho, FockDensityMatrix) else np.asarray(rho)
    D = displacement_matrix(sigma, r.shape[0] - 1)
    return FockDensityMatrix(D @ r @ D.conj().T)


def _exp_ladder(c: complex, cutoff: int, raising: bool) -> np.ndarray:
    """Exact <m|exp(c a)|n> (or exp(c a^dag)) on the truncated space."""
    m = np.arange(cutoff + 1)[:, None]
    n = np.arange(cutoff + 1)[None, :]
    d = n - m if not raising else m - n
    hi = np.maximum(m, n)
    lo = np.minimum(m, n)
    valid = d >= 0
    dd = np.where(valid, d, 0)
    with np.errstate(divide="ignore"):
        logmag = 0.5 * (gammaln(hi + 1) - gammaln(lo + 1)) - gammaln(dd + 1)
    out = np.where(valid, np.exp(logmag) * np.power(complex(c), dd), 0)
    return out


def characteristic_fn_at(rho0: FockDensityMatrix, Omega: float, Lambda: float, N: float,
                         xi: complex) -> complex:
    """C(xi) = Tr e^{i xi a^dag} e^{i xi^* a} rho(t), from the initial state.

    C(xi) = exp(-N |xi|^2) Tr e^{i mu a^dag} e^{i mu^* a} rho(0) with
    mu = xi exp(-Lambda + i Omega).  Normally ordered moments follow as
    <a> = -i dC/dxi^* and <a^dag a> = -d^2C/(dxi dxi^*) at xi = 0.
    """
    r = rho0.rho if isinstance(rho0, FockDensityMatrix) else np.asarray(rho0)
    cutoff = r.shape[0] - 1
    mu = complex(xi) * np.exp(complex(-Lambda, Omega))
    op = _exp_ladder(1j * mu, cutoff, raising=True) @ _exp_ladder(1j * np.conj(mu), cutoff,
                                                                   raising=False)
    return complex(np.exp(-N * abs(xi) ** 2) * np.trace(op @ r))


def characteristic_fn(rho0: FockDensityMatrix, traj: CoefficientTrajectory, t: float,
                      xi: complex) -> complex:
    return characteristic_fn_at(rho0, *traj.at(t), xi)
