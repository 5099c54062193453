"""Time-dependent master-equation coefficients delta(t), lambda(t), epsilon(t).

Three independent routes produce a :class:`CoefficientTrajectory`:

``normal-mode``
    exact, from one diagonalization of the one-excitation matrix;
``volterra``
    steps the memory equation for eta(t) with trapezoidal quadrature;
``born-markov``
    second order in the couplings, zero temperature only.

Conventions: lambda + i delta = -i omega - d ln(eta)/dt, so eta = exp(-i Omega - Lambda),
and epsilon is the coefficient of the master equation, i.e.
d<a^dag a>/dt = -2 lambda <a^dag a> + 2 epsilon.  The Wigner-function
diffusion coefficient is ``lambda_prime = lambda + 2 epsilon``.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .bath import BathSpec, bath_to_dict, require_valid, thermal_occupations
from .errors import EtaVanishesError, NumericalError, ValidationError
from .propagator import ETA_THRESHOLD, assemble

ROUTES = ("normal-mode", "volterra", "born-markov")
UNDERFLOW = 1e-14
CSV_COLUMNS = ("t", "delta", "lambda", "epsilon", "Omega", "Lambda", "N")


def time_grid(t_max: float, dt: float) -> np.ndarray:
    """Uniform grid 0, dt, ..., t_max (t_max must be a multiple of dt)."""
    if not dt > 0:
        raise ValidationError("dt must be positive", key="grid.dt")
    if t_max < 0:
        raise ValidationError("t_max must be nonnegative", key="grid.t_max")
    n = int(round(t_max / dt))
    if abs(n * dt - t_max) > 1e-9 * max(1.0, t_max):
        raise ValidationError(f"t_max={t_max} is not a multiple of dt={dt}", key="grid.t_max")
    return np.arange(n + 1) * dt


def _grid_step(times: np.ndarray) -> float:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1 or times[0] != 0.0:
        raise ValidationError("time grid must be 1-d and start at t=0", key="grid")
    if times.size == 1:
        return 0.0
    steps = np.diff(times)
    dt = steps[0]
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-9 * dt:
        raise ValidationError("time grid must be uniform and increasing", key="grid")
    return float(dt)


@dataclass
class CoefficientTrajectory:
    """Sampled coefficients and their integrals on a uniform grid.

    ``lam`` holds lambda(t) (``lambda`` is reserved in Python).  ``extras``
    carries route-specific diagnostics such as the sampled eta(t) and
    ``lambda_prime``.
    """

    times: np.ndarray
    delta: np.ndarray
    lam: np.ndarray
    epsilon: np.ndarray
    Omega: np.ndarray
    Lambda: np.ndarray
    Nexc: np.ndarray
    route: str
    omega: float
    extras: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return _grid_step(self.times)

    def __len__(self) -> int:
        return self.times.size

    def at(self, t: float) -> tuple[float, float, float]:
        """(Omega, Lambda, N) at ``t``, linearly interpolated between nodes."""
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-9 * max(1.0, self.times[-1]):
            raise ValidationError(f"t={t} outside trajectory [0, {self.times[-1]}]", key="t")
        return (float(np.interp(t, self.times, self.Omega)),
                float(np.interp(t, self.times, self.Lambda)),
                float(np.interp(t, self.times, self.Nexc)))

    def frequency_at(self, t: float) -> float:
        """Instantaneous frequency omega + delta(t)."""
        return self.omega + float(np.interp(t, self.times, self.delta))


# -- accumulation -----------------------------------------------------------

def _exp_moments(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """I0 = int_0^1 e^{-a u} du and I1 = int_0^1 u e^{-a u} du, stable near a = 0."""
    a = np.asarray(a, dtype=float)
    small = np.abs(a) < 1e-3
    safe = np.where(small, 1.0, a)
    i0 = np.where(small, 1 - a / 2 + a ** 2 / 6 - a ** 3 / 24, -np.expm1(-safe) / safe)
    i1 = np.where(small, 0.5 - a / 3 + a ** 2 / 8 - a ** 3 / 30,
                  (1 - np.exp(-safe) * (1 + safe)) / safe ** 2)
    return i0, i1


@dataclass
class Accumulated:
    Omega: np.ndarray
    Lambda: np.ndarray
    Nexc: np.ndarray
    rk4_deviation: float


def _cumtrapz(y: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(y, dtype=float)
    if y.size > 1:
        out[1:] = np.cumsum(0.5 * dt * (y[1:] + y[:-1]))
    return out


def accumulate(delta, lam, epsilon, times, omega: float = 0.0) -> Accumulated:
    """Integrate sampled coefficients into Omega, Lambda and N.

    With four or more nodes the coefficients are interpolated by cubic
    splines: Omega and Lambda are exact spline integrals, and N(t) =
    2 e^{-2 Lambda(t)} int_0^t epsilon e^{2 Lambda} is advanced interval by
    interval with 4-point Gauss-Legendre quadrature (fourth order overall).
    Shorter grids fall back to the trapezoidal rule.  The occupation equation
    dn/dt = -2 lambda n + 2 epsilon is also integrated by RK4 from n(0) = 0;
    the largest difference from N is reported.
    """
    delta, lam, epsilon = (np.asarray(x, dtype=float) for x in (delta, lam, epsilon))
    times = np.asarray(times, dtype=float)
    if not (delta.shape == lam.shape == epsilon.shape == times.shape):
        raise ValidationError("coefficient arrays and grid must have equal lengths", key="grid")
    dt = _grid_step(times)
    n = times.size
    N = np.zeros(n)
    if n >= 4:
        lam_int = CubicSpline(times, lam).antiderivative()
        Lambda = lam_int(times) - lam_int(0.0)
        del_int = CubicSpline(times, delta).antiderivative()
        Omega = omega * times + del_int(times) - del_int(0.0)
        eps_f = CubicSpline(times, epsilon)
        x, wts = np.polynomial.legendre.leggauss(4)
        s = times[:-1, None] + 0.5 * dt * (x[None, :] + 1)
        lag = Lambda[1:, None] - (lam_int(s) - lam_int(0.0))
        src = dt * (eps_f(s) * np.exp(-2 * lag)) @ wts
        decay = np.exp(-2 * np.diff(Lambda))
        for j in range(n - 1):
            N[j + 1] = decay[j] * N[j] + src[j]
    else:
        Omega = omega * times + _cumtrapz(delta, dt)
        Lambda = _cumtrapz(lam, dt)
        if n > 1:
            a = 2 * np.diff(Lambda)
            i0, i1 = _exp_moments(a)
            decay = np.exp(-a)
            src = 2 * dt * (epsilon[:-1] * i1 + epsilon[1:] * (i0 - i1))
            for j in range(n - 1):
                N[j + 1] = decay[j] * N[j] + src[j]
    return Accumulated(Omega, Lambda, N, _rk4_occupation_deviation(lam, epsilon, times, N))


def _rk4_occupation_deviation(lam, eps, times, N) -> float:
    n = times.size
    if n < 2:
        return 0.0
    dt = times[1] - times[0]
    if n >= 4:
        lam_f, eps_f = CubicSpline(times, lam), CubicSpline(times, eps)
    else:
        lam_f = lambda t: np.interp(t, times, lam)  # noqa: E731
        eps_f = lambda t: np.interp(t, times, eps)  # noqa: E731
    mid = times[:-1] + dt / 2
    lam_mid, eps_mid = lam_f(mid), eps_f(mid)
    y = 0.0
    worst = 0.0
    for j in range(n - 1):
        k1 = -2 * lam[j] * y + 2 * eps[j]
        y2 = y + dt / 2 * k1
        k2 = -2 * lam_mid[j] * y2 + 2 * eps_mid[j]
        y3 = y + dt / 2 * k2
        k3 = -2 * lam_mid[j] * y3 + 2 * eps_mid[j]
        y4 = y + dt * k3
        k4 = -2 * lam[j + 1] * y4 + 2 * eps[j + 1]
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        worst = max(worst, abs(y - N[j + 1]))
    return worst


# -- normal-mode route ------------------------------------------------------

def _unwrapped_phase(z: np.ndarray, dt: float, max_rate: float) -> np.ndarray:
    if max_rate * dt >= np.pi:
        raise NumericalError(
            f"dt={dt} too coarse to continue the phase (rate {max_rate:.3g})")
    return np.unwrap(np.angle(z))


def coefficients_normal_mode(b: BathSpec, times) -> CoefficientTrajectory:
    """Exact coefficients from the eigendecomposition of the one-excitation matrix.

    lambda + i delta = i sum_k c_k eta_k and epsilon =
    -sum_{k,l} c_k n_l Im(gamma_l gamma_kl^*); Omega, Lambda and N are taken
    directly from eta and gamma_k.  The grid quadrature of the sampled
    coefficients is kept in ``extras`` as a consistency check.
    """
    require_valid(b)
    times = np.asarray(times, dtype=float)
    dt = _grid_step(times)
    m = assemble(b)
    nk = thermal_occupations(b)
    c = b.couplings
    w, V = m.eigenfrequencies, m.eigenvectors
    phases = np.exp(-1j * np.outer(times, w))
    # Z is symmetric, so row 0 holds eta and gamma_k = Delta_k
    row = (phases * V[0]) @ V.T
    eta = row[:, 0]
    small = np.abs(eta) < ETA_THRESHOLD
    if np.any(small):
        j = int(np.argmax(small))
        raise EtaVanishesError(float(times[j]), float(abs(eta[j])))
    g = row[:, 1:]
    # sum_k c_k eta_k, with eta_k = Delta_k / eta
    ceta = (g @ c) / eta
    rate = 1j * ceta
    lam = rate.real
    delta = rate.imag
    # sum_k c_k gamma_kl = sum_k c_k Z_kl - (sum_k c_k eta_k) gamma_l, without forming Z
    Q = (phases * (V[1:].T @ c)) @ V[1:].T - ceta[:, None] * g
    # weighted[t, l] = sum_k c_k Im(gamma_l gamma_kl^*)
    weighted = np.imag(g * Q.conj())
    epsilon = -weighted @ nk
    lambda_prime = -weighted @ (2 * nk + 1)

    Lambda = -np.log(np.abs(eta))
    Omega = -_unwrapped_phase(eta, dt, b.omega + float(np.max(np.abs(delta), initial=0.0)))
    N = (np.abs(g) ** 2) @ nk
    # Z(0) = V V^T is the identity only up to rounding
    Lambda[0] = Omega[0] = N[0] = 0.0

    acc = accumulate(delta, lam, epsilon, times, b.omega)
    extras = {
        "eta": eta,
        "lambda_prime": lambda_prime,
        "quadrature_deviation": {
            "Omega": float(np.max(np.abs(acc.Omega - Omega))),
            "Lambda": float(np.max(np.abs(acc.Lambda - Lambda))),
            "N": float(np.max(np.abs(acc.Nexc - N))),
        },
        "rk4_deviation": acc.rk4_deviation,
    }
    if times.size > 2:
        slope = np.max(np.abs(np.diff(lam))) / dt
        scale = max(float(np.max(np.abs(lam))), 1e-300)
        if dt * slope > 0.05 * scale:
            warnings.warn(f"grid may be too coarse: dt*max|dlambda/dt| = {dt * slope:.3g}",
                          RuntimeWarning, stacklevel=2)
    return CoefficientTrajectory(times, delta, lam, epsilon, Omega, Lambda, N,
                                 "normal-mode", b.omega, extras)


def eta_from_normal_modes(b: BathSpec, times) -> np.ndarray:
    """eta(t) = sum_nu e^{-i w_nu t} / (1 + sum_k c_k^2 / (w_nu - omega_k)^2).

    Uses unnormalized eigenvectors (1, c_k/(w - omega_k)); needs every c_k != 0
    so that no normal frequency coincides with a bare bath frequency.
    """
    m = assemble(b)
    w = m.eigenfrequencies
    denom = 1 + np.sum(b.couplings[None, :] ** 2
                       / (w[:, None] - b.frequencies[None, :]) ** 2, axis=1)
    return np.exp(-1j * np.outer(np.asarray(times, dtype=float), w)) @ (1 / denom)


# -- Volterra route ---------------------------------------------------------

def coefficients_volterra(b: BathSpec, times, substeps: int = 1,
                          epsilon_method: str = "product") -> CoefficientTrajectory:
    """Solve d eta/dt + i omega eta + int_0^t K(t - s) eta(s) ds = 0, eta(0) = 1.

    K(s) = sum_k c_k^2 exp(-i omega_k s).  The equation is stepped in the frame
    rotating at omega, eta = e^{-i omega t} chi, with trapezoidal quadrature
    both for the memory integral and for the time step (implicit in the new
    value).  epsilon comes from N(t) = sum_k c_k^2 n_k |int_0^t e^{-i omega_k (t-s)} eta(s) ds|^2
    as epsilon = (e^{-2 Lambda}/2) d/dt (e^{2 Lambda} N).  The derivative is
    taken with the product rule using the exactly known integrand at each node
    (``epsilon_method="product"``) or by central differences (``"central"``,
    one-sided at the ends).

    ``substeps`` > 1 steps on a grid ``substeps`` times finer and samples the
    result back onto ``times``.
    """
    require_valid(b)
    if epsilon_method not in ("product", "central"):
        raise ValidationError(f"unknown epsilon_method {epsilon_method!r}", key="epsilon_method")
    if int(substeps) != substeps or substeps < 1:
        raise ValidationError("substeps must be a positive integer", key="substeps")
    coarse = np.asarray(times, dtype=float)
    _grid_step(coarse)
    if substeps > 1 and coarse.size > 1:
        times = np.arange((coarse.size - 1) * substeps + 1) * (coarse[1] / substeps)
    else:
        substeps = 1
        times = coarse
    dt = _grid_step(times)
    n = times.size
    nk = thermal_occupations(b)
    c2 = b.couplings ** 2
    detune = b.frequencies - b.omega
    # memory kernel in the rotating frame, sampled on the grid
    kernel = np.exp(-1j * np.outer(times, detune)) @ c2
    chi = np.zeros(n, dtype=complex)
    dchi = np.zeros(n, dtype=complex)
    chi[0] = 1.0
    implicit = 1 + dt * dt * kernel[0] / 4
    stop = n
    for j in range(n - 1):
        # A = -dt [K_{j+1} chi_0 / 2 + sum_{i=1}^{j} K_{j+1-i} chi_i]
        hist = kernel[j:0:-1] @ chi[1:j + 1] if j > 0 else 0.0
        A = -dt * (0.5 * kernel[j + 1] * chi[0] + hist)
        chi[j + 1] = (chi[j] + 0.5 * dt * (dchi[j] + A)) / implicit
        dchi[j + 1] = A - 0.5 * dt * kernel[0] * chi[j + 1]
        if abs(chi[j + 1]) < UNDERFLOW:
            stop = j + 1
            break
    extras: dict = {}
    if stop < n:
        warnings.warn(f"|eta| underflow at t={times[stop]:g}; trajectory truncated",
                      RuntimeWarning, stacklevel=2)
        extras["truncated_at"] = float(times[stop])
        times, chi, dchi = times[:stop], chi[:stop], dchi[:stop]

    rate = -dchi / chi
    lam, delta = rate.real, rate.imag
    Lambda = -np.log(np.abs(chi))
    if chi.size > 1:
        step = np.abs(np.angle(chi[1:] / chi[:-1]))
        if np.max(step) >= np.pi / 2 or b.omega * dt >= np.pi:
            raise NumericalError(f"dt={dt} too coarse to continue the phase of eta")
    Omega = b.omega * times - np.unwrap(np.angle(chi))

    # J_k(t) = int_0^t e^{i (omega_k - omega) s} chi(s) ds, so |gamma_k| = c_k |J_k|
    integrand = np.exp(1j * np.outer(times, detune)) * chi[:, None]
    J = np.zeros_like(integrand)
    if times.size > 1:
        J[1:] = np.cumsum(0.5 * dt * (integrand[1:] + integrand[:-1]), axis=0)
    N = (np.abs(J) ** 2) @ (c2 * nk)
    if epsilon_method == "product":
        # d|J_k|^2/dt = 2 Re(J_k^* integrand_k)
        epsilon = np.real(J.conj() * integrand) @ (c2 * nk) + lam * N
    elif times.size > 2:
        boosted = np.exp(2 * Lambda) * N
        epsilon = 0.5 * np.exp(-2 * Lambda) * np.gradient(boosted, dt, edge_order=2)
    else:
        epsilon = np.zeros_like(N)
    eta = np.exp(-1j * b.omega * times) * chi
    if substeps > 1:
        keep = slice(None, None, substeps)
        times, delta, lam, epsilon = times[keep], delta[keep], lam[keep], epsilon[keep]
        Omega, Lambda, N, eta = Omega[keep], Lambda[keep], N[keep], eta[keep]
    extras["eta"] = eta
    extras["substeps"] = substeps
    return CoefficientTrajectory(times, delta, lam, epsilon, Omega, Lambda, N,
                                 "volterra", b.omega, extras)


# -- Born-Markov route -------------------------------------------------------

def _sinc(x):
    return np.sinc(x / np.pi)


def coefficients_born_markov(b: BathSpec, times) -> CoefficientTrajectory:
    """Second-order expansion of ln eta, evaluated in closed form per mode.

    -i Omega - Lambda = -i omega t - sum_k c_k^2 [(1 - e^{-i D t})/D^2 - i t/D],
    D = omega_k - omega (t^2/2 at D = 0).  Thermal terms are not part of this
    approximation: epsilon and N are returned as zeros and flagged in extras.
    """
    times = np.asarray(times, dtype=float)
    _grid_step(times)
    t = times[:, None]
    D = (b.frequencies - b.omega)[None, :]
    c2 = b.couplings ** 2
    x = D * t
    # stable forms of (1-cos x)/D^2, (sin x - x)/D^2, sin(x)/D, (cos x - 1)/D
    re_s = 0.5 * t ** 2 * _sinc(x / 2) ** 2
    small = np.abs(x) < 1e-3
    safeD = np.where(D == 0, 1.0, D)
    im_s = np.where(small, -D * t ** 3 / 6 * (1 - x ** 2 / 20),
                    (np.sin(x) - x) / safeD ** 2)
    lam = (t * _sinc(x)) @ c2
    delta = (-0.5 * D * t ** 2 * _sinc(x / 2) ** 2) @ c2
    Lambda = re_s @ c2
    Omega = b.omega * times + im_s @ c2
    zeros = np.zeros_like(times)
    extras = {"zero_temperature_only": True, "epsilon_omitted": True}
    return CoefficientTrajectory(times, delta, lam, zeros.copy(), Omega, Lambda, zeros.copy(),
                                 "born-markov", b.omega, extras)


def compute_trajectory(b: BathSpec, times, route: str = "normal-mode") -> CoefficientTrajectory:
    if route == "normal-mode":
        return coefficients_normal_mode(b, times)
    if route == "volterra":
        return coefficients_volterra(b, times)
    if route == "born-markov":
        return coefficients_born_markov(b, times)
    raise ValidationError(f"unknown route {route!r}", key="route")


# -- CSV export --------------------------------------------------------------

def bath_hash(b: BathSpec) -> str:
    blob = json.dumps(bath_to_dict(b), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _fmt(x: float) -> str:
    return repr(float(x))


def trajectory_to_csv(traj: CoefficientTrajectory, bath: BathSpec | None = None) -> str:
    """CSV text with a one-line ``# {json}`` metadata header."""
    meta = {"route": traj.route, "dt": traj.dt if len(traj) > 1 else 0.0, "omega": traj.omega}
    if bath is not None:
        meta["bath_hash"] = bath_hash(bath)
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    cols = (traj.times, traj.delta, traj.lam, traj.epsilon, traj.Omega, traj.Lambda, traj.Nexc)
    for row in zip(*cols):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_trajectory_csv(traj: CoefficientTrajectory, path: str | Path,
                         bath: BathSpec | None = None) -> None:
    Path(path).write_text(trajectory_to_csv(traj, bath))


def read_trajectory_csv(path: str | Path) -> CoefficientTrajectory:
    lines = Path(path).read_text().splitlines()
    meta = json.loads(lines[0][2:]) if lines and lines[0].startswith("# ") else {}
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    header = body[0].split(",")
    if tuple(header) != CSV_COLUMNS:
        raise ValidationError(f"unexpected CSV columns {header}", key="csv")
    data = np.array([[float(v) for v in ln.split(",")] for ln in body[1:]]).reshape(-1, 7)
    t, d, lam, eps, Om, La, N = data.T
    return CoefficientTrajectory(t, d, lam, eps, Om, La, N, meta.get("route", "unknown"),
                                 float(meta.get("omega", math.nan)), {"meta": meta})
