"""Wigner function by displaced parity, and the Ramsey phase-fitting protocol.

Normalization: W(alpha) = 2 Tr[D(-alpha) rho D(alpha) Pi] with Pi the parity,
so a coherent state |s> gives 2 exp(-2|s - alpha|^2) (peak 2, not 2/pi).
Since D(alpha) Pi D(-alpha) = D(2 alpha) Pi,

    W(alpha) = 2 sum_{m,n} rho_mn (-1)^m <n|D(2 alpha)|m>,

which is exact for any rho supported below the cutoff because the matrix
elements are closed-form.

The probe-atom readout is Delta P = W(-alpha)/2.  Injecting
alpha = -sigma0 e^{-Lambda} e^{-i Phi} into a coherent state at
sigma0 e^{-i Omega - Lambda} gives exp(-8 sigma0^2 e^{-2 Lambda} sin^2((Omega - Phi)/2)),
maximal at Phi = Omega; ``fit_omega`` locates that maximum.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .coefficients import CoefficientTrajectory
from .errors import LeakageWarning, NumericalError, ValidationError
from .evolution import FockDensityMatrix
from .fock import displacement_element_table

LEAKAGE_BUDGET = 1e-6
CONTRAST_FLOOR = 1e-6


class ProtocolError(NumericalError):
    """The phase scan cannot produce an estimate at time ``t``."""

    def __init__(self, message: str, t: float):
        super().__init__(f"t={t:g}: {message}")
        self.t = t


@dataclass(frozen=True)
class PhaseGrid:
    """Rectangular grid of alpha values; rows run over Im(alpha), columns over Re(alpha)."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    step: float

    def __post_init__(self):
        vals = (self.re_min, self.re_max, self.im_min, self.im_max, self.step)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError("grid bounds must be finite", key="grid")
        if not self.step > 0:
            raise ValidationError("grid step must be positive", key="grid.step")
        if self.re_max < self.re_min or self.im_max < self.im_min:
            raise ValidationError("grid bounds are reversed", key="grid")

    @classmethod
    def square(cls, half_width: float, step: float, center: complex = 0) -> "PhaseGrid":
        c = complex(center)
        return cls(c.real - half_width, c.real + half_width,
                   c.imag - half_width, c.imag + half_width, step)

    def _axis(self, lo, hi):
        n = int(math.floor((hi - lo) / self.step + 1e-9)) + 1
        return lo + self.step * np.arange(n)

    @property
    def re(self) -> np.ndarray:
        return self._axis(self.re_min, self.re_max)

    @property
    def im(self) -> np.ndarray:
        return self._axis(self.im_min, self.im_max)

    @property
    def points(self) -> np.ndarray:
        return self.re[None, :] + 1j * self.im[:, None]


def _rho(rho) -> np.ndarray:
    return rho.rho if isinstance(rho, FockDensityMatrix) else np.asarray(rho, dtype=complex)


def displaced_leakage(rho, alpha: complex) -> float:
    """Weight of D(-alpha) rho D(alpha) above the cutoff."""
    r = _rho(rho)
    size = r.shape[0]
    D = displacement_element_table(-alpha, size, size)
    kept = np.trace(D @ r @ D.conj().T).real
    return max(0.0, float(np.trace(r).real - kept))


def wigner_value(rho, alpha: complex, check_leakage: bool = False) -> float:
    r = _rho(rho)
    size = r.shape[0]
    T = displacement_element_table(2 * complex(alpha), size, size)
    parity = (-1.0) ** np.arange(size)
    value = 2 * float(np.sum(r * (T.T * parity[:, None])).real)
    if check_leakage:
        lost = displaced_leakage(r, alpha)
        if lost > LEAKAGE_BUDGET:
            warnings.warn(f"displaced state at alpha={complex(alpha):.3g} loses {lost:.2e} "
                          f"above the cutoff", LeakageWarning, stacklevel=2)
    return value


def wigner_coherent_closed(sigma_t: complex, alpha) -> np.ndarray | float:
    out = 2 * np.exp(-2 * np.abs(complex(sigma_t) - np.asarray(alpha)) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def wigner_scan(rho, grid: PhaseGrid, threads: int | None = None) -> np.ndarray:
    """W on every grid point, shape (len(grid.im), len(grid.re)).

    Rows are evaluated in a thread pool.  The displaced-state leakage is
    checked once, at the grid corner farthest from the origin.
    """
    r = _rho(rho)
    pts = grid.points
    corner = pts.flat[int(np.argmax(np.abs(pts)))]
    wigner_value(r, corner, check_leakage=True)

    def row(i):
        return [wigner_value(r, a) for a in pts[i]]

    workers = threads or os.cpu_count() or 1
    if workers == 1 or pts.shape[0] == 1:
        rows = [row(i) for i in range(pts.shape[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, range(pts.shape[0])))
    return np.array(rows)


def scan_to_csv(grid: PhaseGrid, values: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im", "W"])
    pts = grid.points
    for i in range(pts.shape[0]):
        for j in range(pts.shape[1]):
            w.writerow([repr(float(pts[i, j].real)), repr(float(pts[i, j].imag)),
                        repr(float(values[i, j]))])
    return buf.getvalue()


# -- protocol ---------------------------------------------------------------

@dataclass(frozen=True)
class ProtocolReading:
    t: float
    alpha: complex
    deltaP: float

    def __post_init__(self):
        if abs(self.deltaP) > 1 + 1e-12:
            raise NumericalError(f"|Delta P| = {abs(self.deltaP):.15g} exceeds 1")

    def to_dict(self) -> dict:
        return {"t": self.t, "alpha": [self.alpha.real, self.alpha.imag],
                "deltaP": self.deltaP}


def protocol_deltaP(rho, alpha: complex, t: float = math.nan) -> ProtocolReading:
    alpha = complex(alpha)
    return ProtocolReading(float(t), alpha, 0.5 * wigner_value(rho, -alpha))


def protocol_deltaP_closed(sigma0: float, Lambda: float, Omega: float, Phi):
    """exp(-8 sigma0^2 e^{-2 Lambda} sin^2((Omega - Phi)/2))."""
    return np.exp(-8 * sigma0 ** 2 * math.exp(-2 * Lambda)
                  * np.sin(0.5 * (Omega - np.asarray(Phi))) ** 2)


def readings_to_json(readings: Sequence[ProtocolReading]) -> str:
    return json.dumps([r.to_dict() for r in readings], indent=1)


# A source answers: given t and an array of injected amplitudes alpha,
# what Delta P would the probe atoms report?
Source = Callable[[float, np.ndarray], np.ndarray]


def coherent_source(sigma0: complex, traj: CoefficientTrajectory) -> Source:
    """Noiseless source: the cavity holds |sigma0 e^{-i Omega - Lambda}> at each t."""
    def source(t, alphas):
        Omega, Lambda, _ = traj.at(t)
        st = complex(sigma0) * complex(np.exp(complex(-Lambda, -Omega)))
        return 0.5 * wigner_coherent_closed(st, -np.asarray(alphas))
    return source


def density_source(state_at: Callable[[float], FockDensityMatrix]) -> Source:
    """Source reading Delta P off a number-basis state supplied per time."""
    def source(t, alphas):
        r = state_at(t)
        return np.array([0.5 * wigner_value(r, -a) for a in np.ravel(alphas)])
    return source


@dataclass
class OmegaFit:
    times: np.ndarray
    wrapped: np.ndarray
    unwrapped: np.ndarray
    peak_deltaP: np.ndarray
    failures: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        clean = lambda a: [None if not math.isfinite(x) else float(x) for x in a]
        return {"times": self.times.tolist(), "Omega_wrapped": clean(self.wrapped),
                "Omega_unwrapped": clean(self.unwrapped),
                "peak_deltaP": clean(self.peak_deltaP),
                "failures": {repr(float(k)): v for k, v in self.failures.items()}}


def _local_maxima(y: np.ndarray) -> np.ndarray:
    left, right = np.roll(y, 1), np.roll(y, -1)
    return np.flatnonzero((y > left) & (y >= right))


def _fit_one(t: float, phis: np.ndarray, dp: np.ndarray, h: float):
    top, bottom = float(dp.max()), float(dp.min())
    if not top > 0 or (top - bottom) < CONTRAST_FLOOR * top:
        raise ProtocolError(f"contrast {top - bottom:.2e} below {CONTRAST_FLOOR:g}", t)
    if np.any(dp <= 0):
        raise ProtocolError("Delta P not positive on the scan (non-coherent input)", t)
    y = np.log(dp)
    peaks = _local_maxima(y)
    if peaks.size == 0:
        raise ProtocolError("no interior maximum on the phase scan", t)
    if peaks.size > 1:
        best = y[peaks]
        if np.sum(best >= best.max() - 1e-12 * abs(best.max()) - 1e-15) > 1:
            raise ProtocolError("several equal maxima on the phase scan", t)
        raise ProtocolError(f"phase scan is not unimodal ({peaks.size} maxima)", t)
    k = int(peaks[0])
    ym, y0, yp = y[k - 1], y[k], y[(k + 1) % y.size]
    curv = ym - 2 * y0 + yp
    shift = 0.5 * h * (ym - yp) / curv if curv < 0 else 0.0
    return (phis[k] + shift) % (2 * math.pi), top


def fit_omega(sigma0: float, source, times, phase_resolution: float = 1e-3,
              Lambda=None, on_failure: str = "raise") -> OmegaFit:
    """Recover Omega(t) mod 2 pi by maximizing Delta P over the probe phase Phi.

    ``source`` is a CoefficientTrajectory (treated as a noiseless coherent
    source) or a callable ``source(t, alphas) -> Delta P``.  ``Lambda`` is the
    independently known damping: a callable, an array matching ``times``, or
    None to read it off a trajectory source.  The scan covers [0, 2 pi) with
    step ``phase_resolution``; the maximum is refined by a three-point parabola
    on ln Delta P.  Failed times raise ProtocolError, or with
    ``on_failure="nan"`` give NaN and are listed in ``failures``.
    """
    if not sigma0 > 0:
        raise ValidationError("sigma0 must be positive", key="sigma0")
    if not 0 < phase_resolution < 1:
        raise ValidationError("phase_resolution must be in (0, 1)", key="phase_resolution")
    if on_failure not in ("raise", "nan"):
        raise ValidationError("on_failure must be 'raise' or 'nan'", key="on_failure")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if isinstance(source, CoefficientTrajectory):
        traj = source
        source = coherent_source(sigma0, traj)
        if Lambda is None:
            Lambda = lambda t: traj.at(t)[1]
    if Lambda is None:
        raise ValidationError("Lambda(t) must be supplied for a black-box source", key="Lambda")
    if callable(Lambda):
        lams = np.array([Lambda(t) for t in times], dtype=float)
    else:
        lams = np.broadcast_to(np.asarray(Lambda, dtype=float), times.shape)

    n = int(math.ceil(2 * math.pi / phase_resolution))
    h = 2 * math.pi / n
    phis = h * np.arange(n)
    wrapped = np.full(times.size, np.nan)
    peak = np.full(times.size, np.nan)
    failures = {}
    for i, (t, lam) in enumerate(zip(times, lams)):
        alphas = -sigma0 * math.exp(-lam) * np.exp(-1j * phis)
        dp = np.asarray(source(float(t), alphas), dtype=float)
        try:
            wrapped[i], peak[i] = _fit_one(float(t), phis, dp, h)
        except ProtocolError as exc:
            if on_failure == "raise":
                raise
            failures[float(t)] = str(exc)
    return OmegaFit(times, wrapped, _continue_branch(wrapped), peak, failures)


def _continue_branch(wrapped: np.ndarray) -> np.ndarray:
    """Unwrap by choosing, at each time, the 2 pi branch nearest the previous value."""
    out = np.full_like(wrapped, np.nan)
    prev = None
    for i, w in enumerate(wrapped):
        if not math.isfinite(w):
            continue
        if prev is None:
            out[i] = w
        else:
            out[i] = w + 2 * math.pi * round((prev - w) / (2 * math.pi))
        prev = out[i]
    return out


def omega_error(estimate, truth) -> np.ndarray:
    """|estimate - truth| reduced mod 2 pi to [0, pi]."""
    d = np.mod(np.asarray(estimate) - np.asarray(truth) + math.pi, 2 * math.pi) - math.pi
    return np.abs(d)
