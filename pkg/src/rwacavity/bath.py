"""Microscopic model: one cavity mode linearly coupled to discrete bath modes.

Units are hbar = k_B = 1 and all frequencies are angular.  The inverse
temperature may be ``math.inf`` (zero temperature), which is treated as a
regular value throughout the package.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import fixed_quad

from .errors import ValidationError

SPECTRAL_KINDS = ("ohmic", "lorentzian", "flat", "table")


@dataclass(frozen=True)
class BathSpec:
    """System frequency, bath modes ``(omega_k, c_k)`` and inverse temperature."""

    omega: float
    frequencies: np.ndarray
    couplings: np.ndarray
    beta: float = math.inf

    def __post_init__(self):
        freqs = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        cs = np.atleast_1d(np.asarray(self.couplings, dtype=float))
        if freqs.ndim != 1 or freqs.shape != cs.shape:
            raise ValidationError("frequencies and couplings must be 1-d of equal length",
                                  key="modes")
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise ValidationError(f"omega must be positive, got {self.omega}", key="omega")
        if np.any(~np.isfinite(freqs)) or np.any(freqs <= 0):
            raise ValidationError("bath frequencies must be positive", key="modes")
        if np.any(~np.isfinite(cs)):
            raise ValidationError("couplings must be finite", key="modes")
        if not self.beta > 0:
            raise ValidationError(f"beta must be in (0, inf], got {self.beta}", key="beta")
        freqs.setflags(write=False)
        cs.setflags(write=False)
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "couplings", cs)
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def from_modes(cls, omega: float, modes: Sequence[Sequence[float]],
                   beta: float = math.inf) -> "BathSpec":
        modes = list(modes)
        if not modes:
            return cls(omega, np.zeros(0), np.zeros(0), beta)
        arr = np.asarray(modes, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValidationError("modes must be a list of [omega_k, c_k] pairs", key="modes")
        return cls(omega, arr[:, 0], arr[:, 1], beta)

    @property
    def n_modes(self) -> int:
        return self.frequencies.size

    @property
    def modes(self) -> list[tuple[float, float]]:
        return list(zip(self.frequencies.tolist(), self.couplings.tolist()))

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    def with_beta(self, beta: float) -> "BathSpec":
        return BathSpec(self.omega, self.frequencies, self.couplings, beta)

    def scaled(self, s: float) -> "BathSpec":
        """Same geometry with every coupling multiplied by ``s``."""
        return BathSpec(self.omega, self.frequencies, s * self.couplings, self.beta)


@dataclass(frozen=True)
class ValidityReport:
    margin: float
    passed: bool

    def __bool__(self) -> bool:
        return self.passed


def validate_bath(b: BathSpec) -> ValidityReport:
    """Check omega > sum_k c_k^2/omega_k (no inverted normal modes)."""
    margin = b.omega - float(np.sum(b.couplings ** 2 / b.frequencies))
    return ValidityReport(margin=margin, passed=margin > 0)


def require_valid(b: BathSpec) -> BathSpec:
    report = validate_bath(b)
    if not report.passed:
        raise ValidationError(
            f"inverted oscillator: omega - sum c_k^2/omega_k = {report.margin:.6g} <= 0",
            key="modes")
    return b


def thermal_occupations(b: BathSpec) -> np.ndarray:
    """Bose occupations n_k = 1/(exp(beta omega_k) - 1); zeros at beta = inf."""
    if not b.beta > 0:
        raise ValidationError("beta must be positive", key="beta")
    if b.zero_temperature:
        return np.zeros(b.n_modes)
    return 1.0 / np.expm1(b.beta * b.frequencies)


# -- continuous strength functions ------------------------------------------

@dataclass(frozen=True)
class SpectralDensitySpec:
    """Strength function J(omega) to be discretized on ``band`` into ``mode_count`` bins.

    kinds and their ``params``:

    * ``ohmic``: ``eta``, ``omega_c``; J = eta * w * exp(-w / omega_c)
    * ``lorentzian``: ``g``, ``center``, ``width``; a Lorentzian line of total
      weight g^2 and full width ``width``
    * ``flat``: ``g``; J = g^2
    * ``table``: ``omega`` (sorted), ``J`` (>= 0); linear interpolation, zero outside
    """

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    band: tuple[float, float] = (0.0, 1.0)
    mode_count: int = 1

    def __post_init__(self):
        if self.kind not in SPECTRAL_KINDS:
            raise ValidationError(f"unknown spectral kind {self.kind!r}", key="spectral.kind")
        lo, hi = self.band
        if not (lo > 0 and hi > lo and math.isfinite(hi)):
            raise ValidationError(f"band must satisfy 0 < w_min < w_max, got {self.band}",
                                  key="spectral.band")
        if int(self.mode_count) != self.mode_count or self.mode_count < 1:
            raise ValidationError("mode_count must be an integer >= 1",
                                  key="spectral.mode_count")
        object.__setattr__(self, "band", (float(lo), float(hi)))
        object.__setattr__(self, "mode_count", int(self.mode_count))
        _strength(self)  # parameter check

    def strength(self) -> Callable[[np.ndarray], np.ndarray]:
        return _strength(self)


def _param(spec: SpectralDensitySpec, name: str, positive: bool = True) -> float:
    try:
        value = float(spec.params[name])
    except KeyError:
        raise ValidationError(f"{spec.kind} strength function needs {name!r}",
                              key=f"spectral.params.{name}") from None
    if value < 0 or (positive and value == 0):
        raise ValidationError(f"{name} must be {'positive' if positive else 'nonnegative'}",
                              key=f"spectral.params.{name}")
    return value


def _strength(spec: SpectralDensitySpec) -> Callable[[np.ndarray], np.ndarray]:
    if spec.kind == "ohmic":
        eta = _param(spec, "eta", positive=False)
        wc = _param(spec, "omega_c")
        return lambda w: eta * w * np.exp(-w / wc)
    if spec.kind == "lorentzian":
        g = _param(spec, "g", positive=False)
        w0 = _param(spec, "center")
        gamma = _param(spec, "width")
        return lambda w: g ** 2 * (gamma / (2 * np.pi)) / ((w - w0) ** 2 + gamma ** 2 / 4)
    if spec.kind == "flat":
        g = _param(spec, "g", positive=False)
        return lambda w: np.full_like(np.asarray(w, dtype=float), g ** 2)
    # table
    try:
        xs = np.asarray(spec.params["omega"], dtype=float)
        ys = np.asarray(spec.params["J"], dtype=float)
    except KeyError as exc:
        raise ValidationError(f"table strength function needs {exc.args[0]!r}",
                              key=f"spectral.params.{exc.args[0]}") from None
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ValidationError("table needs matching omega/J lists of length >= 2",
                              key="spectral.params")
    if np.any(np.diff(xs) <= 0):
        raise ValidationError("table omega entries must be strictly increasing",
                              key="spectral.params.omega")
    if np.any(ys < 0):
        raise ValidationError("table weights must be nonnegative", key="spectral.params.J")
    return lambda w: np.interp(w, xs, ys, left=0.0, right=0.0)


def build_bath(spec: SpectralDensitySpec, omega: float, beta: float = math.inf,
               rule: str = "midpoint") -> BathSpec:
    """Discretize a strength function into ``spec.mode_count`` equal-width bins.

    Mode frequencies are the bin midpoints.  With ``rule="midpoint"`` (default)
    c_k = sqrt(J(omega_k) * d_omega); with ``rule="integral"`` c_k^2 is the
    20-point Gauss-Legendre integral of J over the bin.
    """
    lo, hi = spec.band
    m = spec.mode_count
    edges = np.linspace(lo, hi, m + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    width = (hi - lo) / m
    J = spec.strength()
    if rule == "midpoint":
        weights = J(mids) * width
    elif rule == "integral":
        weights = np.array([fixed_quad(J, a, b, n=20)[0] for a, b in zip(edges[:-1], edges[1:])])
    else:
        raise ValidationError(f"unknown discretization rule {rule!r}", key="rule")
    return BathSpec(omega, mids, np.sqrt(np.maximum(weights, 0.0)), beta)


# -- JSON configuration ------------------------------------------------------

def _parse_beta(value: Any) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity"):
            return math.inf
        raise ValidationError(f"beta must be a number or 'inf', got {value!r}", key="beta")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"beta must be a number or 'inf', got {value!r}",
                              key="beta") from None


def bath_from_dict(d: Mapping[str, Any]) -> BathSpec:
    """Build a bath from a config mapping with ``modes`` or ``spectral`` entries."""
    if "omega" not in d:
        raise ValidationError("bath config needs 'omega'", key="omega")
    try:
        omega = float(d["omega"])
    except (TypeError, ValueError):
        raise ValidationError("omega must be a number", key="omega") from None
    beta = _parse_beta(d.get("beta", "inf"))
    if ("modes" in d) == ("spectral" in d):
        raise ValidationError("bath config needs exactly one of 'modes' or 'spectral'",
                              key="modes")
    if "modes" in d:
        return BathSpec.from_modes(omega, d["modes"], beta)
    sd = d["spectral"]
    for key in ("kind", "band", "mode_count"):
        if key not in sd:
            raise ValidationError(f"spectral section needs {key!r}", key=f"spectral.{key}")
    spec = SpectralDensitySpec(kind=sd["kind"], params=dict(sd.get("params", {})),
                               band=tuple(sd["band"]), mode_count=sd["mode_count"])
    return build_bath(spec, omega, beta, rule=sd.get("rule", "midpoint"))


def bath_to_dict(b: BathSpec) -> dict:
    return {
        "omega": b.omega,
        "beta": "inf" if b.zero_temperature else b.beta,
        "modes": [[w, c] for w, c in b.modes],
    }


def load_bath(path: str | Path) -> BathSpec:
    with open(path) as fh:
        return bath_from_dict(json.load(fh))
