"""Command-line driver: ``rwacavity run CONFIG`` and ``rwacavity summarize DIR``.

A run is described by one JSON document::

    {
      "bath": {"omega": 1.0, "beta": "inf", "modes": [[0.9, 0.05], [1.1, 0.05]]},
      "route": "normal-mode",
      "grid": {"t_max": 20.0, "dt": 0.01},
      "state": {"type": "coherent", "sigma": 1.0},
      "cutoff": 25,
      "tasks": ["coefficients", "evolve", "wigner-scan", "protocol", "oracle-check"],
      "output": "out"
    }

with optional ``evolve``, ``wigner``, ``protocol`` and ``oracle`` sections
(see ``RunConfig``).  Requested times are snapped to the nearest grid node.
Exit codes: 0 success, 1 invalid input, 2 numerical failure.  On failure an
error document ``{"error": kind, "key": ..., "message": ...}`` is printed and
written to ``error.json`` in the output directory.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bath import BathSpec, bath_from_dict
from .coefficients import (ROUTES, CoefficientTrajectory, coefficients_volterra,
                           compute_trajectory, time_grid, trajectory_to_csv)
from .errors import LeakageWarning, NumericalError, ValidationError
from .evolution import apply, moments, superop_params
from .oracle import MAX_BATH_MODES, ManyBodyConfig, compare, reduce_exact
from .states import state_from_dict
from .wigner import PhaseGrid, fit_omega, omega_error, scan_to_csv, wigner_scan

log = logging.getLogger("rwacavity")

TASKS = ("coefficients", "evolve", "wigner-scan", "protocol", "oracle-check")
LEAKAGE_LIMIT = 1e-6
ORACLE_TOLERANCE = 1e-6
PROTOCOL_TOLERANCE = 1e-5


@dataclass
class RunConfig:
    bath: dict
    grid: dict
    tasks: list
    route: str = "normal-mode"
    state: dict | None = None
    cutoff: int = 25
    output: str = "out"
    evolve: dict = field(default_factory=dict)
    wigner: dict = field(default_factory=dict)
    protocol: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)

    FIELDS = ("bath", "grid", "tasks", "route", "state", "cutoff", "output",
              "evolve", "wigner", "protocol", "oracle")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ValidationError("config must be a JSON object", key="config")
        unknown = sorted(set(d) - set(cls.FIELDS))
        if unknown:
            raise ValidationError(f"unknown config key {unknown[0]!r}", key=unknown[0])
        for key in ("bath", "grid", "tasks"):
            if key not in d:
                raise ValidationError(f"config needs {key!r}", key=key)
        cfg = cls(**copy.deepcopy(d))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in self.FIELDS}

    def validate(self) -> None:
        self.bath_spec()
        if self.route not in ROUTES:
            raise ValidationError(f"route must be one of {ROUTES}", key="route")
        g = self.grid
        if not isinstance(g, dict) or "t_max" not in g or "dt" not in g:
            raise ValidationError("grid needs 't_max' and 'dt'", key="grid")
        if not _number(g["dt"]) or not g["dt"] > 0:
            raise ValidationError("grid.dt must be > 0", key="grid.dt")
        if not _number(g["t_max"]) or not g["t_max"] >= 0:
            raise ValidationError("grid.t_max must be >= 0", key="grid.t_max")
        if not isinstance(self.tasks, list) or not self.tasks:
            raise ValidationError("tasks must be a nonempty list", key="tasks")
        for t in self.tasks:
            if t not in TASKS:
                raise ValidationError(f"unknown task {t!r}; choose from {TASKS}", key="tasks")
        if not isinstance(self.cutoff, int) or self.cutoff < 1:
            raise ValidationError("cutoff must be an integer >= 1", key="cutoff")
        needs_state = {"evolve", "wigner-scan", "oracle-check"} & set(self.tasks)
        if needs_state and self.state is None:
            raise ValidationError(f"task {sorted(needs_state)[0]!r} needs a 'state' section",
                                  key="state")
        if self.state is not None:
            self.initial_state()
        if "oracle-check" in self.tasks and self.bath_spec().n_modes > MAX_BATH_MODES:
            raise ValidationError(f"oracle-check supports at most {MAX_BATH_MODES} modes",
                                  key="bath.modes")

    def bath_spec(self) -> BathSpec:
        if not isinstance(self.bath, dict):
            raise ValidationError("bath must be an object", key="bath")
        try:
            return bath_from_dict(self.bath)
        except ValidationError as exc:
            raise ValidationError(str(exc), key=f"bath.{exc.key}" if exc.key else "bath") from None

    def initial_state(self):
        if not isinstance(self.state, dict):
            raise ValidationError("state must be an object", key="state")
        return state_from_dict(self.state, self.cutoff)

    def times(self) -> np.ndarray:
        return time_grid(float(self.grid["t_max"]), float(self.grid["dt"]))

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config: {exc.strerror}", key="config") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}", key="config") from None
    return RunConfig.from_dict(d)


# -- pipeline ------------------------------------------------------------------

def _snap(times, grid: np.ndarray) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0) or np.any(times > grid[-1] + 1e-12):
        raise ValidationError(f"requested times must lie in [0, {grid[-1]:g}]", key="times")
    idx = np.searchsorted(grid, times)
    idx = np.clip(idx, 0, grid.size - 1)
    lower = np.clip(idx - 1, 0, grid.size - 1)
    pick = np.where(np.abs(grid[lower] - times) <= np.abs(grid[idx] - times), lower, idx)
    return grid[pick]


def _default_times(grid: np.ndarray, count: int) -> np.ndarray:
    if grid.size == 1:
        return grid.copy()
    return _snap(np.linspace(grid[0], grid[-1], count), grid)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _complex_pair(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _trajectory(cfg: RunConfig, bath: BathSpec) -> CoefficientTrajectory:
    times = cfg.times()
    substeps = int(cfg.grid.get("substeps", 1))
    if cfg.route == "volterra" and substeps != 1:
        return coefficients_volterra(bath, times, substeps=substeps)
    return compute_trajectory(bath, times, cfg.route)


def run_pipeline(cfg: RunConfig, out: Path, threads: int | None = None) -> dict[str, str]:
    """Execute the configured tasks; returns {artifact name: sha256}."""
    out.mkdir(parents=True, exist_ok=True)
    bath = cfg.bath_spec()
    traj = _trajectory(cfg, bath)
    grid = traj.times
    written: dict[str, str] = {}

    def emit(name: str, text: str):
        (out / name).write_text(text)
        written[name] = hashlib.sha256(text.encode()).hexdigest()
        log.info("wrote %s", name)

    rho0 = cfg.initial_state() if cfg.state is not None else None
    for task in cfg.tasks:
        log.info("task %s", task)
        if task == "coefficients":
            emit("coefficients.csv", trajectory_to_csv(traj, bath))
        elif task == "evolve":
            times = _snap(cfg.evolve.get("times", [grid[-1]]), grid)
            for i, t in enumerate(times):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", LeakageWarning)
                    rho = apply(superop_params(traj, t), rho0)
                if rho.leakage > LEAKAGE_LIMIT:
                    raise NumericalError(f"leakage {rho.leakage:.2e} at t={t:g} exceeds "
                                         f"{LEAKAGE_LIMIT:g}; raise the cutoff")
                m = moments(rho)
                doc = {"t": float(t), "leakage": rho.leakage, "trace": rho.trace,
                       "moments": {"mean_a": _complex_pair(m["mean_a"]),
                                   "mean_n": m["mean_n"],
                                   "mean_a2": _complex_pair(m["mean_a2"])},
                       "rho": rho.to_dict()}
                emit(f"evolve_{i:03d}.json", _dump(doc))
        elif task == "wigner-scan":
            wc = cfg.wigner
            t = float(_snap(wc.get("t", grid[-1]), grid)[0])
            rho = apply(superop_params(traj, t), rho0)
            pg = PhaseGrid.square(float(wc.get("half_width", 3.0)), float(wc.get("step", 0.1)),
                                  complex(*wc.get("center", [0.0, 0.0])))
            emit("wigner_scan.csv", scan_to_csv(pg, wigner_scan(rho, pg, threads=threads)))
        elif task == "protocol":
            pc = cfg.protocol
            sigma0 = float(pc.get("sigma0", 2.0))
            times = (_snap(pc["times"], grid) if "times" in pc
                     else _default_times(grid[1:] if grid.size > 1 else grid,
                                         int(pc.get("count", 50))))
            fit = fit_omega(sigma0, traj, times, float(pc.get("phase_resolution", 1e-3)),
                            on_failure="nan")
            truth = np.array([traj.at(t)[0] for t in times])
            err = omega_error(fit.wrapped, truth)
            doc = fit.to_dict()
            doc.update({"sigma0": sigma0, "Omega_true": truth.tolist(),
                        "max_error": None if np.all(np.isnan(err)) else float(np.nanmax(err)),
                        "tolerance": PROTOCOL_TOLERANCE})
            emit("protocol.json", _dump(doc))
        elif task == "oracle-check":
            oc = cfg.oracle
            times = (_snap(oc["times"], grid) if "times" in oc else _default_times(grid, 5))
            tol = float(oc.get("tolerance", ORACLE_TOLERANCE))
            reduced = reduce_exact(ManyBodyConfig(bath, rho0), times)
            checks = []
            for t, red in zip(times, reduced):
                rep = compare(red, apply(superop_params(traj, t), rho0))
                rep = {k: float(v) for k, v in rep.items()}
                checks.append({"t": float(t), **rep, "pass": rep["trace_distance"] < tol})
            doc = {"tolerance": tol, "checks": checks,
                   "max_deviation": max(c["trace_distance"] for c in checks),
                   "pass": all(c["pass"] for c in checks)}
            emit("oracle_report.json", _dump(doc))
    return written


# -- commands -------------------------------------------------------------------

def _fail(kind: str, exc: Exception, out: Path | None, code: int) -> int:
    doc = {"error": kind, "key": getattr(exc, "key", None), "message": str(exc)}
    text = json.dumps(doc, sort_keys=True)
    print(text)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def cmd_run(args) -> int:
    out = Path(args.out) if args.out else None
    try:
        cfg = load_config(args.config)
        out = out or Path(cfg.output)
        start = time.perf_counter()
        artifacts = run_pipeline(cfg, out, threads=args.threads)
        manifest = {"tool": "rwacavity", "version": __version__,
                    "config_hash": cfg.hash(), "config": cfg.to_dict(),
                    "artifacts": artifacts,
                    "wall_clock_seconds": round(time.perf_counter() - start, 3)}
        (out / "manifest.json").write_text(_dump(manifest))
    except ValidationError as exc:
        return _fail("validation", exc, out, 1)
    except NumericalError as exc:
        return _fail("numerical", exc, out, 2)
    return 0


def _read_coefficients(path: Path):
    with open(path) as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    header, body = rows[0], rows[1:]
    return header, np.array(body, dtype=float) if body else np.zeros((0, len(header)))


def summarize(directory: str | Path, stream=None) -> int:
    stream = stream or sys.stdout
    d = Path(directory)
    mpath = d / "manifest.json"
    if not mpath.exists():
        print(f"no manifest in {d}", file=stream)
        return 1
    manifest = json.loads(mpath.read_text())
    arts = manifest.get("artifacts", {})
    print(f"rwacavity {manifest.get('version')}  config {manifest.get('config_hash', '')[:12]}",
          file=stream)
    if "coefficients.csv" not in arts:
        print("no trajectories", file=stream)
    else:
        header, data = _read_coefficients(d / "coefficients.csv")
        cols = {name: i for i, name in enumerate(header)}
        print(f"{'t':>10} {'Lambda':>14} {'Omega':>14} {'N':>14}", file=stream)
        n = data.shape[0]
        picks = sorted({0, n // 4, n // 2, (3 * n) // 4, n - 1}) if n else []
        for i in picks:
            row = data[i]
            print(f"{row[cols['t']]:10.4f} {row[cols['Lambda']]:14.8g} "
                  f"{row[cols['Omega']]:14.8g} {row[cols['N']]:14.8g}", file=stream)
    if "oracle_report.json" in arts:
        rep = json.loads((d / "oracle_report.json").read_text())
        for c in rep["checks"]:
            verdict = "PASS" if c["pass"] else "FAIL"
            print(f"{verdict} oracle t={c['t']:g} trace distance {c['trace_distance']:.3e} "
                  f"(< {rep['tolerance']:g})", file=stream)
    if "protocol.json" in arts:
        rep = json.loads((d / "protocol.json").read_text())
        err = rep.get("max_error")
        ok = err is not None and err < rep["tolerance"] and not rep["failures"]
        shown = "n/a" if err is None else f"{err:.3e}"
        print(f"{'PASS' if ok else 'FAIL'} protocol max |Omega_fit - Omega| = {shown} "
              f"(< {rep['tolerance']:g}), {len(rep['failures'])} failed times", file=stream)
    evolved = sorted(k for k in arts if k.startswith("evolve_"))
    for name in evolved:
        doc = json.loads((d / name).read_text())
        print(f"evolve t={doc['t']:g}: <n> = {doc['moments']['mean_n']:.8g}, "
              f"leakage {doc['leakage']:.2e}", file=stream)
    return 0


def cmd_summarize(args) -> int:
    return summarize(args.dir)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rwacavity",
                                description="Exact damped-cavity dynamics in the RWA "
                                            "independent-oscillator model.")
    p.add_argument("--verbose", "-v", action="store_true")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute the tasks of a config file")
    r.add_argument("config", nargs="?")
    r.add_argument("--config", dest="config_flag")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--threads", type=int, default=None,
                   help="worker cap for phase-space scans (default: all cores)")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("summarize", help="print a table from an artifact directory")
    s.add_argument("dir")
    s.set_defaults(func=cmd_summarize)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        args.config = args.config_flag or args.config
        if not args.config:
            parser.error("run needs a config path")
        if args.threads is not None and args.threads < 1:
            parser.error("--threads must be >= 1")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
