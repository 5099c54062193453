"""Brute-force reference dynamics for small baths.

``reduce_exact`` propagates the full cavity + bath state with the many-body
Hamiltonian and traces the bath out.  The Hamiltonian conserves the total
excitation number, so it is diagonalized one excitation sector at a time;
inside a sector nothing is truncated.  A thermal bath is handled as the exact
mixture over bath number configurations, cut where the discarded
probability falls below ``tail``.  Initial cavity amplitudes below
``amplitude_floor`` are dropped.

``gaussian_moments`` is a second, cheaper reference that only uses the
one-excitation propagator and the bath moment rules.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bath import BathSpec, require_valid, thermal_occupations
from .errors import ValidationError
from .evolution import FockDensityMatrix, moments, trace_distance
from .propagator import assemble

MAX_BATH_MODES = 4
MAX_SECTOR_DIM = 5000
MAX_CONFIGURATIONS = 20000


@dataclass
class ManyBodyConfig:
    bath: BathSpec
    system: FockDensityMatrix
    tail: float = 1e-8
    amplitude_floor: float = 1e-13
    max_dim: int = 10 ** 6

    def __post_init__(self):
        if self.bath.n_modes > MAX_BATH_MODES:
            raise ValidationError(f"oracle supports at most {MAX_BATH_MODES} bath modes",
                                  key="modes")
        if not isinstance(self.system, FockDensityMatrix):
            self.system = FockDensityMatrix(self.system)
        require_valid(self.bath)


def _compositions(total: int, parts: int):
    """All tuples of ``parts`` nonnegative ints summing to ``total``."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cut:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 2 - prev)
        yield tuple(out)


def _sector_size(total: int, modes: int) -> int:
    return math.comb(total + modes - 1, modes - 1)


@lru_cache(maxsize=8)
def _sectors(omega: float, freqs: tuple, couplings: tuple):
    return _SectorCache(omega, np.array(freqs), np.array(couplings))


class _SectorCache:
    """Lazily diagonalized excitation-number sectors of one Hamiltonian."""

    def __init__(self, omega, freqs, couplings):
        self.freqs = np.concatenate(([omega], freqs))
        self.c = couplings
        self.modes = self.freqs.size
        self._store = {}

    def sector(self, K: int):
        if K not in self._store:
            basis = list(_compositions(K, self.modes))
            if len(basis) > MAX_SECTOR_DIM:
                raise ValidationError(
                    f"excitation sector {K} has dimension {len(basis)} > {MAX_SECTOR_DIM}",
                    key="cutoff")
            index = {s: i for i, s in enumerate(basis)}
            occ = np.array(basis, dtype=float).reshape(len(basis), self.modes)
            H = np.diag(occ @ self.freqs)
            for i, s in enumerate(basis):
                if s[0] == 0:
                    continue
                # a_k^dag a term: move one quantum from the cavity to mode k
                for k in range(1, self.modes):
                    if self.c[k - 1] == 0:
                        continue
                    t = list(s)
                    t[0] -= 1
                    t[k] += 1
                    j = index[tuple(t)]
                    amp = self.c[k - 1] * math.sqrt(s[0] * t[k])
                    H[j, i] += amp
                    H[i, j] += amp
            E, V = np.linalg.eigh(H)
            self._store[K] = (basis, index, occ[:, 0].astype(int), E, V)
        return self._store[K]


def _bath_configurations(b: BathSpec, tail: float, limit: int = MAX_CONFIGURATIONS):
    """(occupation tuple, probability) pairs of the thermal bath, renormalized.

    Configurations are visited most probable first (best-first search over the
    occupation lattice) until the discarded mass is below ``tail``.
    """
    if b.zero_temperature or b.n_modes == 0:
        return [(tuple([0] * b.n_modes), 1.0)]
    q = np.exp(-b.beta * b.frequencies)
    logq = np.log(q)
    log_ground = float(np.sum(np.log1p(-q)))
    start = tuple([0] * b.n_modes)
    heap = [(-log_ground, start)]
    seen = {start}
    kept, mass = [], 0.0
    while heap and mass < 1 - tail:
        neg, occ = heapq.heappop(heap)
        p = math.exp(-neg)
        kept.append((occ, p))
        mass += p
        if len(kept) > limit:
            raise ValidationError(f"more than {limit} bath configurations needed for "
                                  f"tail {tail:g}", key="tail")
        for k in range(b.n_modes):
            nxt = occ[:k] + (occ[k] + 1,) + occ[k + 1:]
            if nxt not in seen:
                seen.add(nxt)
                heapq.heappush(heap, (neg - logq[k], nxt))
    return [(occ, p / mass) for occ, p in kept]


def reduce_exact(cfg: ManyBodyConfig, times, cutoff: int | None = None):
    """Reduced cavity state(s) at ``times`` from full many-body propagation.

    Returns one FockDensityMatrix for a scalar time, a list otherwise.  Output
    weight above ``cutoff`` (default: the input cutoff) goes to ``leakage``.
    """
    scalar = np.ndim(times) == 0
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValidationError("times must be nonnegative", key="t")
    b = cfg.bath
    out_cut = cfg.system.cutoff if cutoff is None else int(cutoff)
    cache = _sectors(b.omega, tuple(b.frequencies.tolist()), tuple(b.couplings.tolist()))

    p_sys, vecs = np.linalg.eigh(0.5 * (cfg.system.rho + cfg.system.rho.conj().T))
    keep = p_sys > 1e-15
    p_sys, vecs = p_sys[keep], vecs[:, keep]
    vecs = np.where(np.abs(vecs) > cfg.amplitude_floor, vecs, 0)
    support = np.flatnonzero(np.any(vecs != 0, axis=1))
    configs = _bath_configurations(b, cfg.tail)
    s_max = int(support.max())
    b_max = max(sum(occ) for occ, _ in configs)
    K_max = s_max + b_max
    total_dim = sum(_sector_size(K, b.n_modes + 1) for K in range(K_max + 1))
    if total_dim > cfg.max_dim:
        raise ValidationError(f"Hilbert dimension {total_dim} exceeds guard {cfg.max_dim}",
                              key="max_dim")

    # bath tuples reachable within K_max, indexed for the partial trace
    bath_list = [occ for B in range(K_max + 1) for occ in _compositions(B, b.n_modes)]
    bath_index = {occ: i for i, occ in enumerate(bath_list)}

    # columns of U_K(t) that are actually needed, per sector
    needed: dict[int, list[tuple[int, tuple]]] = {}
    for occ, _ in configs:
        B = sum(occ)
        for s in support:
            needed.setdefault(int(s) + B, []).append((int(s), occ))

    results = []
    for t in times:
        columns = {}
        for K, pairs in needed.items():
            basis, index, sys_occ, E, V = cache.sector(K)
            cols = [index[(s,) + occ] for s, occ in pairs]
            sub = V[cols, :].T
            U_cols = (V @ (np.cos(E * t)[:, None] * sub)
                      - 1j * (V @ (np.sin(E * t)[:, None] * sub)))
            bidx = np.array([bath_index[st[1:]] for st in basis])
            columns[K] = ({pair: j for j, pair in enumerate(pairs)}, U_cols, sys_occ, bidx)
        rho = np.zeros((K_max + 1, K_max + 1), dtype=complex)
        for occ, w_b in configs:
            B = sum(occ)
            # final amplitude A[i, s_out, bath] for each system eigencomponent i
            A = np.zeros((vecs.shape[1], K_max + 1, len(bath_list)), dtype=complex)
            for s in support:
                lookup, U_cols, sys_occ, bidx = columns[int(s) + B]
                col = U_cols[:, lookup[(int(s), occ)]]
                A[:, sys_occ, bidx] += vecs[s, :][:, None] * col[None, :]
            rho += w_b * np.einsum("i,iab,icb->ac", p_sys, A, A.conj())
        full = FockDensityMatrix(rho)
        results.append(full.resized(out_cut))
    return results[0] if scalar else results


def gaussian_moments(cfg: ManyBodyConfig, t: float) -> dict[str, complex | float]:
    """First and second moments at ``t`` from the one-excitation propagator.

    <a> -> eta <a>, <a^2> -> eta^2 <a^2>, and
    <a^dag a> -> |eta|^2 <a^dag a> + sum_k |gamma_k|^2 n_k.
    """
    m0 = moments(cfg.system)
    Z = assemble(cfg.bath).evolution_rows([t])[0]
    eta, g = Z[0], Z[1:]
    nk = thermal_occupations(cfg.bath)
    g2 = np.abs(g) ** 2
    e2 = abs(eta) ** 2
    return {
        "mean_a": eta * m0["mean_a"],
        "mean_n": e2 * m0["mean_n"] + float(g2 @ nk),
        "mean_a2": eta ** 2 * m0["mean_a2"],
        "mean_anticomm": e2 * m0["mean_anticomm"] + float(g2 @ (2 * nk + 1)),
    }


def compare(reduced: FockDensityMatrix, candidate: FockDensityMatrix) -> dict[str, float]:
    if reduced.cutoff != candidate.cutoff:
        raise ValidationError("cutoffs differ", key="cutoff")
    ma, mb = moments(reduced), moments(candidate)
    report = {
        "trace_distance": trace_distance(reduced, candidate),
        "max_abs": float(np.max(np.abs(reduced.rho - candidate.rho))),
    }
    for key in ma:
        report[f"d_{key}"] = float(abs(ma[key] - mb[key]))
    return report
