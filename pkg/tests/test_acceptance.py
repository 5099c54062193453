"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` (or ``python3 tests/test_acceptance.py``)
to see the verdicts; the tests also assert them.
"""
import math
import sys
import time
import warnings

import numpy as np
import pytest

from conftest import THREE_MODES, random_bath
from rwacavity.bath import BathSpec
from rwacavity.coefficients import (coefficients_born_markov, coefficients_normal_mode,
                                    coefficients_volterra, time_grid)
from rwacavity.errors import LeakageWarning
from rwacavity.evolution import (FockDensityMatrix, SuperoperatorParams, apply, moments,
                                 superop_params, trace_distance)
from rwacavity.fock import displacement_matrix
from rwacavity.oracle import ManyBodyConfig, reduce_exact
from rwacavity.states import (CatSpec, SqueezeParams, assemble_density, asymptotic_state,
                              cat_state, coherent_state, dyad, evolve_cat, evolve_coherent,
                              evolve_fock_finite_T, evolve_fock_zero_T,
                              evolve_generalized_coherent, evolve_offdiagonal,
                              evolve_squeezed, fock_state, generalized_coherent_state,
                              squeezed_state, thermal_state)
from rwacavity.wigner import fit_omega, omega_error, protocol_deltaP, protocol_deltaP_closed


@pytest.fixture
def verdict(capsys):
    def report(number, name, ok, detail, elapsed):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number} ({name}): {detail} "
                  f"[{elapsed:.1f}s]")
    return report


# lambda spikes where |eta| dips close to zero; the checks here are pointwise,
# so the coarse-grid diagnostic is expected
@pytest.mark.filterwarnings("ignore:grid may be too coarse:RuntimeWarning")
def test_criterion_1_zero_temperature_identity(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    ts = time_grid(20.0, 0.01)
    worst = 0.0
    for _ in range(5):
        b = random_bath(rng, max_modes=8, max_coupling=0.2)
        tr = coefficients_normal_mode(b, ts)
        worst = max(worst, float(np.max(np.abs(tr.extras["lambda_prime"] - tr.lam))))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 10
    verdict(1, "lambda' = lambda at zero temperature", ok,
            f"max |lambda' - lambda| = {worst:.2e} (< 1e-10)", elapsed)
    assert ok


def test_criterion_2_route_agreement(verdict):
    start = time.perf_counter()
    baths = [BathSpec.from_modes(1.0, THREE_MODES, 1.0),
             random_bath(np.random.default_rng(7), max_modes=6, beta=2.0)]
    final, orders = 0.0, []
    for b in baths:
        errs = []
        for k in range(3):
            ts = time_grid(20.0, 0.01 / 2 ** k)
            v, nm = coefficients_volterra(b, ts), coefficients_normal_mode(b, ts)
            errs.append(max(float(np.max(np.abs(v.Omega - nm.Omega))),
                            float(np.max(np.abs(v.Lambda - nm.Lambda))),
                            float(np.max(np.abs(v.Nexc - nm.Nexc)))))
        final = max(final, errs[-1])
        orders.extend(np.log2(np.array(errs[:-1]) / np.array(errs[1:])).tolist())
    elapsed = time.perf_counter() - start
    ok = final < 1e-6 and min(orders) >= 1.9 and elapsed < 60
    verdict(2, "normal-mode vs Volterra", ok,
            f"error after two halvings {final:.2e} (< 1e-6), min order {min(orders):.3f} "
            f"(>= 1.9)", elapsed)
    assert ok


def test_criterion_3_master_equation_exactness(verdict):
    start = time.perf_counter()
    cut = 25
    states = [fock_state(0, cut), fock_state(1, cut), fock_state(2, cut),
              coherent_state(1.0, cut), cat_state(CatSpec(1.0, "even"), cut)]
    times = [0.5, 1.5, 3.0, 5.0, 8.0]
    worst = 0.0
    for modes in ([(0.9, 0.1)], [(0.8, 0.1), (1.3, 0.15)]):
        for beta in (math.inf, 1.0):
            b = BathSpec.from_modes(1.0, modes, beta)
            traj = coefficients_normal_mode(b, time_grid(8.0, 0.01))
            for rho0 in states:
                reduced = reduce_exact(ManyBodyConfig(b, rho0), times)
                for t, red in zip(times, reduced):
                    out = apply(superop_params(traj, t), rho0)
                    worst = max(worst, trace_distance(red, out))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and elapsed < 120
    verdict(3, "apply vs many-body oracle", ok,
            f"max trace distance {worst:.2e} over 100 cases (< 1e-6)", elapsed)
    assert ok


def _draw(rng, thermal):
    return SuperoperatorParams(float(rng.uniform(-math.pi, math.pi)),
                               float(rng.uniform(0.05, 1.2)),
                               float(rng.uniform(0.05, 0.6)) if thermal else 0.0)


def test_criterion_4_closed_forms(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(404)
    cut = 60
    worst = {}

    def record(name, d):
        worst[name] = max(worst.get(name, 0.0), d)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LeakageWarning)
        for _ in range(3):
            s0 = complex(*rng.uniform(-1.2, 1.2, 2))
            m = int(rng.integers(1, 5))
            p, pT = _draw(rng, False), _draw(rng, True)

            st_ = evolve_coherent(s0, p.Omega, p.Lambda)
            record("coherent", trace_distance(coherent_state(st_, cut),
                                              apply(p, coherent_state(s0, cut))))

            w = evolve_fock_zero_T(m, p.Lambda)
            record("fock", trace_distance(assemble_density(w, cut), apply(p, fock_state(m, cut))))

            w = evolve_fock_finite_T(m, pT.Lambda, pT.N)
            record("fock (thermal)", trace_distance(assemble_density(w, cut),
                                                    apply(pT, fock_state(m, cut))))

            r = evolve_generalized_coherent(m, s0, pT.Omega, pT.Lambda, pT.N)
            record("generalized coherent",
                   trace_distance(assemble_density(r, cut),
                                  apply(pT, generalized_coherent_state(m, s0, cut))))

            sp = complex(*rng.uniform(-1.2, 1.2, 2))
            r = evolve_offdiagonal(s0, sp, p.Omega, p.Lambda)
            lhs = assemble_density(r, cut).rho
            rhs = apply(p, FockDensityMatrix(dyad(s0, sp, cut))).rho
            record("off-diagonal dyad", 0.5 * np.abs(np.linalg.svd(lhs - rhs, compute_uv=False)).sum())

            cat = CatSpec(s0 if abs(s0) > 0.3 else 1.0, ["even", "odd"][int(rng.integers(2))])
            record("cat", trace_distance(assemble_density(evolve_cat(cat, p.Omega, p.Lambda), cut),
                                         apply(p, cat_state(cat, cut))))

            sq = SqueezeParams(float(rng.uniform(0.1, 0.8)), float(rng.uniform(0, 2 * math.pi)))
            r = evolve_squeezed(s0, sq, pT.Omega, pT.Lambda, pT.N)
            record("squeezed", trace_distance(assemble_density(r, cut),
                                              apply(pT, squeezed_state(s0, sq, cut))))

            n_inf = float(rng.uniform(0.0, 0.6))
            far = SuperoperatorParams(p.Omega, 20.0, n_inf)
            record("asymptotic", trace_distance(asymptotic_state(n_inf, cut),
                                                apply(far, coherent_state(s0, cut))))
    elapsed = time.perf_counter() - start
    top = max(worst, key=worst.get)
    ok = all(v < 1e-6 for v in worst.values()) and elapsed < 120
    verdict(4, "closed forms vs apply", ok,
            f"{len(worst)} families x 3 draws, worst {top} {worst[top]:.2e} (< 1e-6)", elapsed)
    assert ok, worst


# lambda spikes where |eta| dips close to zero; the checks here are pointwise,
# so the coarse-grid diagnostic is expected
@pytest.mark.filterwarnings("ignore:grid may be too coarse:RuntimeWarning")
def test_criterion_5_moment_laws(verdict):
    start = time.perf_counter()
    cut = 60
    states = [fock_state(0, cut), fock_state(2, cut), coherent_state(1 - 0.5j, cut),
              cat_state(CatSpec(1.0, "even"), cut), cat_state(CatSpec(0.8j, "odd"), cut),
              generalized_coherent_state(1, 0.7, cut),
              squeezed_state(0.4, SqueezeParams(0.5, 1.0), cut), thermal_state(0.7, cut)]
    times = [0.0, 1.0, 4.0, 9.5, 15.0]
    geometry = [(0.8, 0.1), (1.0, 0.12), (1.3, 0.15)]
    worst, beta_gap = 0.0, 0.0
    means = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LeakageWarning)
        for beta in (math.inf, 1.0):
            traj = coefficients_normal_mode(BathSpec.from_modes(1.0, geometry, beta),
                                            time_grid(15.0, 0.01))
            for i, rho0 in enumerate(states):
                m0 = moments(rho0)
                for t in times:
                    O, L, N = traj.at(t)
                    m = moments(apply(SuperoperatorParams(O, L, N), rho0))
                    worst = max(worst, abs(m["mean_a"] - m0["mean_a"] * np.exp(complex(-L, -O))),
                                abs(m["mean_n"] - (math.exp(-2 * L) * m0["mean_n"] + N)))
                    key = (i, t)
                    if key in means:
                        beta_gap = max(beta_gap, abs(means[key] - m["mean_a"]))
                    means[key] = m["mean_a"]
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and beta_gap < 1e-8
    verdict(5, "moment laws", ok,
            f"max deviation {worst:.2e}, beta dependence of <a> {beta_gap:.2e} (< 1e-8)",
            elapsed)
    assert ok


def test_criterion_6_protocol_recovery(verdict):
    start = time.perf_counter()
    b = BathSpec.from_modes(1.0, THREE_MODES, math.inf)
    traj = coefficients_normal_mode(b, time_grid(20.0, 0.01))
    ts = np.linspace(0.4, 19.6, 50)
    fit = fit_omega(2.0, traj, ts, 1e-3)
    truth = np.array([traj.at(t)[0] for t in ts])
    fit_err = float(np.max(omega_error(fit.wrapped, truth)))

    phis = np.linspace(0, 2 * math.pi, 25)
    dp_err = 0.0
    for t in (0.0, 3.0, 11.0, 19.6):
        O, L, N = traj.at(t)
        rho = apply(SuperoperatorParams(O, L, N), coherent_state(2.0, 40))
        for phi in phis:
            alpha = -2.0 * math.exp(-L) * np.exp(-1j * phi)
            dp = protocol_deltaP(rho, alpha, t).deltaP
            dp_err = max(dp_err, abs(dp - float(protocol_deltaP_closed(2.0, L, O, phi))))
    elapsed = time.perf_counter() - start
    ok = fit_err < 1e-5 and dp_err < 1e-8 and elapsed < 30
    verdict(6, "protocol recovery", ok,
            f"Omega error {fit_err:.2e} on 50 times (< 1e-5), Delta P error {dp_err:.2e} "
            f"(< 1e-8)", elapsed)
    assert ok


def test_criterion_7_born_markov_window(verdict):
    start = time.perf_counter()
    base = BathSpec.from_modes(1.0, [(0.7, 1.0), (0.95, 1.0), (1.2, 1.0), (1.5, 1.0)],
                               math.inf)
    ts = time_grid(5.0, 0.01)
    errs = []
    for s in (0.04, 0.02, 0.01):
        b = base.scaled(s)
        exact, bm = coefficients_normal_mode(b, ts), coefficients_born_markov(b, ts)
        errs.append(abs(exact.Lambda[-1] - bm.Lambda[-1]))
    exps = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    elapsed = time.perf_counter() - start
    ok = bool(np.all(np.abs(exps - 4) <= 0.8))
    verdict(7, "Born-Markov error scaling", ok,
            f"exponents {', '.join(f'{e:.3f}' for e in exps)} (4 +- 20%)", elapsed)
    assert ok


def _random_density(rng, support, cutoff):
    g = rng.normal(size=(support, support)) + 1j * rng.normal(size=(support, support))
    r = g @ g.conj().T
    full = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    full[:support, :support] = r / np.trace(r).real
    return FockDensityMatrix(full)


def test_criterion_8_invariants(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(808)
    draws = 100
    cut = 40
    trace_err = pos_floor = weight_err = parity_res = cov_err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LeakageWarning)
        for _ in range(draws):
            p = _draw(rng, bool(rng.integers(2)))
            out = apply(p, _random_density(rng, int(rng.integers(1, 8)), cut))
            trace_err = max(trace_err, abs(out.trace + out.leakage - 1))
            pos_floor = min(pos_floor, float(out.eigenvalues().min()))

            m, L, N = int(rng.integers(0, 10)), float(rng.uniform(0, 4)), float(rng.uniform(0, 2))
            weight_err = max(weight_err, abs(evolve_fock_finite_T(m, L, N).sum() - 1),
                             abs(evolve_fock_zero_T(m, L).sum() - 1))

            s0 = complex(*rng.uniform(-1.5, 1.5, 2))
            if abs(s0) > 0.2:
                cat = CatSpec(s0, ["even", "odd"][int(rng.integers(2))])
                pc = _draw(rng, False)
                evolved = apply(pc, cat_state(cat, cut)).rho
                st_ = evolve_coherent(s0, pc.Omega, pc.Lambda)
                basis = np.array([cat_state(CatSpec(st_, par), cut).rho.ravel()
                                  for par in ("even", "odd")]).T
                coef, *_ = np.linalg.lstsq(basis, evolved.ravel(), rcond=None)
                parity_res = max(parity_res, float(np.max(np.abs(basis @ coef - evolved.ravel()))))

        # displacement covariance on matrix units |m><n|
        small, big = 10, 60
        for _ in range(draws):
            p = _draw(rng, bool(rng.integers(2)))
            s0 = complex(*rng.uniform(-0.6, 0.6, 2))
            st_ = s0 * np.exp(complex(-p.Lambda, -p.Omega))
            m, n = (int(k) for k in rng.integers(0, 4, 2))
            E = np.zeros((big + 1, big + 1), dtype=complex)
            E[m, n] = 1
            D0, Dt = displacement_matrix(s0, big), displacement_matrix(st_, big)
            lhs = apply(p, FockDensityMatrix(D0 @ E @ D0.conj().T)).rho
            rhs = Dt @ apply(p, FockDensityMatrix(E)).rho @ Dt.conj().T
            cov_err = max(cov_err, float(np.max(np.abs(lhs - rhs)[:small + 1, :small + 1])))
    elapsed = time.perf_counter() - start
    ok = (trace_err < 1e-10 and pos_floor > -1e-9 and weight_err < 1e-10
          and parity_res < 1e-10 and cov_err < 1e-7 and elapsed < 60)
    verdict(8, "invariants", ok,
            f"{draws} draws each: trace {trace_err:.1e}, min eigenvalue {pos_floor:.1e}, "
            f"weights {weight_err:.1e}, parity residual {parity_res:.1e}, "
            f"covariance {cov_err:.1e}", elapsed)
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-s", "-q"]))
