import math

import numpy as np
import pytest

from rwacavity.bath import BathSpec
from rwacavity.errors import ValidationError
from rwacavity.evolution import SuperoperatorParams, apply, moments, trace_distance
from rwacavity.oracle import ManyBodyConfig, compare, gaussian_moments, reduce_exact
from rwacavity.propagator import assemble
from rwacavity.states import (coherent_state, evolve_fock_finite_T, fock_state,
                              squeezed_state, SqueezeParams)

CUT = 12


def params_from_bath(b, t):
    """Omega, Lambda, N straight from the one-excitation propagator."""
    Z = assemble(b).evolution_rows([t])[0]
    eta, g = Z[0], Z[1:]
    from rwacavity.bath import thermal_occupations
    N = float(np.abs(g) ** 2 @ thermal_occupations(b))
    return SuperoperatorParams(-np.angle(eta), -math.log(abs(eta)), N)


def test_uncoupled_cavity_rotates_freely():
    b = BathSpec.from_modes(1.3, [(0.7, 0.0)], math.inf)
    rho0 = coherent_state(0.8, CUT)
    out = reduce_exact(ManyBodyConfig(b, rho0), 2.0)
    ref = coherent_state(0.8 * np.exp(-2.6j), CUT)
    assert trace_distance(out, ref) < 1e-12


def test_quarter_rabi_cycle():
    g = 0.25
    b = BathSpec.from_modes(1.0, [(1.0, g)], math.inf)
    out = reduce_exact(ManyBodyConfig(b, fock_state(1, 3)), math.pi / (4 * g))
    assert np.allclose(out.rho, np.diag([0.5, 0.5, 0, 0]), atol=1e-12)


def test_fock_two_against_finite_T_weights():
    b = BathSpec.from_modes(1.0, [(0.8, 0.1), (1.3, 0.15)], 1.0)
    t = 0.9
    out = reduce_exact(ManyBodyConfig(b, fock_state(2, CUT), tail=1e-10), t)
    p = params_from_bath(b, t)
    w = evolve_fock_finite_T(2, p.Lambda, p.N)
    k = min(w.size, CUT + 1)
    assert np.max(np.abs(np.diag(out.rho).real[:k] - w[:k])) < 1e-8
    # number-diagonal in, number-diagonal out
    assert np.max(np.abs(out.rho - np.diag(np.diag(out.rho)))) < 1e-12


@pytest.mark.parametrize("beta", [math.inf, 1.0])
def test_superoperator_agrees(beta):
    b = BathSpec.from_modes(1.0, [(0.8, 0.1), (1.3, 0.15)], beta)
    for t in (0.7, 2.3):
        rho0 = coherent_state(0.6 + 0.3j, CUT)
        out = reduce_exact(ManyBodyConfig(b, rho0, tail=1e-10), t)
        assert trace_distance(out, apply(params_from_bath(b, t), rho0)) < 1e-7


def test_eta_from_mean_amplitude():
    b = BathSpec.from_modes(1.0, [(0.9, 0.2), (1.2, 0.1)], math.inf)
    rho0 = coherent_state(0.3, 15)
    for t in (0.5, 3.0):
        out = reduce_exact(ManyBodyConfig(b, rho0), t)
        ratio = moments(out)["mean_a"] / moments(rho0)["mean_a"]
        Z00 = assemble(b).evolution_rows([t])[0][0]
        assert abs(ratio - Z00) < 1e-10


def test_tail_refinement_converges():
    b = BathSpec.from_modes(1.0, [(0.9, 0.2)], 0.7)
    rho0 = fock_state(1, CUT)
    a = reduce_exact(ManyBodyConfig(b, rho0, tail=1e-8), 1.5, cutoff=30)
    c = reduce_exact(ManyBodyConfig(b, rho0, tail=1e-10), 1.5, cutoff=30)
    assert trace_distance(a, c) < 1e-8


def test_gaussian_moments_against_exact():
    b = BathSpec.from_modes(1.0, [(0.8, 0.1), (1.3, 0.15)], 1.0)
    rho0 = squeezed_state(0.2, SqueezeParams(0.4, 0.5), CUT)
    cfg = ManyBodyConfig(b, rho0, tail=1e-10)
    m = gaussian_moments(cfg, 1.1)
    exact = moments(reduce_exact(cfg, 1.1, cutoff=25))
    for key in ("mean_a", "mean_n", "mean_a2", "mean_anticomm"):
        assert abs(m[key] - exact[key]) < 1e-6


def test_gaussian_moments_vacuum_zero_T():
    b = BathSpec.from_modes(1.0, [(1.0, 0.3)], math.inf)
    m = gaussian_moments(ManyBodyConfig(b, fock_state(0, 4)), 2.0)
    assert m["mean_n"] == 0 and m["mean_a"] == 0
    assert m["mean_anticomm"] == pytest.approx(1.0)


def test_compare_report():
    a, c = fock_state(0, 3), fock_state(1, 3)
    rep = compare(a, c)
    assert rep["trace_distance"] == pytest.approx(1.0)
    assert rep["d_mean_n"] == pytest.approx(1.0)
    assert compare(a, a)["max_abs"] == 0
    with pytest.raises(ValidationError):
        compare(a, fock_state(0, 4))


def test_guards():
    five = BathSpec.from_modes(1.0, [(1.0, 0.1)] * 5, math.inf)
    with pytest.raises(ValidationError) as err:
        ManyBodyConfig(five, fock_state(0, 2))
    assert err.value.key == "modes"
    b = BathSpec.from_modes(1.0, [(1.0, 0.1)] * 4, 1.0)
    with pytest.raises(ValidationError) as err:
        reduce_exact(ManyBodyConfig(b, fock_state(3, 4), tail=1e-3, max_dim=1000), 1.0)
    assert err.value.key == "max_dim"
    hot = BathSpec.from_modes(1.0, [(1.0, 0.1)] * 4, 0.05)
    with pytest.raises(ValidationError) as err:
        reduce_exact(ManyBodyConfig(hot, fock_state(0, 2)), 1.0)
    assert err.value.key == "tail"
    with pytest.raises(ValidationError):
        reduce_exact(ManyBodyConfig(BathSpec.from_modes(1.0, [(1.0, 0.1)], math.inf),
                                    fock_state(0, 2)), -1.0)


def test_vector_times_return_list():
    b = BathSpec.from_modes(1.0, [(1.0, 0.1)], math.inf)
    out = reduce_exact(ManyBodyConfig(b, fock_state(1, 3)), [0.0, 1.0])
    assert isinstance(out, list) and len(out) == 2
    assert trace_distance(out[0], fock_state(1, 3)) < 1e-13
