import math
import warnings

import numpy as np
import pytest

from rwacavity.bath import BathSpec
from rwacavity.coefficients import (accumulate, coefficients_born_markov,
                                    coefficients_normal_mode, coefficients_volterra,
                                    compute_trajectory, eta_from_normal_modes,
                                    read_trajectory_csv, time_grid, trajectory_to_csv,
                                    write_trajectory_csv)
from rwacavity.errors import EtaVanishesError, ValidationError
from rwacavity.propagator import assemble

from conftest import THREE_MODES, random_bath


def test_time_grid():
    assert np.allclose(time_grid(1.0, 0.25), [0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ValidationError):
        time_grid(1.0, 0.3)
    with pytest.raises(ValidationError):
        time_grid(1.0, 0.0)


@pytest.mark.parametrize("route", ["normal-mode", "volterra", "born-markov"])
def test_free_field(route):
    b = BathSpec.from_modes(1.2, [(0.9, 0.0), (1.4, 0.0)], 1.0)
    ts = time_grid(5.0, 0.01)
    tr = compute_trajectory(b, ts, route)
    for arr in (tr.delta, tr.lam, tr.epsilon, tr.Lambda, tr.Nexc):
        assert np.max(np.abs(arr)) < 1e-13
    assert np.allclose(tr.Omega, 1.2 * ts, atol=1e-12)


def test_unknown_route():
    with pytest.raises(ValidationError):
        compute_trajectory(BathSpec.from_modes(1.0, []), [0.0], "magic")


@pytest.mark.parametrize("seed", range(3))
def test_zero_temperature_identity(seed):
    b = random_bath(np.random.default_rng(seed))
    tr = coefficients_normal_mode(b, time_grid(20.0, 0.01))
    assert np.all(tr.epsilon == 0) and np.all(tr.Nexc == 0)
    assert np.max(np.abs(tr.extras["lambda_prime"] - tr.lam)) < 1e-10


def test_initial_values_and_positivity(bath3):
    tr = coefficients_normal_mode(bath3, time_grid(20.0, 0.01))
    assert tr.Omega[0] == tr.Lambda[0] == tr.Nexc[0] == 0
    assert np.all(tr.Nexc >= 0)


def test_epsilon_is_the_master_equation_coefficient(bath3):
    # d N/dt = -2 lambda N + 2 epsilon, checked by a centered difference of the exact N
    tr = coefficients_normal_mode(bath3, time_grid(20.0, 0.001))
    dN = (tr.Nexc[2:] - tr.Nexc[:-2]) / (2 * tr.dt)
    rhs = -2 * tr.lam[1:-1] * tr.Nexc[1:-1] + 2 * tr.epsilon[1:-1]
    assert np.max(np.abs(dN - rhs)) < 1e-7


def test_lambda_prime_is_lambda_plus_two_epsilon(bath3):
    tr = coefficients_normal_mode(bath3, time_grid(10.0, 0.01))
    assert np.max(np.abs(tr.extras["lambda_prime"] - tr.lam - 2 * tr.epsilon)) < 1e-12


def test_uniform_temperature_epsilon_formula():
    # all n_k equal: epsilon reduces to -n sum_k c_k Im(eta_k) = n lambda
    b = BathSpec.from_modes(1.0, [(1.0, 0.05), (1.0, 0.08)], 0.7)
    tr = coefficients_normal_mode(b, time_grid(10.0, 0.01))
    n = 1 / math.expm1(0.7)
    assert np.max(np.abs(tr.epsilon - n * tr.lam)) < 1e-12


def test_omega_lambda_independent_of_temperature():
    ts = time_grid(10.0, 0.01)
    cold = coefficients_normal_mode(BathSpec.from_modes(1.0, THREE_MODES), ts)
    hot = coefficients_normal_mode(BathSpec.from_modes(1.0, THREE_MODES, 0.3), ts)
    assert np.array_equal(cold.Omega, hot.Omega) and np.array_equal(cold.Lambda, hot.Lambda)


def test_quadrature_consistency(bath3):
    tr = coefficients_normal_mode(bath3, time_grid(20.0, 0.01))
    assert max(tr.extras["quadrature_deviation"].values()) < 1e-5
    assert tr.extras["rk4_deviation"] < 1e-8


def test_normal_mode_eta_formula(bath3):
    ts = np.linspace(0, 15, 31)
    direct = assemble(bath3).evolution_rows(ts)[:, 0]
    assert np.max(np.abs(eta_from_normal_modes(bath3, ts) - direct)) < 1e-12


def test_eta_vanishes_on_normal_mode_route():
    b = BathSpec.from_modes(1.0, [(1.0, 0.1)])
    ts = np.arange(0, 101) * (math.pi / 0.2 / 100)
    with pytest.raises(EtaVanishesError):
        coefficients_normal_mode(b, ts)


def test_coarse_grid_warning(bath3):
    with pytest.warns(RuntimeWarning, match="coarse"):
        coefficients_normal_mode(bath3.scaled(6.0), time_grid(20.0, 0.5))


@pytest.mark.parametrize("t", [0.5, 3.0, 9.0])
def test_volterra_single_degenerate_mode(t):
    c = 0.1
    b = BathSpec.from_modes(1.0, [(1.0, c)])
    tr = coefficients_volterra(b, time_grid(10.0, 0.005))
    i = int(round(t / 0.005))
    assert tr.Lambda[i] == pytest.approx(-math.log(abs(math.cos(c * t))), abs=1e-6)
    assert tr.extras["eta"][i] == pytest.approx(np.exp(-1j * t) * math.cos(c * t), abs=1e-6)


def test_volterra_matches_normal_mode(bath3):
    ts = time_grid(20.0, 0.01)
    nm = coefficients_normal_mode(bath3, ts)
    vo = coefficients_volterra(bath3, ts, substeps=4)
    for a, b in [(nm.lam, vo.lam), (nm.delta, vo.delta), (nm.epsilon, vo.epsilon),
                 (nm.Omega, vo.Omega), (nm.Lambda, vo.Lambda), (nm.Nexc, vo.Nexc)]:
        assert np.max(np.abs(a - b)) < 1e-6


def test_volterra_second_order(bath3):
    errs = []
    for dt in (0.02, 0.01, 0.005):
        ts = time_grid(10.0, dt)
        nm = coefficients_normal_mode(bath3, ts)
        vo = coefficients_volterra(bath3, ts)
        errs.append(np.max(np.abs(nm.Lambda - vo.Lambda)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_volterra_central_difference_option(bath3):
    ts = time_grid(10.0, 0.005)
    nm = coefficients_normal_mode(bath3, ts)
    vo = coefficients_volterra(bath3, ts, epsilon_method="central")
    assert np.max(np.abs(nm.epsilon - vo.epsilon)) < 1e-4
    with pytest.raises(ValidationError):
        coefficients_volterra(bath3, ts, epsilon_method="forward")


def test_volterra_underflow_truncates(monkeypatch):
    import rwacavity.coefficients as coeffs
    monkeypatch.setattr(coeffs, "UNDERFLOW", 0.5)
    b = BathSpec.from_modes(1.0, [(1.0, 0.1)])
    with pytest.warns(RuntimeWarning, match="underflow"):
        tr = coefficients_volterra(b, time_grid(20.0, 0.01))
    cut = math.acos(0.5) / 0.1
    assert tr.extras["truncated_at"] == pytest.approx(cut, abs=0.011)
    assert tr.times[-1] < cut and np.all(np.abs(tr.extras["eta"]) >= 0.5)


def test_accumulate_examples():
    ts = time_grid(5.0, 0.01)
    z = np.zeros_like(ts)
    acc = accumulate(z, np.full_like(ts, 0.3), z, ts)
    assert np.allclose(acc.Lambda, 0.3 * ts, atol=1e-13) and np.all(acc.Nexc == 0)
    acc = accumulate(z, z, np.full_like(ts, 0.2), ts)
    assert np.allclose(acc.Nexc, 0.4 * ts, atol=1e-12)
    lam0, eps0 = 0.3, 0.2
    acc = accumulate(z, np.full_like(ts, lam0), np.full_like(ts, eps0), ts)
    assert np.allclose(acc.Nexc, eps0 / lam0 * -np.expm1(-2 * lam0 * ts), atol=1e-13)
    assert acc.rk4_deviation < 1e-8
    with pytest.raises(ValidationError):
        accumulate(z[:-1], z, z, ts)


def test_born_markov_examples():
    c = 0.07
    ts = time_grid(10.0, 0.01)
    tr = coefficients_born_markov(BathSpec.from_modes(1.0, [(1.0, c)]), ts)
    assert np.allclose(tr.Lambda, c ** 2 * ts ** 2 / 2, atol=1e-15)
    assert tr.extras["epsilon_omitted"]


def test_born_markov_derivatives_consistent():
    b = BathSpec.from_modes(1.0, [(0.7, 0.05), (1.0, 0.04), (1.6, 0.05)])
    tr = coefficients_born_markov(b, time_grid(10.0, 0.001))
    dLam = np.gradient(tr.Lambda, tr.dt)[1:-1]
    dOm = np.gradient(tr.Omega, tr.dt)[1:-1]
    assert np.max(np.abs(dLam - tr.lam[1:-1])) < 1e-7
    assert np.max(np.abs(dOm - 1.0 - tr.delta[1:-1])) < 1e-7


def test_born_markov_error_shrinks_with_coupling():
    base = BathSpec.from_modes(1.0, [(0.7, 1.0), (1.0, 1.0), (1.6, 1.0)])
    ts = time_grid(5.0, 0.01)
    errs = []
    for s in (0.04, 0.02, 0.01):
        b = base.scaled(s)
        errs.append(np.max(np.abs(coefficients_born_markov(b, ts).Lambda
                                  - coefficients_normal_mode(b, ts).Lambda)))
    assert errs[0] / errs[2] > 10


def test_csv_round_trip(tmp_path, bath3):
    tr = coefficients_normal_mode(bath3, time_grid(2.0, 0.01))
    text = trajectory_to_csv(tr, bath3)
    assert text.splitlines()[1] == "t,delta,lambda,epsilon,Omega,Lambda,N"
    assert '"route": "normal-mode"' in text.splitlines()[0]
    path = tmp_path / "c.csv"
    write_trajectory_csv(tr, path, bath3)
    back = read_trajectory_csv(path)
    assert back.route == "normal-mode"
    for name in ("times", "delta", "lam", "epsilon", "Omega", "Lambda", "Nexc"):
        assert np.array_equal(getattr(back, name), getattr(tr, name))
    assert trajectory_to_csv(tr, bath3) == text


def test_at_interpolates_and_rejects_outside(bath3):
    tr = coefficients_normal_mode(bath3, time_grid(2.0, 0.01))
    O, L, N = tr.at(1.0)
    assert (O, L, N) == (tr.Omega[100], tr.Lambda[100], tr.Nexc[100])
    with pytest.raises(ValidationError):
        tr.at(2.5)
