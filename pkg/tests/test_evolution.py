import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trapsmooth.errors import ResolutionError
from trapsmooth.evolution import (energy_spread, mode_operator, propagate, random_initial_data,
                                  saturation_B, saturation_experiment, smoothing_data_norm,
                                  smoothing_observables, smoothing_report, smoothing_suite,
                                  smoothing_time, time_step, trapezoid)
from trapsmooth.geometry import ModelSpec
from trapsmooth.grid import (BandedOperator, GridFunction, AbsorbingLayer, assemble_hamiltonian,
                             build_grid, fractional_deriv_norm, japanese, resolving_points)
from trapsmooth.spectral import ground_energy


def _gaussian(grid, x0=0.0, w=0.5, xi=1.0):
    return np.exp(-((grid.x - x0) / w) ** 2 / 2 + 1j * xi * grid.x)


def _oscillator(n=512, L=8.0):
    return assemble_hamiltonian(ModelSpec(1, 1.0, +1, 1.0), build_grid(L, n))


def test_zero_operator_is_identity():
    g = build_grid(5.0, 128)
    H = BandedOperator(g, 0.0, np.zeros(g.n), True, "zero")
    u0 = _gaussian(g)
    run = propagate(H, u0, 1.0)
    np.testing.assert_allclose(run.final, u0, atol=1e-15)


def test_eigenvector_phase_matches_rational_approximation_error():
    H = _oscillator()
    res = ground_energy(H, count=2)
    lam, v = res.eigenvalues[1], res.eigenvectors[:, 1].astype(complex)
    T, steps = 1.0, 200
    run = propagate(H, v, T, dt=T / steps, gauge=0.0)
    err = np.linalg.norm(run.final - np.exp(-1j * lam * T) * v)
    # oracle: per step CN advances the phase by 2 arctan(lam dt / 2) instead of lam dt
    dt = T / steps
    predicted = abs(steps * (2 * np.arctan(lam * dt / 2) - lam * dt))
    assert err == pytest.approx(predicted, rel=1e-3)
    assert err <= dt ** 2 * lam ** 3 * T


def test_norm_drift_over_many_steps():
    H = _oscillator()
    u0 = _gaussian(H.grid, 0.5)
    run = propagate(H, u0, 2.0, dt=2.0 / 10_000)
    assert len(run.times) == 10_001
    assert run.norm_drift < 1e-9


def test_time_reversal():
    H = _oscillator()
    u0 = _gaussian(H.grid, 0.5, xi=2.0)
    fwd = propagate(H, u0, 1.5, dt=1.5 / 3000, direction=-1)
    back = propagate(H, fwd.final, 1.5, dt=1.5 / 3000, direction=+1, gauge=fwd.gauge)
    assert np.linalg.norm(back.final - u0) / np.linalg.norm(u0) < 1e-8


def test_directions_are_conjugate():
    H = _oscillator(256)
    u0 = _gaussian(H.grid, 0.3)
    a = propagate(H, u0, 0.5, dt=0.5 / 500, direction=-1, gauge=0.0)
    b = propagate(H, np.conj(u0), 0.5, dt=0.5 / 500, direction=+1, gauge=0.0)
    np.testing.assert_allclose(np.conj(b.final), a.final, atol=1e-13)


def test_propagate_validation():
    g = build_grid(8.0, 256)
    H = assemble_hamiltonian(ModelSpec(1, 1.0), g, AbsorbingLayer.default(g))
    with pytest.raises(ValueError):
        propagate(H, _gaussian(g), 1.0)
    with pytest.raises(ValueError):
        propagate(_oscillator(256), _gaussian(g), 1.0, direction=0)


def test_time_step_rule():
    H = _oscillator(256)
    u0 = _gaussian(H.grid)
    c, spread = energy_spread(H, u0)
    dt = time_step(H.shifted(c), u0, 1.0)
    assert dt == pytest.approx(min(0.1 / spread, 1.0 / 2000))


def test_boundary_monitor_flags_escape():
    g = build_grid(4.0, 1024)
    H = assemble_hamiltonian(ModelSpec(1, 0.1, +1, 0.0), g)
    # group velocity 2 h^2 xi = 1.2 carries the packet into |x| > 0.9 L
    run = propagate(H, _gaussian(g, 2.0, 0.3, xi=60.0), 2.0)
    assert not run.valid


def test_trapezoid():
    t = np.linspace(0, 1, 101)
    assert trapezoid(t ** 2, t[1]) == pytest.approx(1 / 3, abs=1e-4)


def test_zero_mode_has_no_angular_part():
    m = 2
    H = mode_operator(m, 0, 24.0, n=resolving_points(24.0, 1 / 8))
    u0 = _gaussian(H.grid, 0.5)
    run = propagate(H, u0, 0.5, k=0, observables=smoothing_observables(H.grid, 0))
    rep = smoothing_report(run, m)
    assert rep.J_theta == 0.0
    u = GridFunction(H.grid, u0)
    assert rep.J_x / fractional_deriv_norm(u, 0.5) ** 2 < 1.0
    assert rep.valid


def test_report_requires_observables():
    H = _oscillator(256)
    with pytest.raises(ValueError):
        smoothing_report(propagate(H, _gaussian(H.grid), 0.1), 2)


def test_data_norm():
    g = build_grid(8.0, 512)
    u = GridFunction(g, _gaussian(g))
    D = smoothing_data_norm(u, 4, 2)
    assert D == pytest.approx(17 ** (2 / 3) * u.norm() ** 2 + fractional_deriv_norm(u, 0.5) ** 2)


def test_smoothing_away_from_orbit():
    # data at |x| >= 2 with the weight |x|^m <x>^{-m-3/2}: bounded against the
    # surface H^{1/2} norm, with no loss in k
    m, L, T = 2, 24.0, 0.1
    ratios = []
    for k in (16, 64, 128):
        H = mode_operator(m, k, L, n=resolving_points(L, 1.0 / k))
        x = H.grid.x
        u0 = np.exp(-((x - 3) / 0.4) ** 2 / 2 + 2j * x) + np.exp(-((x + 3.5) / 0.5) ** 2 / 2 - 1j * x)
        w = lambda s: np.abs(s) ** m * japanese(s) ** (-m - 1.5)
        run = propagate(H, u0, T, k=k, observables=smoothing_observables(H.grid, k, theta_weight=w))
        assert run.valid
        u = GridFunction(H.grid, u0)
        surface_h12 = np.sqrt(1 + k * k) * u.norm() ** 2 + fractional_deriv_norm(u, 0.5) ** 2
        ratios.append(trapezoid(run.observables["theta"], run.dt) / surface_h12)
    assert max(ratios) < 0.2
    assert ratios[2] / ratios[1] < 1.5


@settings(max_examples=10)
@given(st.integers(min_value=0, max_value=2 ** 31))
def test_random_data_decays(seed):
    g = build_grid(24.0, 2048)
    u = random_initial_data(g, np.random.default_rng(seed))
    assert np.max(np.abs(u[:20])) < 1e-10 and np.max(np.abs(u[-20:])) < 1e-10


def test_smoothing_suite_small():
    reports = smoothing_suite(2, ks=(0, 4), per_k=2, seed=3)
    assert len(reports) == 4
    for r in reports:
        assert r.valid
        for v in (r.J_theta, r.J_x, r.D):
            assert np.isfinite(v) and v >= 0
    assert smoothing_time(0, 2) == 0.5


def test_saturation_B():
    assert saturation_B(1.0, 10.0) == pytest.approx((1 - np.exp(-0.2)) / 2, rel=1e-15)
    assert saturation_B(1.0, 10.0) == pytest.approx(0.09063462346100909, rel=1e-14)


def test_saturation_single():
    r = saturation_experiment(2, 16)
    assert r.valid
    assert r.ansatz_match < 0.02
    assert r.B == pytest.approx(saturation_B(1.0, 10.0), rel=1e-12)
    assert r.rho > 0
    assert r.fidelity < 0.5


def test_saturation_fidelity_shrinks_with_A():
    d = [saturation_experiment(2, 16, A).fidelity for A in (10, 20, 40)]
    assert d[0] > d[1] > d[2]


def test_saturation_validation():
    with pytest.raises(ValueError):
        saturation_experiment(1, 16)
    with pytest.raises(ValueError):
        saturation_experiment(2, 4)
    with pytest.raises(ResolutionError):
        saturation_experiment(2, 16, half_width=3.0)
