import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from trapsmooth.errors import NumericalFailure, ResolutionError
from trapsmooth.fitting import fit_exponent
from trapsmooth.grid import build_grid, d2_dx2
from trapsmooth.quasimode import (SpectralParamE, amplitude_f, build_quasimode, dphase,
                                  im_phase_sup, phase, quasimode_grid, residual, residual_parts)

HS = [2.0 ** -j for j in range(4, 11)]

params = st.builds(SpectralParamE, st.floats(min_value=0.1, max_value=5),
                   st.floats(min_value=0.1, max_value=5), st.floats(min_value=1e-4, max_value=1.0),
                   st.integers(min_value=2, max_value=5))


def test_spectral_param():
    E = SpectralParamE(1.0, 2.0, 0.01, 2)
    assert E.value.imag > 0
    assert abs(E.value) == pytest.approx(np.sqrt(5) * 0.01 ** (4 / 3), rel=1e-14)
    assert E.gamma == pytest.approx(0.01 ** (1 / 3))
    for bad in ((0, 1, 0.1, 2), (1, -1, 0.1, 2), (1, 1, 2.0, 2), (1, 1, 0.1, 1)):
        with pytest.raises(ValueError):
            SpectralParamE(*bad)


def test_phase_basic():
    E = SpectralParamE(1, 1, 0.01, 2)
    assert phase(E, 0.0) == 0
    x = np.linspace(-0.5, 0.5, 101)
    w = phase(E, x)
    np.testing.assert_allclose(w, -w[::-1], rtol=0, atol=1e-15)
    assert dphase(E, 0.0) == pytest.approx(np.sqrt(E.value), rel=1e-15)


def test_phase_against_adaptive_quadrature():
    # oracle: scipy.integrate.quad on real and imaginary parts separately
    for m in (2, 3):
        E = SpectralParamE(1, 1, 2.0 ** -6, m)
        for x in (0.05, E.gamma, 1.7 * E.gamma, 2.5 * E.gamma):
            re = quad(lambda y: dphase(E, y).real, 0, x, epsabs=0, epsrel=1e-13, limit=200)[0]
            im = quad(lambda y: dphase(E, y).imag, 0, x, epsabs=0, epsrel=1e-13, limit=200)[0]
            assert phase(E, x) == pytest.approx(re + 1j * im, rel=1e-10)


def test_phase_derivative_by_differences():
    E = SpectralParamE(1, 1, 2.0 ** -5, 2)
    x = np.linspace(-0.6, 0.6, 2401)
    w = phase(E, x)
    dx = x[1] - x[0]
    fd = (w[2:] - w[:-2]) / (2 * dx)
    np.testing.assert_allclose(fd, dphase(E, x[1:-1]), rtol=1e-5)


@given(params, st.floats(min_value=-10, max_value=10))
def test_branch_and_bounds(E, x):
    p = dphase(E, x)
    assert p.imag > 0
    m, hp = E.m, E.h ** (2 * E.m / (E.m + 1))
    bound = E.beta * hp / (2 * np.sqrt(E.alpha * hp + x ** (2 * m) / m))
    assert p.imag <= bound * (1 + 1e-12)
    scale = np.sqrt(hp + x ** (2 * m) / m)
    # constant depends only on alpha and beta, not on h or x
    C = max(np.hypot(E.alpha, E.beta), 1.0) ** 0.5 / min(E.alpha, 1.0) ** 0.5
    assert scale / C <= abs(p) <= C * scale * (1 + 1e-12)


def test_amplitude_f():
    E = SpectralParamE(1, 1, 0.05, 2)
    assert amplitude_f(E, 0.0) == 0


@pytest.mark.parametrize("m", [2, 3])
def test_amplitude_f_conjugation_identity(m):
    # oracle: f = -h^2 a''/a with a = (w')^{-1/2}, by 4th-order differences
    E = SpectralParamE(1, 1, 2.0 ** -6, m)
    g = build_grid(3 * E.gamma, 6000)
    x = g.x
    a = dphase(E, x) ** -0.5
    inner = slice(10, -10)
    fd = -E.h ** 2 * d2_dx2(a, g.dx) / a
    np.testing.assert_allclose(fd[inner], amplitude_f(E, x)[inner],
                               atol=1e-6 * np.max(np.abs(amplitude_f(E, x))))


@pytest.mark.parametrize("m", [2, 3])
def test_f_sup_scaling(m):
    sups = [residual_parts(build_quasimode(SpectralParamE(1, 1, h, m)))["f_sup"] for h in HS]
    assert fit_exponent(HS, sups).slope == pytest.approx(2 * m / (m + 1), abs=0.1)


@pytest.mark.parametrize("m", [2, 3])
def test_norm_and_phase_scalings(m):
    qs = [build_quasimode(SpectralParamE(1, 1, h, m)) for h in HS]
    nsq = np.array([q.norm ** 2 / h ** ((1 - m) / (1 + m)) for q, h in zip(qs, HS)])
    assert nsq.max() / nsq.min() < 2
    C = np.array([im_phase_sup(q) / h for q, h in zip(qs, HS)])
    assert C.max() / C.min() < 2


def test_quasimode_shape():
    E = SpectralParamE(1, 1, 2.0 ** -6, 2)
    q = build_quasimode(E)
    x = q.grid.x
    inside = np.abs(x) <= E.gamma
    np.testing.assert_array_equal(q.u_tilde[inside], q.u[inside])
    assert np.all(q.u_tilde[~q.support()] == 0)
    ratio = np.abs(q.u[q.support()]) * np.abs(q.dphase[q.support()]) ** 0.5
    C = np.max(np.abs(np.log(ratio)))
    assert C < 1.0


def test_quasimode_resolution():
    E = SpectralParamE(1, 1, 2.0 ** -6, 2)
    with pytest.raises(ResolutionError):
        build_quasimode(E, quasimode_grid(E, per_gamma=8))
    with pytest.raises(ResolutionError):
        build_quasimode(E, build_grid(1.5 * E.gamma, 4096))


@pytest.mark.parametrize("m", [2, 3])
def test_residual_scalings(m):
    qs = [build_quasimode(SpectralParamE(1, 1, h, m)) for h in HS]
    res = [residual(q) for q in qs]
    assert fit_exponent(HS, res).slope >= 2 * m / (m + 1) - 0.1
    comm = [residual_parts(q)["commutator_norm"] for q in qs]
    assert fit_exponent(HS, comm).slope == pytest.approx((3 * m + 1) / (2 * (m + 1)), abs=0.1)
    assert max(residual_parts(q)["cross_check"] for q in qs) < 1e-6


def test_residual_cross_check_failure():
    E = SpectralParamE(1, 1, 2.0 ** -4, 2)
    q = build_quasimode(E, quasimode_grid(E, per_gamma=16))
    with pytest.raises(NumericalFailure):
        residual(q)


def test_no_cutoff_residual_is_f_u():
    E = SpectralParamE(1, 1, 2.0 ** -6, 2)
    q = build_quasimode(E, cutoff=False)
    parts = residual_parts(q)
    inner = slice(10, -10)
    diff = parts["fd"][inner] - parts["f_part"][inner]
    assert np.max(np.abs(diff)) < 1e-6 * np.max(np.abs(parts["f_part"]))
    assert np.all(parts["commutator"] == 0)


def test_csv_export(tmp_path):
    q = build_quasimode(SpectralParamE(1, 1, 2.0 ** -4, 2))
    path = tmp_path / "q.csv"
    q.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,re_u_tilde,im_u_tilde"
    assert len(lines) == q.grid.n + 1
