"""Crank-Nicolson evolution of single Fourier modes and local-smoothing functionals."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .errors import NumericalFailure, ResolutionError
from .geometry import ModePotentialSpec, SurfaceProfile
from .grid import (BandedOperator, GridFunction, assemble_hamiltonian, build_grid, d_dx,
                   fractional_deriv_norm, japanese, l2_norm, resolving_points, smooth_cutoff)
from .linalg import factorize
from .quasimode import SpectralParamE, build_quasimode

NORM_TOL = 1e-10
BOUNDARY_MASS_TOL = 1e-8
MIN_STEPS = 2000


@dataclass
class EvolutionRun:
    k: int
    operator: BandedOperator
    dt: float
    T: float
    direction: int
    times: np.ndarray
    norms: np.ndarray
    boundary_mass: float
    observables: Dict[str, np.ndarray] = field(default_factory=dict)
    final: Optional[np.ndarray] = field(default=None, repr=False)
    initial: Optional[np.ndarray] = field(default=None, repr=False)
    states: Optional[np.ndarray] = field(default=None, repr=False)
    gauge: float = 0.0

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms / self.norms[0] - 1.0)))

    @property
    def valid(self) -> bool:
        return self.boundary_mass < BOUNDARY_MASS_TOL and self.norm_drift < NORM_TOL


def energy_spread(H: BandedOperator, u0) -> tuple:
    """(Rayleigh quotient c, ||(H - c) u0|| / ||u0||); both conserved by the flow."""
    Hu = H.matvec(u0)
    nn = np.vdot(u0, u0).real
    c = np.vdot(u0, Hu).real / nn
    return c, float(np.linalg.norm(Hu - c * u0) / np.sqrt(nn))


def time_step(H: BandedOperator, u0, T: float, min_steps: int = MIN_STEPS) -> float:
    """dt = min(1 / (10 * spread), T / min_steps) for the gauge-shifted operator."""
    _, spread = energy_spread(H, u0)
    dt = T / min_steps
    if spread > 0:
        dt = min(dt, 0.1 / spread)
    return dt


def propagate(H: BandedOperator, u0, T: float, dt: Optional[float] = None, direction: int = -1,
              k: int = 0, observables: Optional[Dict[str, Callable]] = None,
              store_every: int = 0, gauge: Optional[float] = None) -> EvolutionRun:
    """Crank-Nicolson for du/dt = direction * i * H u.

    Observables are callables ``fn(u, t)`` recorded at every step.

    direction=-1 is D_t + H = 0 (du/dt = -iHu); direction=+1 the reversed flow.
    ``gauge`` (default: the Rayleigh quotient of u0) is subtracted from H; it
    only changes a global phase, which observables built from |u| and
    |du/dx| do not see.  The step count is rounded up so that it lands on T.
    """
    if not H.hermitian:
        raise ValueError("propagate needs a Hermitian operator")
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    u = np.asarray(u0, dtype=complex).copy()
    c = energy_spread(H, u)[0] if gauge is None else float(gauge)
    Hs = H.shifted(c)
    if dt is None:
        dt = time_step(Hs, u, T)
    if not dt > 0:
        raise ValueError("time step must be positive")
    steps = max(1, int(np.ceil(T / dt - 1e-9)))
    dt = T / steps
    # (I - i a Hs) u_{j+1} = (I + i a Hs) u_j with a = direction*dt/2, i.e. (Hs + i/a) u_{j+1} = -(Hs - i/a) u_j
    a = direction * dt / 2.0
    fac = factorize(Hs, -1j / a)
    grid = H.grid
    edge = np.abs(grid.x) > 0.9 * grid.L
    observables = observables or {}
    obs = {name: np.empty(steps + 1) for name in observables}
    norms = np.empty(steps + 1)
    stored = []
    bmass = 0.0

    def record(j, v):
        nonlocal bmass
        norms[j] = l2_norm(v, grid.dx)
        bmass = max(bmass, grid.dx * float(np.sum(np.abs(v[edge]) ** 2)))
        for name, fn in observables.items():
            obs[name][j] = fn(v, j * dt)
        if store_every and j % store_every == 0:
            stored.append(v.copy())

    record(0, u)
    for j in range(1, steps + 1):
        rhs = -(Hs.matvec(u) - (1j / a) * u)
        u = fac.solve(rhs)
        record(j, u)
    return EvolutionRun(k, H, dt, T, direction, dt * np.arange(steps + 1), norms, bmass, obs,
                        u, np.asarray(u0, dtype=complex), np.array(stored) if stored else None, c)


def trapezoid(values, dt: float) -> float:
    v = np.asarray(values)
    return float(dt * (v.sum() - 0.5 * (v[0] + v[-1])))


# --- local smoothing ----------------------------------------------------------

@dataclass
class SmoothingReport:
    k: int
    T: float
    J_theta: float
    J_x: float
    D: float
    valid: bool = True

    @property
    def ratio_theta(self) -> float:
        return self.J_theta / self.D

    @property
    def ratio_x(self) -> float:
        return self.J_x / self.D


def smoothing_observables(grid, k: int, theta_weight=None):
    x = grid.x
    w_theta = japanese(x) ** -1.5 if theta_weight is None else theta_weight(x)
    w_x = japanese(x) ** -1.0
    dx = grid.dx
    return {
        "theta": lambda v, t: (abs(k) * l2_norm(w_theta * v, dx)) ** 2,
        "x": lambda v, t: l2_norm(w_x * d_dx(v, dx), dx) ** 2,
    }


def smoothing_data_norm(u0: GridFunction, k: int, m: int) -> float:
    """D = <k>^{2m/(m+1)} ||u0||^2 + ||<D_x>^{1/2} u0||^2."""
    return (1 + k * k) ** (m / (m + 1)) * u0.norm() ** 2 + fractional_deriv_norm(u0, 0.5) ** 2


def smoothing_report(run: EvolutionRun, m: int) -> SmoothingReport:
    if "theta" not in run.observables or "x" not in run.observables:
        raise ValueError("run was not recorded with smoothing observables")
    u0 = GridFunction(run.operator.grid, run.initial)
    D = smoothing_data_norm(u0, run.k, m)
    return SmoothingReport(run.k, run.T, trapezoid(run.observables["theta"], run.dt),
                           trapezoid(run.observables["x"], run.dt), D, run.valid)


def mode_operator(m: int, k: int, L: float, include_V1: bool = True, n: Optional[int] = None):
    spec = ModePotentialSpec(SurfaceProfile(m), k=k, include_V1=include_V1)
    grid = build_grid(L, n or resolving_points(L, spec.wavelength))
    return assemble_hamiltonian(spec, grid)


def random_initial_data(grid, rng, n_bumps: int = 3, centre: float = 1.0,
                        width=(0.3, 0.6), freq: float = 2.0) -> np.ndarray:
    """Sum of modulated Gaussians centred in [-centre, centre]."""
    x = grid.x
    u = np.zeros(grid.n, dtype=complex)
    for _ in range(n_bumps):
        a = rng.uniform(-centre, centre)
        w = rng.uniform(*width)
        xi = rng.uniform(-freq, freq)
        c = rng.standard_normal() + 1j * rng.standard_normal()
        u += c * np.exp(-((x - a) / w) ** 2 / 2 + 1j * xi * x)
    return u


def smoothing_time(k: int, m: int, scale: float = 0.5) -> float:
    """scale * <k>^{-2/(m+1)}: the weak semiclassical time of mode k."""
    return scale * (1 + k * k) ** (-1.0 / (m + 1))


def smoothing_suite(m: int = 2, ks=(0, 1, 4, 16, 64), per_k: int = 4, seed: int = 0,
                    L: float = 24.0):
    """Seeded random data spread over the modes ``ks``; one SmoothingReport each."""
    rng = np.random.default_rng(seed)
    reports = []
    for k in ks:
        H = mode_operator(m, k, L, n=resolving_points(L, 1.0 / max(abs(k), 8)))
        obs = smoothing_observables(H.grid, k)
        T = smoothing_time(k, m)
        for _ in range(per_k):
            u0 = random_initial_data(H.grid, rng)
            run = propagate(H, u0, T, k=k, observables=obs)
            reports.append(smoothing_report(run, m))
    return reports


# --- saturation on the weak semiclassical time scale ------------------------

@dataclass
class SaturationReport:
    m: int
    k: int
    A: float
    alpha: float
    beta: float
    T: float
    rho: float
    ansatz_integral: float
    ansatz_closed_form: float
    B: float
    fidelity: float
    boundary_mass: float
    norm_drift: float
    times: np.ndarray = field(repr=False)
    local_mass: np.ndarray = field(repr=False)

    @property
    def ansatz_match(self) -> float:
        return abs(self.ansatz_integral / self.ansatz_closed_form - 1.0)

    @property
    def valid(self) -> bool:
        return self.boundary_mass < BOUNDARY_MASS_TOL and self.norm_drift < NORM_TOL


def saturation_B(beta: float, A: float) -> float:
    return (1.0 - np.exp(-2.0 * beta / A)) / (2.0 * beta)


def saturation_experiment(m: int, k: int, A: float = 10.0, alpha: float = 1.0, beta: float = 1.0,
                          half_width: float = 12.0, include_V1: bool = True) -> SaturationReport:
    """Evolve the quasimode e^{ik theta} u~ (h = 1/|k|) under the full mode operator.

    The flow is (D_t + Delta~) psi = 0, i.e. d psi/dt = +i P_k psi, over
    T = |k|^{-2/(m+1)}/A.  The ansatz e^{it tau} phi0 with
    tau = k^2 (1 + E) is tracked alongside for the fidelity diagnostic.
    """
    if m < 2 or abs(k) < 8:
        raise ValueError("saturation needs m >= 2 and |k| >= 8")
    h = 1.0 / abs(k)
    E = SpectralParamE(alpha, beta, h, m)
    g = E.gamma
    L = half_width * g
    spec = ModePotentialSpec(SurfaceProfile(m), k=k, include_V1=include_V1)
    grid = build_grid(L, resolving_points(L, spec.wavelength, minimum=int(np.ceil(2 * L / g * 64 / 4))))
    q = build_quasimode(E, grid)
    r_chi = 4 * g
    chi = smooth_cutoff(grid.x / r_chi)
    if np.any(chi[q.support()] < 1.0):
        raise ResolutionError("cutoff is not identically 1 on the quasimode support")
    if 2 * r_chi >= 0.9 * L:
        raise ResolutionError("cutoff support reaches the boundary monitor region")
    phi0 = q.u_tilde / q.norm
    H = assemble_hamiltonian(spec, grid)
    T = abs(k) ** (-2.0 / (m + 1)) / A
    kE = k * k * E.value  # tau - k^2

    obs = {
        "local": lambda v, t: l2_norm(chi * v, grid.dx) ** 2,
        "fidelity": lambda v, t: l2_norm(v - np.exp(1j * t * kE) * phi0, grid.dx),
    }
    run = propagate(H, phi0, T, direction=+1, k=k, observables=obs, gauge=float(k * k))
    fid = float(np.max(run.observables["fidelity"]))
    weight = 1.0 + k * k
    numer = weight * trapezoid(run.observables["local"], run.dt)
    rho = numer / (weight ** (m / (m + 1)))
    # separated ansatz: ||<D_theta> e^{it tau} phi0||^2 = weight * exp(-2 t Im tau)
    ansatz = weight * np.exp(-2.0 * run.times * kE.imag)
    ansatz_integral = trapezoid(ansatz, run.dt)
    B = (1.0 - np.exp(-2.0 * T * beta * abs(k) ** (2.0 / (m + 1)))) / (2.0 * beta)
    closed = B * abs(k) ** (-2.0 / (m + 1)) * weight
    return SaturationReport(m, k, A, alpha, beta, T, rho, ansatz_integral, closed, B, fid,
                            run.boundary_mass, run.norm_drift, run.times, run.observables["local"])
