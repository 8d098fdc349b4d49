"""Low eigenvalues, smallest singular values and rotated-oscillator resonances."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import NumericalFailure
from .fitting import ScalingFit, fit_exponent
from .geometry import ModelSpec
from .grid import BandedOperator, assemble_hamiltonian, build_grid, resolving_points
from .linalg import factorize

MAX_ITER = 500
RESIDUAL_TOL = 1e-10
ACCEPT_TOL = 1e-8


@dataclass
class SpectralResult:
    description: str
    eigenvalues: List[complex]
    sigma_min: Optional[float] = None
    residuals: List[float] = field(default_factory=list)
    iterations: List[int] = field(default_factory=list)
    eigenvectors: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def ground(self) -> float:
        return float(np.real(self.eigenvalues[0]))


def _rayleigh(H, v):
    Hv = H.matvec(v)
    theta = np.vdot(v, Hv).real
    return theta, Hv


def ground_energy(H: BandedOperator, count: int = 1, tol: float = RESIDUAL_TOL,
                  max_iter: int = MAX_ITER, seed: int = 0) -> SpectralResult:
    """Lowest ``count`` eigenvalues of a Hermitian H by shifted inverse iteration.

    Starts from a shift below the spectrum (the discrete Laplacian is
    positive semidefinite, so min V bounds the spectrum from below), deflates
    converged eigenvectors, and moves the shift to the Rayleigh quotient
    once the iterate is close to an eigenvector.
    """
    if not H.hermitian:
        raise ValueError("ground_energy needs a Hermitian operator")
    rng = np.random.default_rng(seed)
    base_shift = float(np.min(H.potential.real)) - 1e-3 * max(1.0, abs(float(np.min(H.potential.real))))
    vals, vecs, res, its = [], [], [], []
    for j in range(count):
        fac = factorize(H, base_shift)
        v = rng.standard_normal(H.n)
        refined = False
        r_prev = np.inf
        for it in range(1, max_iter + 1):
            for q in vecs:
                v -= np.dot(q, v) * q
            v = fac.solve(v)
            for q in vecs:
                v -= np.dot(q, v) * q
            v /= np.linalg.norm(v)
            theta, Hv = _rayleigh(H, v)
            r = np.linalg.norm(Hv - theta * v)
            scale = abs(theta) if theta != 0 else 1.0
            if r <= tol * scale:
                break
            # rounding floor of eps*||H|| reached: accept if within the reported bound
            if refined and r >= 0.9 * r_prev and r <= ACCEPT_TOL * scale:
                break
            r_prev = r
            if not refined and r <= 1e-3 * abs(theta - base_shift):
                # residual far below the distance to the base shift: the
                # Rayleigh quotient is already closest to the wanted eigenvalue
                try:
                    fac = factorize(H, theta - r)
                except NumericalFailure:
                    pass
                refined = True
        else:
            raise NumericalFailure(
                f"inverse iteration did not converge for eigenvalue {j} after {max_iter} steps",
                {"residual": r, "estimate": theta})
        vals.append(theta)
        vecs.append(v)
        res.append(r / scale)
        its.append(it)
    order = np.argsort(vals)
    return SpectralResult(
        H.description,
        [float(vals[i]) for i in order],
        residuals=[res[i] for i in order],
        iterations=[its[i] for i in order],
        eigenvectors=np.array([vecs[i] for i in order]).T,
    )


def oscillator_ground(m: int, h: float, L: float = 10.0, coeff: float = 1.0,
                      n: Optional[int] = None, count: int = 1) -> SpectralResult:
    """Ground states of -h^2 d^2 + coeff * x^{2m} on the default grid."""
    grid = build_grid(L, n or resolving_points(L, h))
    H = assemble_hamiltonian(ModelSpec(m, h, +1, coeff), grid)
    return ground_energy(H, count)


def rescaling_check(m: int, h_list: Sequence[float], L: float = 10.0) -> ScalingFit:
    """Fit log lambda_0(h) against log h for -h^2 d^2 + x^{2m}."""
    h_list = list(h_list)
    if len(h_list) < 4:
        raise ValueError("rescaling_check needs at least 4 values of h")
    ratios = np.array(h_list[1:]) / np.array(h_list[:-1])
    if not (np.allclose(ratios, 0.5) or np.allclose(ratios, 2.0)):
        raise ValueError("rescaling_check expects a dyadic list of h")
    lam = [oscillator_ground(m, h, L).ground for h in h_list]
    return fit_exponent(h_list, lam)


def sigma_min(H: BandedOperator, z: complex = 0.0, tol: float = 1e-10, block: int = 4,
              max_iter: int = MAX_ITER, seed: int = 0) -> float:
    """Smallest singular value of H - z by block inverse iteration on (H-z)^*(H-z).

    Each sweep applies (H-z)^{-1} (H-z)^{-*} to an orthonormal block, and the
    singular values of (H-z) restricted to the block are Ritz upper bounds
    that decrease monotonically to the bottom of the singular spectrum.
    """
    try:
        fac = factorize(H, z)
    except NumericalFailure:
        return 0.0
    rng = np.random.default_rng(seed)
    complex_case = not fac.real
    V = rng.standard_normal((H.n, block))
    if complex_case:
        V = V + 1j * rng.standard_normal((H.n, block))
    V, _ = np.linalg.qr(V)
    # below this, sigma_min is indistinguishable from 0 in floating point
    floor = 1e-14 * H.gershgorin_bound()
    prev = np.inf
    for it in range(1, max_iter + 1):
        W = fac.solve(fac.solve_adjoint(V))
        if not np.all(np.isfinite(W)):
            return 0.0
        V, _ = np.linalg.qr(W)
        AV = fac.A @ V
        s = np.linalg.svd(AV, compute_uv=False)
        smin = float(s[-1])
        if smin <= floor or abs(prev - smin) <= tol * smin:
            return smin
        prev = smin
    raise NumericalFailure(f"sigma_min did not converge in {max_iter} sweeps", {"estimate": prev})


def rotated_resonance(m: int, h: float, count: int = 1, L: float = 8.0,
                      n: Optional[int] = None) -> List[complex]:
    """Heuristic resonances e^{-i pi/(m+1)} mu_j h^{2m/(m+1)} of the barrier-top model.

    mu_j are eigenvalues of -d^2/dX^2 + X^{2m}/m, the operator obtained by
    rotating x -> e^{i pi/(2m+2)} x in -h^2 d^2 - x^{2m}/m and rescaling.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    grid = build_grid(L, n or resolving_points(L, 1.0 / 32.0))
    mu = ground_energy(assemble_hamiltonian(ModelSpec(m, 1.0, +1), grid), count).eigenvalues
    phase = np.exp(-1j * np.pi / (m + 1))
    return [complex(phase * mj * h ** (2 * m / (m + 1))) for mj in mu]


def barrier_sigma_min(m: int, h: float, L: float = 2.0, eta: float = 10.0,
                      points_per_h: int = 32) -> float:
    """sigma_min(P - 0) for the barrier model P = -h^2 d^2 - x^{2m}/m with a layer.

    The box is short (the potential is unbounded below, so a long box is
    unresolved near its ends) and the layer strong, because the local energy
    inside the layer is large and weak damping leaves near-real box modes.
    """
    from .grid import AbsorbingLayer

    grid = build_grid(L, resolving_points(L, h * 8.0 / points_per_h))
    H = assemble_hamiltonian(ModelSpec(m, h, -1), grid, AbsorbingLayer.default(grid, eta))
    return sigma_min(H, 0.0)
