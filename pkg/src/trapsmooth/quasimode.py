"""Complex-WKB quasimodes for the barrier-top model -h^2 d^2 - x^{2m}/m.

With E = (alpha + i beta) h^{2m/(m+1)} and phase
    w(x) = int_0^x (E + y^{2m}/m)^{1/2} dy,
the state u = (w')^{-1/2} exp(i w / h) solves (hD)^2 u = (w')^2 u + f u
exactly, and the cutoff state chi(x/gamma) u, gamma = h^{1/(m+1)}, has a
remainder of relative size O(h^{2m/(m+1)}).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NumericalFailure, ResolutionError
from .grid import Grid1D, build_grid, d2_dx2, l2_norm, smooth_cutoff_derivatives

QUAD_TOL = 1e-10
CROSS_CHECK_TOL = 1e-6
MIN_POINTS_ON_SUPPORT = 64


@dataclass(frozen=True)
class SpectralParamE:
    alpha: float
    beta: float
    h: float
    m: int

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        if not 0 < self.h <= 1:
            raise ValueError("h must lie in (0, 1]")
        if self.m < 2:
            raise ValueError("quasimodes are built for m >= 2 only")

    @property
    def value(self) -> complex:
        return (self.alpha + 1j * self.beta) * self.h ** (2 * self.m / (self.m + 1))

    @property
    def gamma(self) -> float:
        return self.h ** (1.0 / (self.m + 1))


def dphase(E: SpectralParamE, x):
    """w'(x) = (E + x^{2m}/m)^{1/2}, principal branch (Im > 0 since Im E > 0)."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(E.value + x ** (2 * E.m) / E.m)


def _panel_sums(E, a, b, order):
    t, w = leggauss(order)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    y = mid[:, None] + half[:, None] * t[None, :]
    return half * (dphase(E, y) @ w)


def phase(E: SpectralParamE, x):
    """w(x) by composite Gauss-Legendre quadrature, odd in x.

    Panels run between consecutive sorted |x| values and the breakpoints
    gamma, 2*gamma; each pass doubles the panel count until the cumulative
    integral is stable to QUAD_TOL relative.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    ax = np.abs(np.atleast_1d(x))
    g = E.gamma
    breaks = np.array([g, 2 * g])
    knots = np.unique(np.concatenate([[0.0], ax, breaks[breaks < ax.max()]]))
    a, b = knots[:-1], knots[1:]
    prev = None
    for level in range(12):
        split = 2 ** level
        s = np.linspace(0.0, 1.0, split + 1)
        aa = (a[:, None] + (b - a)[:, None] * s[None, :-1]).ravel()
        bb = (a[:, None] + (b - a)[:, None] * s[None, 1:]).ravel()
        sums = _panel_sums(E, aa, bb, 8).reshape(len(a), split).sum(axis=1)
        cum = np.concatenate([[0.0], np.cumsum(sums)])
        if prev is not None:
            scale = np.maximum(np.abs(cum), np.abs(E.value) ** 0.5 * E.gamma)
            if np.all(np.abs(cum - prev) <= QUAD_TOL * scale):
                break
        prev = cum
    else:
        raise NumericalFailure("phase quadrature did not converge")
    out = cum[np.searchsorted(knots, ax)] * np.sign(np.atleast_1d(x))
    return out[0] if scalar else out


def amplitude_f(E: SpectralParamE, x):
    """f = -h^2 x^{2m-2} ((1/4 + 1/(2m)) x^{2m} - (m - 1/2) E) (w')^{-4}."""
    x = np.asarray(x, dtype=float)
    m, h, Ev = E.m, E.h, E.value
    p = dphase(E, x)
    return -h ** 2 * x ** (2 * m - 2) * ((0.25 + 0.5 / m) * x ** (2 * m) - (m - 0.5) * Ev) / p ** 4


@dataclass
class Quasimode:
    E: SpectralParamE
    grid: Grid1D
    phase: np.ndarray = field(repr=False)
    dphase: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    u_tilde: np.ndarray = field(repr=False)
    cutoff: bool = True
    residual_norm: Optional[float] = None

    @property
    def gamma(self) -> float:
        return self.E.gamma

    @property
    def norm(self) -> float:
        return l2_norm(self.u_tilde, self.grid.dx)

    def support(self) -> np.ndarray:
        return np.abs(self.grid.x) <= 2 * self.gamma

    def to_csv(self, path):
        data = np.column_stack([self.grid.x, self.u_tilde.real, self.u_tilde.imag])
        np.savetxt(path, data, delimiter=",", header="x,re_u_tilde,im_u_tilde", comments="")


def quasimode_grid(E: SpectralParamE, half_width: float = 3.0, per_gamma: int = 1024) -> Grid1D:
    """Grid on [-half_width*gamma, half_width*gamma) with per_gamma points per gamma."""
    g = E.gamma
    return build_grid(half_width * g, int(2 * half_width * per_gamma))


def build_quasimode(E: SpectralParamE, grid: Optional[Grid1D] = None, cutoff: bool = True) -> Quasimode:
    grid = grid or quasimode_grid(E)
    g = E.gamma
    if cutoff and grid.L <= 2 * g:
        raise ResolutionError("grid must contain the support [-2 gamma, 2 gamma]")
    if 4 * g / grid.dx < MIN_POINTS_ON_SUPPORT:
        raise ResolutionError(f"need at least {MIN_POINTS_ON_SUPPORT} points across [-2 gamma, 2 gamma]")
    x = grid.x
    w = phase(E, x)
    p = dphase(E, x)
    u = p ** -0.5 * np.exp(1j * w / E.h)
    chi = smooth_cutoff_derivatives(x / g)[0] if cutoff else np.ones_like(x)
    return Quasimode(E, grid, w, p, u, chi * u, cutoff)


def residual_parts(q: Quasimode) -> dict:
    """Remainder R = (hD)^2 u~ - (w')^2 u~, analytically and by finite differences."""
    E, h, g, m = q.E, q.E.h, q.gamma, q.E.m
    x = q.grid.x
    p = q.dphase
    f = amplitude_f(E, x)
    if q.cutoff:
        _, c1, c2 = smooth_cutoff_derivatives(x / g)
        hDu = (-(h / 2j) * x ** (2 * m - 1) / p ** 2 + p) * q.u
        comm = -h ** 2 * g ** -2 * c2 * q.u + 2 * (h / 1j) / g * c1 * hDu
    else:
        comm = np.zeros_like(q.u)
    R_an = f * q.u_tilde + comm
    R_fd = -h ** 2 * d2_dx2(q.u_tilde, q.grid.dx) - p ** 2 * q.u_tilde
    dx = q.grid.dx
    return {"analytic": R_an, "fd": R_fd, "f_part": f * q.u_tilde, "commutator": comm,
            "f_sup": float(np.max(np.abs(f[q.support()]))),
            "commutator_norm": l2_norm(comm, dx),
            "cross_check": l2_norm(R_an - R_fd, dx) / l2_norm(R_an, dx)}


def residual(q: Quasimode) -> float:
    """||R|| / ||u~||, after cross-checking the analytic and finite-difference remainders."""
    parts = residual_parts(q)
    if parts["cross_check"] > CROSS_CHECK_TOL:
        raise NumericalFailure(
            f"analytic and finite-difference remainders disagree ({parts['cross_check']:.2e})", parts)
    q.residual_norm = l2_norm(parts["analytic"], q.grid.dx) / q.norm
    return q.residual_norm


def im_phase_sup(q: Quasimode) -> float:
    return float(np.max(np.abs(q.phase.imag[q.support()])))
