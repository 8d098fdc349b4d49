"""Uniform grids, grid functions, cutoffs and banded finite-difference Hamiltonians."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import ResolutionError
from .geometry import ModelSpec, ModePotentialSpec, mode_potential

# 4th-order centred stencil for -d^2/dx^2, times dx^2
LAPLACE4 = np.array([1.0, -16.0, 30.0, -16.0, 1.0]) / 12.0
POINTS_PER_WAVELENGTH = 8


@dataclass(frozen=True)
class Grid1D:
    L: float
    n: int

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.n)

    @property
    def xi(self) -> np.ndarray:
        """Angular frequencies of the periodised grid, in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def mirror(self, values):
        """values(-x) on the nodes where -x is also a node (all but x_0 = -L)."""
        v = np.asarray(values)
        out = np.full_like(v, np.nan)
        out[1:] = v[1:][::-1]
        return out


def build_grid(L: float, n: int) -> Grid1D:
    if not L > 0:
        raise ValueError(f"half-length must be positive, got {L}")
    if int(n) != n or n < 16 or n % 2:
        raise ValueError(f"point count must be an even integer >= 16, got {n}")
    return Grid1D(float(L), int(n))


@dataclass
class GridFunction:
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n,):
            raise ValueError("values must have one entry per grid node")

    def norm(self) -> float:
        return float(np.sqrt(self.grid.dx) * np.linalg.norm(self.values))


def l2_norm(values, dx: float) -> float:
    return float(np.sqrt(dx) * np.linalg.norm(values))


def japanese(x):
    return np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


def weighted_norm(f: GridFunction, s: float) -> float:
    """(dx * sum <x_j>^{-2s} |f_j|^2)^{1/2}."""
    w = japanese(f.grid.x) ** (-s)
    return l2_norm(w * f.values, f.grid.dx)


def _check_periodisable(f: GridFunction, tol: float = 1e-10):
    v = np.abs(f.values)
    scale = max(v.max(), np.finfo(float).tiny)
    if max(v[0], v[-1]) > tol * scale:
        raise ValueError("grid function does not decay at the ends; Fourier multipliers would wrap around")


def fourier_multiplier(f: GridFunction, symbol, check: bool = True) -> GridFunction:
    if check:
        _check_periodisable(f)
    mult = symbol(f.grid.xi)
    return GridFunction(f.grid, np.fft.ifft(mult * np.fft.fft(f.values)))


def fractional_deriv_norm(f: GridFunction, s: float, check: bool = True) -> float:
    """||<D>^s f|| computed with the discrete Fourier transform."""
    if check:
        _check_periodisable(f)
    fh = np.fft.fft(f.values)
    w = japanese(f.grid.xi) ** s
    # Plancherel for numpy's unnormalised FFT
    return float(np.sqrt(f.grid.dx / f.grid.n) * np.linalg.norm(w * fh))


# --- smooth cutoffs ---------------------------------------------------------

def _bump_logit(t):
    """g(t) = log(phi(t-1)/phi(2-t)) for 1 < t < 2, phi(t) = exp(-1/t)."""
    return -1.0 / (t - 1.0) + 1.0 / (2.0 - t)


def smooth_cutoff(s):
    """chi(s) = phi(2-|s|) / (phi(2-|s|) + phi(|s|-1)).

    Exactly 1 on |s| <= 1, exactly 0 on |s| >= 2, C-infinity, values in [0, 1].
    """
    t = np.abs(np.asarray(s, dtype=float))
    out = np.where(t <= 1.0, 1.0, 0.0)
    mid = (t > 1.0) & (t < 2.0)
    if np.any(mid):
        out = out.astype(float)
        out[mid] = expit(-_bump_logit(t[mid]))
    return out


def smooth_cutoff_derivatives(s):
    """(chi, chi', chi'') in closed form."""
    s = np.asarray(s, dtype=float)
    t = np.abs(s)
    c = smooth_cutoff(s)
    d1 = np.zeros_like(t)
    d2 = np.zeros_like(t)
    mid = (t > 1.0) & (t < 2.0)
    if np.any(mid):
        tm = t[mid]
        cm = c[mid]
        g1 = 1.0 / (tm - 1.0) ** 2 + 1.0 / (2.0 - tm) ** 2
        g2 = -2.0 / (tm - 1.0) ** 3 + 2.0 / (2.0 - tm) ** 3
        w = cm * (1.0 - cm)
        d1[mid] = -w * g1 * np.sign(s[mid])
        d2[mid] = w * (1.0 - 2.0 * cm) * g1 ** 2 - w * g2
    return c, d1, d2


def frequency_cutoff(f: GridFunction, scale: float, check: bool = True) -> GridFunction:
    """Apply psi(D/scale) with psi the standard smooth cutoff."""
    if not scale > 0:
        raise ValueError("cutoff scale must be positive")
    return fourier_multiplier(f, lambda xi: smooth_cutoff(xi / scale), check=check)


# --- Hamiltonians -----------------------------------------------------------

@dataclass(frozen=True)
class AbsorbingLayer:
    """Complex absorbing potential -i * eta * ((|x| - onset)_+)^power."""

    onset: float
    strength: float = 1.0
    power: int = 2

    def __post_init__(self):
        if not self.onset > 0 or not self.strength > 0 or self.power < 2:
            raise ValueError("absorbing layer needs onset > 0, strength > 0, power >= 2")

    def potential(self, x):
        d = np.clip(np.abs(np.asarray(x, dtype=float)) - self.onset, 0.0, None)
        return -1j * self.strength * d ** self.power

    @classmethod
    def default(cls, grid: Grid1D, strength: float = 1.0, power: int = 2):
        return cls(0.7 * grid.L, strength, power)


@dataclass
class BandedOperator:
    """Pentadiagonal matrix kinetic * (-d^2/dx^2) + diag(potential).

    Stored as the five diagonals of a symmetric-pattern band; only the
    potential may be complex.
    """

    grid: Grid1D
    kinetic: float
    potential: np.ndarray
    hermitian: bool
    description: str = ""
    bandwidth: int = 2
    _csc: Optional[sp.csc_matrix] = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.grid.n

    def offdiag(self):
        c = self.kinetic / self.grid.dx ** 2
        return c * LAPLACE4[1], c * LAPLACE4[0]

    @property
    def diagonal(self) -> np.ndarray:
        return self.kinetic / self.grid.dx ** 2 * LAPLACE4[2] + self.potential

    def tosparse(self) -> sp.csc_matrix:
        if self._csc is None:
            n = self.n
            a1, a2 = self.offdiag()
            dtype = complex if np.iscomplexobj(self.potential) else float
            self._csc = sp.diags(
                [np.full(n - 2, a2), np.full(n - 1, a1), self.diagonal,
                 np.full(n - 1, a1), np.full(n - 2, a2)],
                [-2, -1, 0, 1, 2], format="csc", dtype=dtype)
        return self._csc

    def toarray(self) -> np.ndarray:
        return self.tosparse().toarray()

    def matvec(self, v):
        v = np.asarray(v)
        a1, a2 = self.offdiag()
        out = self.diagonal * v
        out[1:] += a1 * v[:-1]
        out[:-1] += a1 * v[1:]
        out[2:] += a2 * v[:-2]
        out[:-2] += a2 * v[2:]
        return out

    def conj(self) -> "BandedOperator":
        return BandedOperator(self.grid, self.kinetic, np.conj(self.potential),
                              self.hermitian, self.description + " (conjugated)")

    def shifted(self, c: float) -> "BandedOperator":
        """H - c with a real constant c (used as a gauge shift)."""
        return BandedOperator(self.grid, self.kinetic, self.potential - c,
                              self.hermitian, self.description)

    def gershgorin_bound(self) -> float:
        a1, a2 = self.offdiag()
        return float(np.max(np.abs(self.diagonal)) + 2 * abs(a1) + 2 * abs(a2))


def check_resolution(grid: Grid1D, wavelength: float):
    if grid.dx > wavelength / POINTS_PER_WAVELENGTH:
        raise ResolutionError(
            f"dx = {grid.dx:.3g} exceeds wavelength/{POINTS_PER_WAVELENGTH} = "
            f"{wavelength / POINTS_PER_WAVELENGTH:.3g}; increase n")


def resolving_points(L: float, wavelength: float, minimum: int = 16) -> int:
    """Smallest even point count on [-L, L) satisfying the resolution rule."""
    n = int(np.ceil(2.0 * L * POINTS_PER_WAVELENGTH / wavelength))
    n += n % 2
    return max(n, minimum)


def assemble_hamiltonian(spec: Union[ModePotentialSpec, ModelSpec], grid: Grid1D,
                         layer: Optional[AbsorbingLayer] = None) -> BandedOperator:
    check_resolution(grid, spec.wavelength)
    x = grid.x
    if isinstance(spec, ModelSpec):
        V = spec.potential(x)
        desc = f"-h^2 d^2 {'+' if spec.sign > 0 else '-'} {spec.c:g} x^{2 * spec.m}, h={spec.h:g}"
    else:
        V = mode_potential(spec, x)
        if spec.semiclassical:
            desc = f"-h^2 d^2 + A^-2 + h^2 V1, m={spec.profile.m}, h={spec.h:g}"
        else:
            desc = f"-d^2 + k^2 A^-2 + V1, m={spec.profile.m}, k={spec.k}"
    if layer is not None:
        V = V + layer.potential(x)
        desc += f" + CAP(x0={layer.onset:g}, eta={layer.strength:g})"
        return BandedOperator(grid, spec.kinetic, V, False, desc)
    return BandedOperator(grid, spec.kinetic, np.asarray(V, dtype=float), True, desc)


def d_dx(values, dx: float):
    """4th-order centred first derivative with zero extension past the ends."""
    v = np.asarray(values)
    p = np.pad(v, 2)
    return (p[:-4] - 8 * p[1:-3] + 8 * p[3:-1] - p[4:]) / (12 * dx)


def d2_dx2(values, dx: float):
    """4th-order centred second derivative with zero extension past the ends."""
    v = np.asarray(values)
    p = np.pad(v, 2)
    return -(LAPLACE4[0] * p[:-4] + LAPLACE4[1] * p[1:-3] + LAPLACE4[2] * p[2:-2]
             + LAPLACE4[3] * p[3:-1] + LAPLACE4[4] * p[4:]) / dx ** 2
