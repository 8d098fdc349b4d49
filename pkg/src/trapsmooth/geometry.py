"""Surface profile A(x) = (1 + x^{2m})^{1/(2m)} and the potentials derived from it.

All functions are vectorised over ``x`` and evaluated in closed form.  Powers
of |x| go through log space so that |x|^{2m} never overflows on wide grids.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class SurfaceProfile:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"degeneracy parameter m must be a positive integer, got {self.m!r}")


@dataclass(frozen=True)
class ModePotentialSpec:
    """Potential of one separated mode.

    Exactly one of ``k`` (Fourier mode, potential k^2 A^{-2} + V1) or ``h``
    (semiclassical form, potential A^{-2} + h^2 V1) is set.  ``coupling``
    multiplies the A^{-2} term; it is 1 except in the non-trapping branch
    of the mode split, where it equals k^2 / lambda^2.
    """

    profile: SurfaceProfile
    k: Optional[int] = None
    h: Optional[float] = None
    include_V1: bool = True
    coupling: float = 1.0

    def __post_init__(self):
        if (self.k is None) == (self.h is None):
            raise ValueError("exactly one of k or h must be given")
        if self.h is not None and not (0.0 < self.h <= 1.0):
            raise ValueError(f"semiclassical parameter must lie in (0, 1], got {self.h}")

    @property
    def semiclassical(self) -> bool:
        return self.h is not None

    @property
    def kinetic(self) -> float:
        """Coefficient of -d^2/dx^2."""
        return 1.0 if self.k is not None else self.h ** 2

    @property
    def wavelength(self) -> float:
        if self.h is not None:
            return self.h
        return 1.0 / max(abs(self.k), 1)


@dataclass(frozen=True)
class ModelSpec:
    """Pure-power model -h^2 d^2/dx^2 + sign * coeff * x^{2m}.

    ``coeff`` defaults to 1/m, the normalisation of the barrier-top model;
    the oscillator lower bound uses ``coeff=1``.
    """

    m: int
    h: float
    sign: int = 1
    coeff: Optional[float] = None

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.h <= 0:
            raise ValueError("h must be positive")

    @property
    def c(self) -> float:
        return 1.0 / self.m if self.coeff is None else float(self.coeff)

    @property
    def kinetic(self) -> float:
        return self.h ** 2

    @property
    def wavelength(self) -> float:
        return self.h

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        return self.sign * self.c * x ** (2 * self.m)


def _log_abs(x):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(x))


def _power_ratio(x, m, p, q):
    """|x|^p / (1 + x^{2m})^q, finite for all real x."""
    x = np.asarray(x, dtype=float)
    lx = _log_abs(x)
    s = np.logaddexp(0.0, 2 * m * lx)
    if p == 0:
        return np.exp(-q * s)
    with np.errstate(invalid="ignore"):
        out = np.exp(p * lx - q * s)
    return np.where(x == 0.0, 0.0, out)


def profile_A(profile: SurfaceProfile, x):
    x = np.asarray(x, dtype=float)
    m = profile.m
    return np.exp(np.logaddexp(0.0, 2 * m * _log_abs(x)) / (2 * m))


def inverse_square_A(profile: SurfaceProfile, x):
    """A^{-2}(x) = (1 + x^{2m})^{-1/m}."""
    return _power_ratio(x, profile.m, 0, 1.0 / profile.m)


def dA(profile: SurfaceProfile, x):
    """A'(x) = x^{2m-1} (1 + x^{2m})^{1/(2m) - 1}."""
    m = profile.m
    x = np.asarray(x, dtype=float)
    return np.sign(x) * _power_ratio(x, m, 2 * m - 1, 1.0 - 1.0 / (2 * m))


def d2A(profile: SurfaceProfile, x):
    """A''(x) = (2m-1) x^{2m-2} (1 + x^{2m})^{1/(2m) - 2}."""
    m = profile.m
    return (2 * m - 1) * _power_ratio(x, m, 2 * m - 2, 2.0 - 1.0 / (2 * m))


def subpotential_V1(profile: SurfaceProfile, x):
    """V1 = A''/(2A) - (A')^2 / (4A^2), from the closed forms of A'/A and A''/A."""
    m = profile.m
    ddA_over_A = (2 * m - 1) * _power_ratio(x, m, 2 * m - 2, 2.0)
    dA_over_A_sq = _power_ratio(x, m, 4 * m - 2, 2.0)
    return 0.5 * ddA_over_A - 0.25 * dA_over_A_sq


def curvature_K(profile: SurfaceProfile, x):
    """Gaussian curvature -(2m-1) x^{2m-2} (1 + x^{2m})^{-2}."""
    m = profile.m
    return -(2 * m - 1) * _power_ratio(x, m, 2 * m - 2, 2.0)


def mode_potential(spec: ModePotentialSpec, x):
    x = np.asarray(x, dtype=float)
    V1 = subpotential_V1(spec.profile, x) if spec.include_V1 else np.zeros_like(x)
    Ainv2 = inverse_square_A(spec.profile, x)
    if spec.k is not None:
        return spec.coupling * spec.k ** 2 * Ainv2 + V1
    return spec.coupling * Ainv2 + spec.h ** 2 * V1


def barrier_taylor_check(profile: SurfaceProfile, x):
    """|A^{-2}(x) - (1 - x^{2m}/m)|, the remainder of the barrier-top expansion.

    Only meaningful on |x| <= 1/2, where it is O(x^{4m}).
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 0.5):
        raise ValueError("barrier_taylor_check requires |x| <= 1/2")
    m = profile.m
    # -expm1 keeps the remainder accurate when it is far below machine epsilon
    t = x ** (2 * m)
    return np.abs(np.expm1(-np.log1p(t) / m) + t / m)
