"""Sparse LU of shifted pentadiagonal operators.

With natural column ordering SuperLU performs a banded LU (fill stays within
the band plus pivoting rows), which is what the solvers below rely on.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import NumericalFailure
from .grid import BandedOperator


class ShiftedFactorization:
    """LU of (H - shift*I) with forward and adjoint solves."""

    def __init__(self, H: BandedOperator, shift: complex = 0.0):
        self.H = H
        self.shift = shift
        A = H.tosparse()
        if shift != 0:
            dtype = complex if np.iscomplexobj(A) or complex(shift).imag != 0 else float
            if dtype is float:
                shift = float(np.real(shift))
            A = A - shift * sp.identity(H.n, dtype=dtype, format="csc")
        self.A = A.tocsc()
        self.real = not np.issubdtype(self.A.dtype, np.complexfloating)
        try:
            self._lu = splu(self.A, permc_spec="NATURAL")
        except RuntimeError as exc:
            raise NumericalFailure(f"singular factorization at shift {shift}: {exc}") from exc

    def _apply(self, b, trans):
        b = np.asarray(b)
        if self.real and np.iscomplexobj(b):
            re = self._lu.solve(np.ascontiguousarray(b.real), trans=trans)
            im = self._lu.solve(np.ascontiguousarray(b.imag), trans=trans)
            return re + 1j * im
        if not self.real:
            b = b.astype(complex)
        return self._lu.solve(np.ascontiguousarray(b), trans=trans)

    def solve(self, b):
        return self._apply(b, "N")

    def solve_adjoint(self, b):
        return self._apply(b, "T" if self.real else "H")

    def matvec(self, v):
        return self.A @ v

    def rmatvec(self, v):
        return self.A.conj().T @ v


def factorize(H: BandedOperator, shift: complex = 0.0) -> ShiftedFactorization:
    return ShiftedFactorization(H, shift)
