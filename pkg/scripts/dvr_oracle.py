"""Independent eigenvalue oracle: sinc-DVR dense eigensolver for -d^2 + c x^p.

The frozen constants in tests/test_spectral.py come from this script.  The
discretisation (Colbert-Miller sinc basis) shares nothing with the
finite-difference production path and converges spectrally.
"""
import numpy as np
from scipy.linalg import eigh


def dvr_eigenvalues(c, p, L=8.0, N=801, count=3):
    x = np.linspace(-L, L, N)
    dx = x[1] - x[0]
    i = np.arange(N)
    d = i[:, None] - i[None, :]
    with np.errstate(divide="ignore"):
        T = 2.0 * (-1.0) ** d / (dx ** 2 * d ** 2)
    T[i, i] = np.pi ** 2 / (3 * dx ** 2)
    return eigh(T + np.diag(c * x ** p), eigvals_only=True, subset_by_index=[0, count - 1])


if __name__ == "__main__":
    for c, p, label in [(1.0, 2, "x^2"), (1.0, 4, "x^4"), (0.5, 4, "x^4/2"), (1 / 3, 6, "x^6/3")]:
        a = dvr_eigenvalues(c, p, N=801)
        b = dvr_eigenvalues(c, p, N=1201)
        print(f"-d^2 + {label:6s} mu_0 = {b[0]:.13f}  (two resolutions differ by {abs(a[0] - b[0]):.1e})")
