"""Saturation diagnostics over k and A: rho(k), ansatz match and fidelity.

The fidelity ||psi(t) - e^{it tau} phi0|| / ||phi0|| stays near a k-independent
value that shrinks as A grows, consistent with an O(1/A) deviation.
"""
from trapsmooth.evolution import saturation_experiment

if __name__ == "__main__":
    print(f"{'A':>5} {'k':>5} {'rho':>10} {'fidelity':>9} {'ansatz':>9} {'bdry':>9}")
    for A in (10.0, 20.0, 40.0):
        for k in (16, 32, 64, 128):
            r = saturation_experiment(2, k, A=A)
            print(f"{A:5g} {k:5d} {r.rho:10.6f} {r.fidelity:9.4f} {r.ansatz_match:9.1e} {r.boundary_mass:9.1e}")
