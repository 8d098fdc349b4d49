"""Reflection of the default absorbing layer over h and the probe energy z.

The layer strength is eta = c * h; this prints the reflection table for a few
values of c so the default can be re-derived.
"""
import numpy as np

from trapsmooth.resolvent import LAYER_ETA_PER_H, layer_reflection

ENERGIES = (0.25, 0.5, 1.0, 2.0)

if __name__ == "__main__":
    for c in sorted({1.0, LAYER_ETA_PER_H, 2.0}):
        print(f"eta = {c:g} h" + ("  (default)" if c == LAYER_ETA_PER_H else ""))
        print("  h        " + "  ".join(f"z={z:<6g}" for z in ENERGIES))
        for j in range(3, 9):
            h = 2.0 ** -j
            row = [layer_reflection(h, z, eta=c * h) for z in ENERGIES]
            print(f"  2^-{j}     " + "  ".join(f"{r:.1e}  " for r in row))
    print("fixed eta = 1 at h = 2^-4, z = 1:", f"{layer_reflection(2.0 ** -4, 1.0, eta=1.0):.1e}")
