"""Distorted plane wave of a gaussian well: radial ODE against the 3D grid.

Prints Φ(r) from both pipelines along one ray and the s-sphere radius.
Run with ``python demos/phi_profiles.py [depth] [n]``.
"""

import sys

import numpy as np

from spoints import lse, radial
from spoints.potentials import gaussian, support_ball


def main(depth=-8.0, n=24):
    p = gaussian(depth)
    phir = radial.radial_phi(p)
    K = lse.assemble_kernel(lse.build_grid(support_ball(p), n), p)
    phi3 = lse.solve_field(K, 1.0)
    ray = np.array([0.6, 0.48, 0.64])
    print(f"depth {depth}, grid n={n}, h={K.grid.h:.3f}; Phi zeros at {np.round(phir.zeros(), 4)}")
    print(f"{'r':>6} {'radial':>10} {'volume':>10}")
    for r in np.linspace(0.1, 1.2 * p.support_radius, 16):
        print(f"{r:6.3f} {phir(np.array([r]))[0]:10.5f} {phi3.interpolate(r * ray)[0]:10.5f}")


if __name__ == "__main__":
    args = [float(a) for a in sys.argv[1:]]
    main(args[0] if args else -8.0, int(args[1]) if len(args) > 1 else 24)
