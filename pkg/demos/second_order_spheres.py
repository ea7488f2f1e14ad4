"""Order-two s-spheres: Kram determinant zeros against the 3D jet-rank scan.

Slow (a few minutes): it solves nine Lippmann-Schwinger problems and scans
a 24³ lattice of jet matrices.
"""

import numpy as np

from spoints import jets, lse, radial
from spoints.potentials import gaussian, support_ball

p = gaussian(-16.0)
oracle = radial.find_s_spheres(p, 2)
print("radial oracle radii:", np.round(oracle.radii, 4), "from factors", oracle.factors)
K = lse.assemble_kernel(lse.build_grid(support_ball(p), 16), p)
scan = jets.scan_spoints(K, 2, resolution=24)
print(f"scan cell {scan.cell:.3f}; {len(scan.candidates)} candidates")
print("sphere radii from the scan:", np.round(scan.sphere_radii(), 4))
