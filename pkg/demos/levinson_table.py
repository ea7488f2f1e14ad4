"""Bound-state counts and low-energy phase shifts for a family of wells.

For each depth the table lists N_l from node counting next to δ_l(0+)/π
from the scattering pipeline; Levinson's theorem says they agree.
"""

import numpy as np

from spoints import scattering
from spoints.potentials import gaussian

for depth in (-4.0, -8.0, -16.0, -20.0, -30.0):
    rep = scattering.levinson_check(gaussian(depth), L_max=2)
    cells = "  ".join(f"l={c['l']}: N={c['N']} d/pi={c['delta_0'] / np.pi:6.3f}" for c in rep.channels)
    print(f"depth {depth:6.1f}  {cells}  index {rep.total_index}")
