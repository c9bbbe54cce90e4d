"""
Hierarchical polycrystal laminates
==================================

One anisotropic crystal is laminated with rotated copies of itself, level
after level.  The result does not depend on the reference constant used in
the iteration, and a single level reproduces a stripe computed on the grid.
"""

import numpy as np

from effcond.field_space import AdmissiblePair, stripes
from effcond.laminate_models import LaminateProgram, polycrystal_laminate, rotation
from effcond.reference_solver import solve_effective

crystal = np.array([[3.0, 0.4], [0.4, 1.0]])
angles = [0, 70, 20, 45]
fractions = [0.3, 0.6, 0.5]
rots = np.array([rotation(a) for a in angles])
n0 = np.array([0.6, 0.8])

for ref in (None, 10.0, 100.0):
    prog = LaminateProgram(crystal, n0, rots, fractions, sigma_ref=ref)
    print(f"sigma_ref={prog.sigma_ref:7.3f}", np.round(polycrystal_laminate(prog).real, 12).tolist())

# one level: crystal rotated by 70 degrees in rows {0, 1, 2, 6, 7} of an 8 x 8 cell
R1 = rotation(70)
prog = LaminateProgram(crystal, R1 @ [1.0, 0.0], np.array([rotation(0), R1]), [5 / 8])
grid = solve_effective(stripes(8, [0, 1, 2, 6, 7]), AdmissiblePair(R1.T @ crystal @ R1, crystal),
                       tol=1e-13).sigma_star
print("laminate vs grid:", np.abs(polycrystal_laminate(prog) - grid).max())
