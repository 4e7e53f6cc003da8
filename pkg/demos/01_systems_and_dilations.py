"""Block-structured systems, their group law, and anisotropic dilations.

The state space splits into blocks: diffusion acts on the first block only,
and the drift matrix feeds each block into the next through full-rank
couplings.  The natural geometry is non-Euclidean: translations twist by the
drift flow, and dilations stretch block j by r^(2j+1).
"""

import numpy as np

from kolmo import (
    SpaceTimePoint,
    dilation_matrix,
    group_compose,
    group_inverse,
    homogeneous_dimension,
    kalman_rank,
    scaled_system,
    validate_structure,
)

# The classic velocity/position system: noise enters the velocity, the
# position integrates it.
langevin = validate_structure([[0.0, 0.0], [1.0, 0.0]], m=[1, 1])
print("blocks:", langevin.structure.m, " d =", langevin.d)
print("coupling rank (should equal d):", kalman_rank(langevin))
print("homogeneous dimension Q:", homogeneous_dimension(langevin.structure))

# Left translations compose the drift flow into the shift.
zeta = SpaceTimePoint(1.0, [1.0, 0.0])
z = SpaceTimePoint(1.0, [0.0, 0.0])
w = group_compose(zeta, z, langevin)
print("\n(1,(1,0)) o (1,(0,0)) =", (w.t, w.x))
inv = group_inverse(w, langevin)
back = group_compose(inv, w, langevin)
print("inverse composes to identity:", (round(back.t, 15), back.x))

# Dilations are diagonal with exponents 1, 3, 5, ... per block.
D2 = dilation_matrix(langevin.structure, 2.0)
print("\nD(2) =", np.diag(D2), " det =", np.linalg.det(D2), "= 2^Q")

# Rescaling the drift: couplings are fixed points, diagonal blocks scale.
starful = validate_structure([[1.0, 0.0], [1.0, 0.0]], m=[1, 1])
print("\nB =\n", starful.B)
print("rescaled by r=2:\n", scaled_system(starful, 2.0).B)

# Structural validation names the violated clause.
try:
    validate_structure([[0.0, 0.0], [0.0, 0.0]], m=[1, 1])
except Exception as exc:
    print("\nrejected degenerate coupling:", getattr(exc, "clause", None), "-", exc)
