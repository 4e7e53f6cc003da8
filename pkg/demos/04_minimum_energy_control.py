"""Minimum-energy steering: the Gramian solve, its cost, and cone confinement.

Steering (t, x) to (T, y) with least control energy has a closed-form
solution through the covariance Gramian; the optimal cost is the Gramian
quadratic form of the target offset.  A brute-force least-squares
discretization converges to the same cost, and the whole trajectory stays
inside a dilation cone whose radius is the certified constant kappa times
the control norm.
"""

import numpy as np

from kolmo import (
    ConeSpec,
    ControlProblem,
    SpaceTimePoint,
    cone_membership,
    discrete_least_norm_control,
    kappa_estimate,
    optimal_control,
    trajectory,
    validate_structure,
)
from kolmo.control import control_value

langevin = validate_structure([[0.0, 0.0], [1.0, 0.0]], m=[1, 1])

# Push the velocity so that it returns to zero while doing no net work on
# the position; the cheapest way costs exactly 4.
problem = ControlProblem(langevin, 0.0, 1.0, x=[0.0, 0.0], y=[1.0, 0.0])
ctrl = optimal_control(problem)
print("optimal cost:", ctrl.cost)
print("endpoint reached:", trajectory(ctrl, 1.0), "target:", problem.y)

print("\ntrajectory and control profile:")
for s in np.linspace(0, 1, 6):
    g = trajectory(ctrl, s)
    v = control_value(ctrl, s)
    print(f"  s = {s:4.2f}: gamma = ({g[0]:+.4f}, {g[1]:+.4f})   vbar = {v[0]:+.4f}")

print("\nbrute-force piecewise-constant least-norm cost:")
for n in (8, 32, 128, 1000):
    c = discrete_least_norm_control(problem, n)
    print(f"  n = {n:5d}: {c:.8f}  (gap {c - ctrl.cost:.2e})")

# Cone confinement with the certified constant.
kappa = kappa_estimate(langevin)
radius = kappa * np.sqrt(ctrl.cost)
cone = ConeSpec(beta=1.0, r=radius, R=1.0, base=SpaceTimePoint(0.0, [0.0, 0.0]))
inside = all(
    cone_membership(cone, SpaceTimePoint(s, trajectory(ctrl, s)), langevin)
    for s in np.linspace(1 / 64, 1.0, 64)
)
print(f"\nkappa = {kappa:.6f}; all 64 sampled trajectory points in the cone: {inside}")
