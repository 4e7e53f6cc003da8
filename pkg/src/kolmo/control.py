"""Minimum-energy steering of the linear system and the cone geometry it fills.

The energy-optimal control reaching ``y`` at time ``T`` from ``(t, x)`` is
represented through the Gramian-solved coefficient ``w``:

    C(T - t) w = y - e^((T-t)B) x,      vbar(s) = (e^((T-s)B) sigma)^T w,

which hits the target identically (``gamma(T) = y`` is the Gramian identity)
and whose cost is the covariance quadratic form.  This convention reproduces
the classical cost formula; textbook displays of the control itself differ
by reversible sign/time conventions that do not affect the cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, expm

from .exceptions import GramianError
from .gramian import Gramian, gramian_matrix
from .model import SpaceTimePoint, dilation_exponents, sigma_matrix

__all__ = [
    "ControlProblem",
    "OptimalControl",
    "ConeSpec",
    "optimal_control",
    "optimal_cost",
    "trajectory",
    "control_value",
    "partial_cost",
    "discrete_least_norm_control",
    "kappa_estimate",
    "cone_membership",
    "cylinder_membership",
]


@dataclass(frozen=True)
class ControlProblem:
    """Endpoints ``(t, x) -> (T, y)`` over a drift system."""

    system: object
    t: float
    T: float
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if not self.T > self.t:
            raise ValueError(f"need T > t, got t={self.t}, T={self.T}")
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.shape != (self.system.d,) or y.shape != (self.system.d,):
            raise ValueError(
                f"endpoints must have dimension {self.system.d}, got {x.shape}, {y.shape}"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def horizon(self):
        return self.T - self.t


@dataclass(frozen=True)
class OptimalControl:
    """The Gramian-solved minimum-energy control and its cost."""

    problem: ControlProblem
    w: np.ndarray
    cost: float


def optimal_control(problem):
    """Solve the minimum-energy steering problem.

    Raises `GramianError` when the covariance is singular (coupling rank
    deficient), in which case not every target is reachable.
    """
    tau = problem.horizon
    C = gramian_matrix(problem.system, tau)
    offset = problem.y - expm(tau * problem.system.B) @ problem.x
    g = Gramian.from_matrix(C, tau, problem.system)
    # w = C^-1 offset via the Cholesky factor, cost = <C^-1 offset, offset>.
    w = cho_solve((g.chol, True), offset)
    cost = float(offset @ w)
    return OptimalControl(problem=problem, w=w, cost=max(cost, 0.0))


def optimal_cost(problem):
    """Minimal steering energy ``<C(T-t)^-1 offset, offset>``."""
    return optimal_control(problem).cost


def control_value(ctrl, s):
    """``vbar(s) = (e^((T-s)B) sigma)^T w`` on the control horizon."""
    p = ctrl.problem
    if not p.t <= s <= p.T:
        raise ValueError(f"s={s} outside [{p.t}, {p.T}]")
    sig = sigma_matrix(p.system.structure)
    return (expm((p.T - s) * p.system.B) @ sig).T @ ctrl.w


def trajectory(ctrl, s):
    """Controlled state ``gamma(s) = e^((s-t)B) x + C(s-t) e^((T-s)B^T) w``.

    The integral term collapses to a partial Gramian, so the evaluation is
    closed-form up to matrix exponentials; ``gamma(t) = x`` and
    ``gamma(T) = y`` hold identically.
    """
    p = ctrl.problem
    if not p.t <= s <= p.T:
        raise ValueError(f"s={s} outside [{p.t}, {p.T}]")
    flow = expm((s - p.t) * p.system.B) @ p.x
    if s == p.t:
        return flow
    C_partial = gramian_matrix(p.system, s - p.t)
    return flow + C_partial @ expm((p.T - s) * p.system.B).T @ ctrl.w


def partial_cost(ctrl, s_lo, s_hi):
    """Energy spent on ``[s_lo, s_hi]``: ``w^T [C(T - s_lo) - C(T - s_hi)] w``."""
    p = ctrl.problem
    if not p.t <= s_lo <= s_hi <= p.T:
        raise ValueError(f"need t <= s_lo <= s_hi <= T, got {s_lo}, {s_hi}")
    if s_lo == s_hi:
        return 0.0
    C_hi = gramian_matrix(p.system, p.T - s_lo)
    C_lo = (
        gramian_matrix(p.system, p.T - s_hi) if s_hi < p.T else np.zeros_like(C_hi)
    )
    return max(float(ctrl.w @ (C_hi - C_lo) @ ctrl.w), 0.0)


def discrete_least_norm_control(problem, n_steps):
    """Brute-force oracle: least-norm piecewise-constant control cost.

    The control is held constant on ``n_steps`` uniform intervals and the
    within-step flow is integrated exactly (zero-order hold), so the discrete
    reachability equation is a plain least-squares system; its minimum-norm
    solution cost converges to the optimal cost as ``n_steps`` grows.  This
    route never touches the Gramian solve it is used to check.
    """
    if n_steps < 2:
        raise ValueError(f"need at least 2 steps, got {n_steps}")
    p = problem
    d, m0 = p.system.d, p.system.m0
    dt = p.horizon / n_steps
    sig = sigma_matrix(p.system.structure)
    aug = np.zeros((d + m0, d + m0))
    aug[:d, :d] = p.system.B
    aug[:d, d:] = sig
    E = expm(aug * dt)
    A, G = E[:d, :d], E[:d, d:]

    M = np.zeros((d, n_steps * m0))
    Apow = np.eye(d)
    for k in range(n_steps - 1, -1, -1):
        M[:, k * m0 : (k + 1) * m0] = Apow @ G
        Apow = Apow @ A
    b = p.y - Apow @ p.x
    v, _, rank, _ = np.linalg.lstsq(M, b, rcond=None)
    if np.linalg.norm(M @ v - b) > 1e-8 * (1.0 + np.linalg.norm(b)):
        raise GramianError("discrete reachability map is singular; target unreachable")
    return float(v @ v) * dt


def kappa_estimate(system, s_grid=None):
    """Certified cone constant for controlled trajectories.

    For any control ``v`` on ``[t, t + s]``, the dilated reachable offset is
    bounded by ``kappa_raw(s) * ||v||_L2`` where ``kappa_raw(s)`` is the
    operator norm of the input-to-dilated-state map, i.e. the square root of
    the top eigenvalue of ``D(1/sqrt(s)) C(s) D(1/sqrt(s))``.  The returned
    value is the grid maximum with a 1.1 safety factor, so sampled
    trajectory points of any finite-energy control stay strictly inside the
    cone of that radius.
    """
    if s_grid is None:
        s_grid = np.arange(1, 1025) / 1024.0
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.size == 0:
        raise ValueError("s grid must be nonempty")
    if np.any(s_grid <= 0) or np.any(s_grid > 1):
        raise ValueError("s grid must lie in (0, 1]")
    exps = dilation_exponents(system.structure).astype(float)
    kappa_raw = 0.0
    for s in s_grid:
        C = gramian_matrix(system, s)
        D_inv = np.diag(s ** (-0.5 * exps))
        top = np.linalg.eigvalsh(D_inv @ C @ D_inv)[-1]
        kappa_raw = max(kappa_raw, np.sqrt(max(top, 0.0)))
    return 1.1 * kappa_raw


@dataclass(frozen=True)
class ConeSpec:
    """The cone ``{base o delta_l(beta, xi): |xi| < r, 0 < l <= R}``.

    Chain cones use ``beta < 1``; the trajectory-confinement cone uses
    ``beta = 1``, so the full range ``(0, 1]`` is accepted.
    """

    beta: float
    r: float
    R: float
    base: SpaceTimePoint

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError(f"need 0 < beta <= 1, got {self.beta}")
        if self.r <= 0 or self.R <= 0:
            raise ValueError("cone radii must be positive")


def cone_membership(cone, p, system):
    """Whether ``p`` lies in the cone: dilation scale in range, dilated offset small.

    Solves ``l = sqrt((t_p - t_base) / beta)`` and tests ``0 < l <= R`` and
    ``|D(1/l)(x_p - e^((t_p - t_base) B) x_base)| < r``.  Points at or before
    the base time are simply not members (no error), so chain construction
    can probe candidates freely.
    """
    dt = p.t - cone.base.t
    if dt <= 0:
        return False
    lam = np.sqrt(dt / cone.beta)
    if lam > cone.R:
        return False
    offset = p.x - expm(dt * system.B) @ cone.base.x
    exps = dilation_exponents(system.structure).astype(float)
    xi = lam ** (-exps) * offset
    return bool(np.linalg.norm(xi) < cone.r)


def cylinder_membership(center, rho, p, system):
    """Whether ``p`` lies in the dilated-translated unit cylinder at ``center``.

    The unit cylinder is ``{0 <= t < 1, |x| < 1}``; membership rescales
    ``center^-1 o p`` by ``delta_(1/rho)`` and tests against it (time
    half-open, space open).
    """
    if rho <= 0:
        raise ValueError(f"cylinder scale must be positive, got {rho}")
    dt = p.t - center.t
    rel = p.x - expm(dt * system.B) @ center.x
    s = dt / rho**2
    if not 0 <= s < 1:
        return False
    exps = dilation_exponents(system.structure).astype(float)
    xi = rho ** (-exps) * rel
    return bool(np.linalg.norm(xi) < 1.0)
