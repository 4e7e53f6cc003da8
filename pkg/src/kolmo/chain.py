"""Harnack chains: stopping-time partitions that multiply a local inequality.

A chain splits ``[t, T]`` at times where either a fixed fraction of the
oscillation window (``tau * beta``) or a fixed control-energy budget
(``epsilon = (r / kappa)**2``) is exhausted, following the optimal steering
trajectory.  Each consecutive pair then sits inside a fixed cone of its
predecessor, so a local two-cylinder inequality with constant ``C`` compounds
to the factor ``C ** (1/beta + V/epsilon)`` across the whole chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .control import ConeSpec, cone_membership, optimal_control, trajectory
from .exceptions import ChainError
from .gramian import gramian_matrix
from .model import SpaceTimePoint

__all__ = [
    "HarnackConfig",
    "HarnackChain",
    "StepRecord",
    "HarnackFactor",
    "build_chain",
    "verify_chain",
    "chain_bound_exponent",
    "global_harnack_factor",
]

_TIME_TOL = 1e-12


@dataclass(frozen=True)
class HarnackConfig:
    """Constants of the local inequality and the derived chain budgets.

    ``epsilon`` is derived as ``(r / kappa)**2``; passing it explicitly with
    a different value is rejected.  The two cylinders at scale ``r`` with
    time offsets 0 and ``beta`` must be disjoint and contained in the unit
    cylinder, which for these axis-aligned cylinders means ``r**2 <= beta``
    and ``beta + r**2 <= 1``.
    """

    C_harnack: float
    beta: float
    r: float
    tau: float
    kappa: float
    epsilon: float = None

    def __post_init__(self):
        if self.C_harnack < 1:
            raise ValueError(f"need C >= 1, got {self.C_harnack}")
        if not 0 < self.beta < 1:
            raise ValueError(f"need 0 < beta < 1, got {self.beta}")
        if not 0 < self.r < 1:
            raise ValueError(f"need 0 < r < 1, got {self.r}")
        if not 0 < self.tau <= 1:
            raise ValueError(f"need 0 < tau <= 1, got {self.tau}")
        if self.kappa <= 0:
            raise ValueError(f"need kappa > 0, got {self.kappa}")
        derived = (self.r / self.kappa) ** 2
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", derived)
        elif abs(self.epsilon - derived) > 1e-12 * derived:
            raise ValueError(
                f"inconsistent config: epsilon={self.epsilon} but (r/kappa)^2={derived}"
            )
        if self.r**2 > self.beta or self.beta + self.r**2 > 1:
            raise ValueError(
                "cylinders at scale r with offsets 0 and beta are not disjoint "
                f"inside the unit cylinder (r^2={self.r ** 2}, beta={self.beta})"
            )


@dataclass(frozen=True)
class StepRecord:
    """One chain step: its interval, consumed energy, and the binding budget."""

    t_start: float
    t_end: float
    cost: float
    clause: str  # 'time-budget' | 'cost-budget' | 'terminal'


@dataclass(frozen=True)
class HarnackChain:
    """The stopping-time partition with its points and the bound exponent."""

    problem: object
    config: HarnackConfig
    times: tuple
    points: tuple
    steps: tuple
    V: float
    exponent: float

    @property
    def J(self):
        return len(self.times) - 1


def build_chain(problem, config):
    """Construct the chain for a steering problem with ``T - t <= tau``.

    Each next time is ``(t_j + tau*beta) ^ inf{s : energy on [t_j, s] >= eps}``
    capped at ``T``; the infimum is found by bisection on the closed-form
    monotone partial-cost map to absolute time tolerance 1e-12, and times
    within ``1e-9 * (T - t)`` of ``T`` snap to ``T``.  When the whole horizon
    fits a single time budget and the total energy is within one cost budget,
    the single-step fast path is taken verbatim.

    Raises
    ------
    ValueError
        If the horizon exceeds ``tau``.
    GramianError
        If the steering problem is unsolvable (singular covariance).
    ChainError
        If a constructed chain violates its own step-count bound.
    """
    if problem.horizon > config.tau + _TIME_TOL:
        raise ValueError(
            f"chain construction needs T - t <= tau, got {problem.horizon} > {config.tau}"
        )
    ctrl = optimal_control(problem)
    V = ctrl.cost
    eps = config.epsilon
    step_cap = config.tau * config.beta
    t, T = problem.t, problem.T
    snap = 1e-9 * problem.horizon
    exponent = 1.0 / config.beta + V / eps

    def tail_energy(s):
        # w^T C(T - s) w: the energy left after time s, decreasing in s.
        if s >= T:
            return 0.0
        return float(ctrl.w @ gramian_matrix(problem.system, T - s) @ ctrl.w)

    times = [t]
    points = [problem.x]
    steps = []

    if T <= t + step_cap + _TIME_TOL and V <= eps:
        times.append(T)
        points.append(problem.y)
        steps.append(StepRecord(t, T, V, "terminal"))
    else:
        max_steps = math.ceil(exponent) + 8
        while times[-1] < T:
            if len(steps) > max_steps:
                raise ChainError(
                    f"chain exceeded {max_steps} steps; stopping rule is not advancing"
                )
            t_j = times[-1]
            tail_j = tail_energy(t_j)
            right = min(t_j + step_cap, T)
            budget = tail_j - tail_energy(right)
            if budget < eps:
                t_next = right
                clause = "terminal" if right >= T - snap else "time-budget"
                step_cost = budget
            else:
                lo, hi = t_j, right
                while hi - lo > _TIME_TOL:
                    mid = 0.5 * (lo + hi)
                    if tail_j - tail_energy(mid) >= eps:
                        hi = mid
                    else:
                        lo = mid
                t_next = hi
                clause = "cost-budget"
                step_cost = tail_j - tail_energy(t_next)
            if T - t_next <= snap:
                t_next = T
                clause = "terminal"
                step_cost = tail_j
            times.append(t_next)
            points.append(
                problem.y if t_next == T else trajectory(ctrl, t_next)
            )
            steps.append(StepRecord(t_j, t_next, step_cost, clause))

    chain = HarnackChain(
        problem=problem,
        config=config,
        times=tuple(times),
        points=tuple(points),
        steps=tuple(steps),
        V=V,
        exponent=exponent,
    )
    _check_chain_invariants(chain)
    return chain


def _check_chain_invariants(chain):
    cfg = chain.config
    p = chain.problem
    for step in chain.steps:
        if step.t_end - step.t_start > cfg.tau * cfg.beta + 1e-9:
            raise ChainError(f"step [{step.t_start}, {step.t_end}] exceeds the time budget")
        if step.cost > cfg.epsilon + 1e-9 * max(1.0, cfg.epsilon):
            raise ChainError(f"step at {step.t_start} exceeds the cost budget")
    if np.linalg.norm(chain.points[0] - p.x) > 1e-8 * (1 + np.linalg.norm(p.x)):
        raise ChainError("chain does not start at x")
    if np.linalg.norm(chain.points[-1] - p.y) > 1e-8 * (1 + np.linalg.norm(p.y)):
        raise ChainError("chain does not end at y")
    if chain.J > math.ceil(chain.exponent) + 1:
        raise ChainError(
            f"J={chain.J} exceeds ceil(1/beta + V/eps) + 1 = {math.ceil(chain.exponent) + 1}"
        )


def verify_chain(chain, config, system):
    """Check the chaining geometry: every step lands in its predecessor's cone.

    Tests ``(t_{j+1}, gamma(t_{j+1}))`` against the cone with opening
    ``beta``, radius ``r``, and scale cap ``sqrt(tau)`` based at
    ``(t_j, gamma(t_j))``, plus the time-budget condition.  By construction
    each step's energy is at most ``epsilon = (r/kappa)**2``, so the dilated
    offset is below ``r`` with a 1/1.1 margin from the certified ``kappa``.
    """
    cfg = config
    R = np.sqrt(cfg.tau)
    for j in range(chain.J):
        base = SpaceTimePoint(chain.times[j], chain.points[j])
        nxt = SpaceTimePoint(chain.times[j + 1], chain.points[j + 1])
        if nxt.t - base.t > cfg.tau * cfg.beta + 1e-9:
            return False
        if not cone_membership(ConeSpec(cfg.beta, cfg.r, R, base), nxt, system):
            return False
    return True


def chain_bound_exponent(chain):
    """The multiplicative bound exponent ``1/beta + V/epsilon``.

    Also re-asserts the step-count bound ``J <= ceil(exponent) + 1``.
    """
    if chain.J > math.ceil(chain.exponent) + 1:
        raise ChainError(f"J={chain.J} violates the exponent bound {chain.exponent}")
    return chain.exponent


class HarnackFactor(NamedTuple):
    constructive: float
    statement_form: float
    log_constructive: float
    log_statement: float
    exponent: float
    cost: float


def global_harnack_factor(problem, config):
    """Constructive and statement-form global Harnack factors.

    The constructive factor is ``C ** (1/beta + V/eps)`` from the chain; the
    statement form is ``c * exp(c V)`` with ``c = max(C**(1/beta), ln C / eps)``,
    which dominates the constructive factor for every ``V >= 0``.  Both are
    also returned in log form since the plain values overflow for large
    energies.
    """
    chain = build_chain(problem, config)
    C = config.C_harnack
    log_constructive = chain.exponent * math.log(C)
    c = max(C ** (1.0 / config.beta), math.log(C) / config.epsilon)
    log_statement = math.log(c) + c * chain.V
    with np.errstate(over="ignore"):
        constructive = float(np.exp(log_constructive))
        statement = float(np.exp(log_statement))
    return HarnackFactor(
        constructive=constructive,
        statement_form=statement,
        log_constructive=log_constructive,
        log_statement=log_statement,
        exponent=chain.exponent,
        cost=chain.V,
    )
