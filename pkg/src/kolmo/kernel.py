"""Explicit Gaussian fundamental solutions and the two-sided bound envelopes.

For a comparison operator with diffusion strength ``lambda`` (constant or a
positive time field), the fundamental solution is the Gaussian with mean
``e^((T-t)B) x`` and covariance ``lambda * C(T-t)`` (the time-weighted
covariance in the variable case).  All density work happens in log space;
ratios of kernels are exponent differences, so tails never overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, solve_triangular

from .exceptions import GramianError
from .gramian import Gramian, adaptive_simpson, gramian_matrix, quadratic_form
from .model import (
    dilation_exponents,
    dilation_matrix,
    homogeneous_dimension,
    sigma_matrix,
)

__all__ = [
    "GaussianKernel",
    "BoundEnvelope",
    "QuadratureSpec",
    "eval_kernel",
    "eval_log_kernel",
    "chapman_kolmogorov_residual",
    "normalization_residual",
    "pde_residual",
    "cauchy_solution",
    "bound_envelope_eval",
    "aronson_upper_form",
    "lower_bound_form",
    "covariance_upper_form",
    "payoff_polynomial",
    "payoff_gaussian_bump",
    "payoff_smoothed_indicator",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor Gauss-Legendre setup on a dilation-adapted box.

    The box is ``|D((T-t)^(-1/2)) (z - mean)|_inf <= box_radius``; at the
    default radius 8 the Gaussian mass outside is negligible for diffusion
    strengths up to about 1.
    """

    nodes: int = 160
    box_radius: float = 8.0


class GaussianKernel:
    """Gaussian fundamental solution of a comparison operator.

    Parameters
    ----------
    system : SystemMatrix
        Drift system; must satisfy the full-rank coupling condition, else
        covariance construction raises `GramianError`.
    lam : float or time field
        Diffusion strength.  A positive constant gives covariance
        ``lam * C(T-t)``; a positive scalar field of time gives the exact
        time-weighted covariance.

    Gramians are cached per ``(t, T)``; insertion into the cache is atomic
    under the GIL, so concurrent readers are safe.
    """

    def __init__(self, system, lam=1.0):
        self.system = system
        self.lam = lam
        self._constant = not hasattr(lam, "time_dependent") and not callable(lam)
        if self._constant and lam <= 0:
            raise ValueError(f"diffusion strength must be positive, got {lam}")
        self._cov_cache = {}
        self._flow_cache = {}

    @property
    def d(self):
        return self.system.d

    def lambda_at(self, t):
        """Diffusion strength at time ``t``."""
        if self._constant:
            return float(self.lam)
        if hasattr(self.lam, "time_dependent"):
            return float(self.lam(t, None))
        return float(self.lam(t))

    def flow(self, dt):
        key = float(dt)
        out = self._flow_cache.get(key)
        if out is None:
            out = expm(key * self.system.B)
            self._flow_cache[key] = out
        return out

    def covariance(self, t, T):
        """The covariance Gramian of the transition from ``t`` to ``T``."""
        if not T > t:
            raise ValueError(f"need T > t, got t={t}, T={T}")
        key = (float(t), float(T))
        out = self._cov_cache.get(key)
        if out is None:
            if self._constant:
                C = float(self.lam) * gramian_matrix(self.system, T - t)
            else:
                sig = sigma_matrix(self.system.structure)

                def integrand(s):
                    lam_s = self.lambda_at(s)
                    if lam_s <= 0:
                        raise GramianError(f"diffusion strength not positive at s={s}")
                    Es = expm((T - s) * self.system.B) @ sig
                    return lam_s * (Es @ Es.T)

                C = adaptive_simpson(integrand, float(t), float(T))
            out = Gramian.from_matrix(C, T - t, self.system)
            self._cov_cache[key] = out
        return out

    def log_batch(self, t, x, T, Y):
        """Log density at targets ``Y`` (n, d) from a single source ``(t, x)``."""
        cov = self.covariance(t, T)
        mean = self.flow(T - t) @ np.asarray(x, dtype=float)
        delta = np.atleast_2d(Y) - mean[None, :]
        W = solve_triangular(cov.chol, delta.T, lower=True)
        qf = np.einsum("ij,ij->j", W, W)
        return -0.5 * (self.d * np.log(2.0 * np.pi) + cov.logdet) - 0.5 * qf

    def log_batch_sources(self, t, X, T, y):
        """Log density at a single target ``y`` from sources ``X`` (n, d)."""
        cov = self.covariance(t, T)
        delta = np.asarray(y, dtype=float)[None, :] - np.atleast_2d(X) @ self.flow(T - t).T
        W = solve_triangular(cov.chol, delta.T, lower=True)
        qf = np.einsum("ij,ij->j", W, W)
        return -0.5 * (self.d * np.log(2.0 * np.pi) + cov.logdet) - 0.5 * qf


def eval_log_kernel(kernel, t, x, T, y):
    """Log of the Gaussian fundamental solution; stable arbitrarily far in the tail."""
    return float(kernel.log_batch(t, x, T, np.asarray(y, dtype=float)[None, :])[0])


def eval_kernel(kernel, t, x, T, y):
    """Gaussian fundamental solution value, computed as ``exp`` of the log form."""
    return float(np.exp(eval_log_kernel(kernel, t, x, T, y)))


def _dilated_box(system, center, scale, spec):
    """Gauss-Legendre nodes/weights on the dilation-adapted box around ``center``."""
    nodes, wts = np.polynomial.legendre.leggauss(spec.nodes)
    exps = dilation_exponents(system.structure).astype(float)
    half = spec.box_radius * scale ** exps
    axes = [center[i] + half[i] * nodes for i in range(system.d)]
    waxes = [half[i] * wts for i in range(system.d)]
    if system.d == 1:
        return axes[0][:, None], waxes[0]
    if system.d == 2:
        Z1, Z2 = np.meshgrid(axes[0], axes[1], indexing="ij")
        W = np.outer(waxes[0], waxes[1]).ravel()
        return np.stack([Z1.ravel(), Z2.ravel()], axis=1), W
    raise ValueError(f"quadrature supported for d <= 2, got d={system.d}")


def chapman_kolmogorov_residual(kernel, t, x, T, y, s, quad_spec=None):
    """Relative defect of the semigroup identity at intermediate time ``s``.

    Computes ``|int G(t,x;s,z) G(s,z;T,y) dz - G(t,x;T,y)| / G(t,x;T,y)``
    by tensor Gauss-Legendre over the dilated box of the first factor.
    Supported in dimension at most 2.
    """
    if not (t < s < T):
        raise ValueError(f"need t < s < T, got t={t}, s={s}, T={T}")
    spec = quad_spec or QuadratureSpec()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mean = kernel.flow(s - t) @ x
    Z, W = _dilated_box(kernel.system, mean, np.sqrt(s - t), spec)
    f1 = np.exp(kernel.log_batch(t, x, s, Z))
    f2 = np.exp(kernel.log_batch_sources(s, Z, T, y))
    integral = float(np.sum(W * f1 * f2))
    ref = eval_kernel(kernel, t, x, T, y)
    return abs(integral - ref) / ref


def normalization_residual(kernel, t, x, T, quad_spec=None):
    """``|int G(t,x;T,y) dy - 1|`` by quadrature (d <= 2)."""
    spec = quad_spec or QuadratureSpec()
    x = np.asarray(x, dtype=float)
    mean = kernel.flow(T - t) @ x
    Z, W = _dilated_box(kernel.system, mean, np.sqrt(T - t), spec)
    return abs(float(np.sum(W * np.exp(kernel.log_batch(t, x, T, Z)))) - 1.0)


def pde_residual(kernel, t, x, T, y, h=None, drift_matrix=None):
    """Centered finite-difference residual of the kernel's own equation.

    Evaluates ``(lam(t)/2) sum_i d^2_{x_i} G + <B x, D G> + d_t G`` at
    ``(t, x)``, normalized by ``G``.  The time step is ``h**2`` and the step
    for a coordinate in block ``j`` is ``h**(2j+1)``, matching the
    anisotropic smoothness scale; the default ``h`` is
    ``1e-3 * sqrt(T - t)``.  ``drift_matrix`` overrides the drift used in
    the operator (not in the kernel), for negative-control experiments.

    Requires ``T - t > 10 h**2`` so the stencil stays inside the domain.
    """
    if h is None:
        h = 1e-3 * np.sqrt(T - t)
    if not T - t > 10.0 * h * h:
        raise ValueError(f"horizon T-t={T - t} too small for time step h^2={h * h}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    system = kernel.system
    B = system.B if drift_matrix is None else np.asarray(drift_matrix, dtype=float)
    m0 = system.m0
    exps = dilation_exponents(system.structure).astype(float)

    def g(tt, xx):
        return float(np.exp(kernel.log_batch(tt, xx, T, y[None, :])[0]))

    center = g(t, x)
    ht = h * h
    dt_g = (g(t + ht, x) - g(t - ht, x)) / (2.0 * ht)

    lap = 0.0
    grad = np.zeros(system.d)
    for i in range(system.d):
        hi = h ** exps[i]
        e = np.zeros(system.d)
        e[i] = hi
        gp, gm = g(t, x + e), g(t, x - e)
        grad[i] = (gp - gm) / (2.0 * hi)
        if i < m0:
            lap += (gp - 2.0 * center + gm) / (hi * hi)

    residual = 0.5 * kernel.lambda_at(t) * lap + float((B @ x) @ grad) + dt_g
    return abs(residual) / center


def cauchy_solution(kernel, phi, t, x, T, quad_spec=None):
    """Terminal-value representation ``u(t,x) = int G(t,x;T,y) phi(y) dy``.

    ``phi`` must be bounded and continuous for the representation to solve
    the terminal-value problem; use the payoff factories in this module for
    serializable choices.  Quadrature supported for d <= 2.
    """
    spec = quad_spec or QuadratureSpec()
    x = np.asarray(x, dtype=float)
    mean = kernel.flow(T - t) @ x
    Z, W = _dilated_box(kernel.system, mean, np.sqrt(T - t), spec)
    vals = np.array([phi(z) for z in Z], dtype=float)
    return float(np.sum(W * np.exp(kernel.log_batch(t, x, T, Z)) * vals))


def payoff_polynomial(constant, linear, cap):
    """Affine payoff ``clip(c0 + <linear, y>, -cap, cap)``."""
    linear = np.asarray(linear, dtype=float)

    def phi(y):
        return float(np.clip(constant + linear @ np.asarray(y, dtype=float), -cap, cap))

    return phi


def payoff_gaussian_bump(center, width):
    center = np.asarray(center, dtype=float)

    def phi(y):
        r = np.asarray(y, dtype=float) - center
        return float(np.exp(-0.5 * float(r @ r) / width**2))

    return phi


def payoff_smoothed_indicator(center, radius, sharpness=20.0):
    center = np.asarray(center, dtype=float)

    def phi(y):
        r = np.linalg.norm(np.asarray(y, dtype=float) - center)
        return float(1.0 / (1.0 + np.exp(-sharpness * (radius - r))))

    return phi


@dataclass(frozen=True)
class BoundEnvelope:
    """Comparison constants ``(lambda-, lambda+, C-, C+)`` for a two-sided bound."""

    lambda_minus: float
    lambda_plus: float
    C_minus: float
    C_plus: float

    def __post_init__(self):
        if not (0 < self.lambda_minus <= self.lambda_plus):
            raise ValueError("need 0 < lambda- <= lambda+")
        if self.C_minus <= 0 or self.C_plus <= 0:
            raise ValueError("envelope constants must be positive")


def bound_envelope_eval(env, system, t, x, T, y):
    """Evaluate ``(C- * G^{lambda-}, C+ * G^{lambda+})`` at one point.

    Near the peak the slower kernel exceeds the faster one, so the envelope
    is consistent (lower <= upper) only for suitable constants; both values
    are returned regardless.
    """
    lo = env.C_minus * eval_kernel(GaussianKernel(system, env.lambda_minus), t, x, T, y)
    hi = env.C_plus * eval_kernel(GaussianKernel(system, env.lambda_plus), t, x, T, y)
    return lo, hi


def _check_unit_horizon(t, T):
    if not 0 < T - t <= 1:
        raise ValueError(f"bound forms require 0 < T - t <= 1, got {T - t}")


def aronson_upper_form(c_A, system, t, x, T, y):
    """Dilated-norm upper envelope ``c_A (T-t)^(-Q/2) exp(-|D((T-t)^(-1/2)) offset|^2 / c_A)``."""
    _check_unit_horizon(t, T)
    tau = T - t
    Q = homogeneous_dimension(system.structure)
    offset = np.asarray(y, float) - expm(tau * system.B) @ np.asarray(x, float)
    z = dilation_matrix(system.structure, tau**-0.5) @ offset
    return float(c_A * tau ** (-Q / 2.0) * np.exp(-float(z @ z) / c_A))


def lower_bound_form(c_D, system, t, x, T, y):
    """Covariance-form lower envelope ``c_D (T-t)^(-Q/2) exp(-<C^-1 offset, offset> / c_D)``."""
    _check_unit_horizon(t, T)
    tau = T - t
    Q = homogeneous_dimension(system.structure)
    g = Gramian.from_matrix(gramian_matrix(system, tau), tau, system)
    offset = np.asarray(y, float) - expm(tau * system.B) @ np.asarray(x, float)
    return float(c_D * tau ** (-Q / 2.0) * np.exp(-quadratic_form(g, offset) / c_D))


def covariance_upper_form(c_L, system, t, x, T, y):
    """Covariance-form upper envelope with ``det C`` normalization."""
    _check_unit_horizon(t, T)
    tau = T - t
    g = Gramian.from_matrix(gramian_matrix(system, tau), tau, system)
    offset = np.asarray(y, float) - expm(tau * system.B) @ np.asarray(x, float)
    return float(
        c_L * np.exp(-0.5 * g.logdet) * np.exp(-quadratic_form(g, offset) / c_L)
    )
