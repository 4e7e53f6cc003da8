"""Block-structured degenerate drift systems and their group/dilation calculus.

A system couples an ``m0``-dimensional diffusion into ``d`` state variables
through a constant drift matrix ``B`` whose block structure (full-rank
subdiagonal blocks, zeros below them) makes the pair ``(B, sigma)``
controllable.  This module validates that structure and provides the
associated non-Euclidean translations, anisotropic dilations, and the
operator class with bounded measurable coefficients on the diffusion block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import fields
from .exceptions import CoefficientError, StructureError

__all__ = [
    "BlockStructure",
    "SystemMatrix",
    "OperatorSpec",
    "SpaceTimePoint",
    "validate_structure",
    "sigma_matrix",
    "kalman_rank",
    "homogeneous_dimension",
    "dilation_matrix",
    "dilation_exponents",
    "group_compose",
    "group_inverse",
    "scaled_system",
    "homogeneous_system",
    "principal_part",
    "ellipticity_check",
    "coefficient_bounds",
    "default_sample_grid",
    "spec_from_config",
    "spec_to_config",
]

# Relative singular-value threshold for numerical rank decisions.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class BlockStructure:
    """The block sizes ``(m0, ..., m_nu)`` of the state decomposition.

    Sizes must be positive and non-increasing; ``d`` is their sum and ``nu``
    the number of subdiagonal levels.
    """

    m: tuple

    def __post_init__(self):
        m = tuple(int(v) for v in self.m)
        object.__setattr__(self, "m", m)
        if len(m) == 0 or any(v < 1 for v in m):
            raise StructureError("m-monotonicity", f"block sizes must be >= 1, got {m}")
        if any(m[i] < m[i + 1] for i in range(len(m) - 1)):
            raise StructureError(
                "m-monotonicity", f"block sizes must be non-increasing, got {m}"
            )

    @property
    def d(self):
        return sum(self.m)

    @property
    def nu(self):
        return len(self.m) - 1

    @property
    def m0(self):
        return self.m[0]

    def block_slices(self):
        """Slice of the state vector occupied by each block."""
        out, lo = [], 0
        for size in self.m:
            out.append(slice(lo, lo + size))
            lo += size
        return out

    def coordinate_blocks(self):
        """Block index of each of the ``d`` coordinates."""
        return np.repeat(np.arange(len(self.m)), self.m)


def dilation_exponents(structure):
    """Per-coordinate dilation exponents ``2j+1`` (block ``j`` scales as ``r**(2j+1)``)."""
    return 2 * structure.coordinate_blocks() + 1


@dataclass(frozen=True)
class SystemMatrix:
    """A drift matrix together with its block structure.

    Use :func:`validate_structure` to construct one with the structural
    requirements enforced; the raw constructor only checks dimensions, so
    that deliberately broken systems can still be probed (e.g. by
    :func:`kalman_rank`).
    """

    B: np.ndarray
    structure: BlockStructure

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise StructureError("dimension-mismatch", f"B must be square, got {B.shape}")
        if B.shape[0] != self.structure.d:
            raise StructureError(
                "dimension-mismatch",
                f"B is {B.shape[0]}x{B.shape[0]} but block sizes sum to {self.structure.d}",
            )
        B.setflags(write=False)
        object.__setattr__(self, "B", B)

    @property
    def d(self):
        return self.structure.d

    @property
    def m0(self):
        return self.structure.m0


@dataclass(frozen=True)
class SpaceTimePoint:
    """A point ``(t, x)`` in time-state space."""

    t: float
    x: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.array(self.x, dtype=float))
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))


def _numerical_rank(M):
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > RANK_RTOL * sv[0]))


def validate_structure(B, m):
    """Validate a drift matrix against the block-form requirements.

    Checks, in order: non-increasing positive block sizes summing to the
    matrix dimension, exact zeros strictly below the first subdiagonal of
    blocks, and full numerical rank of every subdiagonal block.

    Parameters
    ----------
    B : (d, d) array_like
        Constant drift matrix.
    m : sequence of int
        Block sizes ``(m0, ..., m_nu)``.

    Returns
    -------
    SystemMatrix

    Raises
    ------
    StructureError
        With ``clause`` naming the violated requirement and ``indices`` the
        offending block position.
    """
    structure = BlockStructure(tuple(m))
    system = SystemMatrix(np.asarray(B, dtype=float), structure)
    slices = structure.block_slices()
    n = len(structure.m)
    for i in range(n):
        for j in range(n):
            block = system.B[slices[i], slices[j]]
            if i >= j + 2 and np.any(block != 0.0):
                raise StructureError(
                    "zero-block",
                    f"block ({i},{j}) lies below the first subdiagonal and must vanish",
                    indices=(i, j),
                )
            if i == j + 1:
                rank = _numerical_rank(block)
                if rank < structure.m[i]:
                    raise StructureError(
                        "subdiagonal-rank",
                        f"subdiagonal block {i} has rank {rank} < {structure.m[i]}",
                        indices=(i, j),
                    )
    return system


def sigma_matrix(structure):
    """The ``d x m0`` input matrix ``(I_{m0}; 0)``."""
    sig = np.zeros((structure.d, structure.m0))
    sig[: structure.m0, : structure.m0] = np.eye(structure.m0)
    return sig


def kalman_rank(system):
    """Rank of the controllability matrix ``[sigma, B sigma, ..., B^(d-1) sigma]``.

    Equals ``d`` exactly when the covariance of the associated linear
    diffusion is positive definite for positive times.
    """
    sig = sigma_matrix(system.structure)
    blocks, cur = [], sig
    for _ in range(system.d):
        blocks.append(cur)
        cur = system.B @ cur
    return _numerical_rank(np.hstack(blocks))


def homogeneous_dimension(structure):
    """``Q = m0 + 3 m1 + ... + (2 nu + 1) m_nu``, the dilation Jacobian exponent."""
    return int(sum((2 * j + 1) * mj for j, mj in enumerate(structure.m)))


def dilation_matrix(structure, r):
    """Diagonal anisotropic dilation ``diag(r I_{m0}, r^3 I_{m1}, ...)``."""
    if r <= 0:
        raise ValueError(f"dilation parameter must be positive, got {r}")
    return np.diag(float(r) ** dilation_exponents(structure).astype(float))


def group_compose(zeta, z, system):
    """Non-Euclidean left translation ``(tau, xi) o (t, x) = (t + tau, x + e^(tB) xi)``."""
    if zeta.x.shape != z.x.shape or zeta.x.shape[0] != system.d:
        raise ValueError("dimension mismatch in group composition")
    flow = expm(z.t * system.B)
    return SpaceTimePoint(z.t + zeta.t, z.x + flow @ zeta.x)


def group_inverse(zeta, system):
    """Group inverse, solved from the composition identity ``inv(zeta) o zeta = 0``.

    The time part is ``-tau``; the space part solves ``xi + e^(tau B) xi' = 0``
    with a linear solve rather than a second exponential, so the defining
    identity holds to rounding accuracy regardless of sign conventions.
    """
    flow = expm(zeta.t * system.B)
    return SpaceTimePoint(-zeta.t, -np.linalg.solve(flow, zeta.x))


def scaled_system(system, r):
    """Rescale the drift so that the dilated solution solves the rescaled equation.

    Block ``(i, j)`` is multiplied by ``r**(2(j - i + 1))``: subdiagonal
    blocks are untouched and the scaling is the identity at ``r = 1``.
    """
    if r <= 0:
        raise ValueError(f"scaling parameter must be positive, got {r}")
    jblk = system.structure.coordinate_blocks()
    powers = 2.0 * (jblk[None, :] - jblk[:, None] + 1)
    return SystemMatrix(system.B * float(r) ** powers, system.structure)


def homogeneous_system(system):
    """Zero every block above the subdiagonal, keeping only the couplings."""
    slices = system.structure.block_slices()
    B0 = np.zeros_like(system.B)
    for i in range(1, len(slices)):
        B0[slices[i], slices[i - 1]] = system.B[slices[i], slices[i - 1]]
    return SystemMatrix(B0, system.structure)


@dataclass(frozen=True)
class OperatorSpec:
    """A member of the operator class: diffusion block coefficients over a drift system.

    ``a`` is the ``m0 x m0`` symmetric diffusion coefficient field, ``a_low``
    and ``b_low`` the first-order coefficient vectors on the diffusion block,
    ``c`` the zeroth-order coefficient.  ``mu`` is the declared ellipticity
    constant (``mu**-1 |xi|^2 <= <a xi, xi> <= mu |xi|^2``) and ``M_bound``
    the declared sup-norm bound on the lower-order coefficients.
    """

    system: SystemMatrix
    a: object
    a_low: fields.VectorField
    b_low: fields.VectorField
    c: object
    mu: float
    M_bound: float

    def __post_init__(self):
        if self.mu <= 0:
            raise CoefficientError(f"ellipticity constant must be positive, got {self.mu}")
        if self.M_bound < 0:
            raise CoefficientError(f"coefficient bound must be >= 0, got {self.M_bound}")

    @property
    def structure(self):
        return self.system.structure


def principal_part(spec, lam):
    """The constant-coefficient comparison operator with diffusion ``(lam/2) I``.

    Keeps the drift system, zeroes all lower-order coefficients, and declares
    the tightest ellipticity constant ``max(lam/2, 2/lam)``.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    m0 = spec.system.m0
    zero_vec = fields.VectorField(tuple(fields.ConstantField(0.0) for _ in range(m0)))
    return OperatorSpec(
        system=spec.system,
        a=fields.ConstantMatrixField((lam / 2.0) * np.eye(m0)),
        a_low=zero_vec,
        b_low=zero_vec,
        c=fields.ConstantField(0.0),
        mu=max(lam / 2.0, 2.0 / lam),
        M_bound=spec.M_bound,
    )


def default_sample_grid(structure, n_time=32, n_space=32, seed=0):
    """Deterministic sample points for coefficient checks.

    Times ``k / n_time`` (hitting sinusoid extremes for integer frequencies)
    crossed with seeded uniform space points in ``[-1, 1]^d``.
    """
    rng = np.random.default_rng(seed)
    times = np.arange(n_time) / n_time
    xs = rng.uniform(-1.0, 1.0, size=(n_space, structure.d))
    xs[0] = 0.0
    return [(float(t), x) for t in times for x in xs]


def ellipticity_check(spec, sample_points=None, directions=None):
    """Tightest sampled ellipticity constants of the diffusion coefficient.

    Returns ``(mu_low, mu_high)`` where ``mu_low`` is the smallest constant
    making the lower bound hold on the samples (``max 1/lambda_min``) and
    ``mu_high`` the smallest for the upper bound (``max lambda_max``).  With
    explicit ``directions`` the extremes are taken over those Rayleigh
    quotients only; otherwise eigenvalues give the exact extremes over all
    unit directions.

    Raises
    ------
    CoefficientError
        If a sampled coefficient matrix is nonsymmetric, non-finite, or not
        positive definite.
    """
    if sample_points is None:
        sample_points = default_sample_grid(spec.structure)
    if len(sample_points) == 0:
        raise ValueError("sample grid must be nonempty")
    lo = -np.inf
    hi = -np.inf
    for t, x in sample_points:
        a_val = np.asarray(spec.a(t, x), dtype=float)
        if not np.all(np.isfinite(a_val)):
            raise CoefficientError(f"non-finite diffusion coefficient at (t={t}, x={x})")
        if not np.allclose(a_val, a_val.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a_val).max())):
            raise CoefficientError(f"nonsymmetric diffusion coefficient at (t={t}, x={x})")
        if directions is None:
            eigs = np.linalg.eigvalsh(a_val)
            emin, emax = eigs[0], eigs[-1]
        else:
            quots = [float(v @ a_val @ v) / float(v @ v) for v in directions]
            emin, emax = min(quots), max(quots)
        if emin <= 0:
            raise CoefficientError(
                f"diffusion coefficient not positive definite at (t={t}, x={x})"
            )
        lo = max(lo, 1.0 / emin)
        hi = max(hi, emax)
    return lo, hi


def coefficient_bounds(spec, sample_points=None):
    """Sampled sup norms of the lower-order coefficients ``(a_i, b_i, c)``."""
    if sample_points is None:
        sample_points = default_sample_grid(spec.structure)
    sup_a = sup_b = sup_c = 0.0
    for t, x in sample_points:
        va = spec.a_low(t, x)
        vb = spec.b_low(t, x)
        vc = spec.c(t, x)
        if not (np.all(np.isfinite(va)) and np.all(np.isfinite(vb)) and np.isfinite(vc)):
            raise CoefficientError(f"non-finite lower-order coefficient at (t={t}, x={x})")
        sup_a = max(sup_a, float(np.abs(va).max()) if va.size else 0.0)
        sup_b = max(sup_b, float(np.abs(vb).max()) if vb.size else 0.0)
        sup_c = max(sup_c, abs(float(vc)))
    return sup_a, sup_b, sup_c


def spec_from_config(cfg):
    """Build a validated operator spec from its JSON dict form.

    The document carries ``blocks``, the row-major drift matrix ``B``, the
    enumerated ``coefficients`` (``a`` required; ``a_low``, ``b_low``, ``c``
    optional), and the declared constants ``mu`` and ``M``.
    """
    system = validate_structure(np.asarray(cfg["B"], dtype=float), cfg["blocks"])
    m0 = system.m0
    coeffs = cfg.get("coefficients", {})
    return OperatorSpec(
        system=system,
        a=fields.matrix_field_from_config(coeffs.get("a"), m0),
        a_low=fields.vector_field_from_config(coeffs.get("a_low"), m0),
        b_low=fields.vector_field_from_config(coeffs.get("b_low"), m0),
        c=fields.scalar_field_from_config(coeffs.get("c")),
        mu=float(cfg["mu"]),
        M_bound=float(cfg.get("M", 0.0)),
    )


def spec_to_config(spec):
    return {
        "blocks": list(spec.structure.m),
        "B": spec.system.B.tolist(),
        "coefficients": {
            "a": fields.matrix_field_to_config(spec.a),
            "a_low": fields.vector_field_to_config(spec.a_low),
            "b_low": fields.vector_field_to_config(spec.b_low),
            "c": fields.scalar_field_to_config(spec.c),
        },
        "mu": spec.mu,
        "M": spec.M_bound,
    }
