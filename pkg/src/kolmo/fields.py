"""Coefficient fields for variable-coefficient operators.

Coefficients are supplied as a closed enumeration of serializable forms —
constant, time-sinusoid, space-sinusoid, and tabulated with nearest-point
lookup — rather than arbitrary measurable functions, which cannot round-trip
through a config file.  Every field is evaluated pointwise at ``(t, x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import CoefficientError

__all__ = [
    "ConstantField",
    "TimeSinusoidField",
    "SpaceSinusoidField",
    "TabulatedField",
    "IsotropicMatrixField",
    "ConstantMatrixField",
    "VectorField",
    "batch_scalar",
    "batch_gradient",
    "scalar_field_from_config",
    "scalar_field_to_config",
    "matrix_field_from_config",
    "matrix_field_to_config",
    "vector_field_from_config",
    "vector_field_to_config",
]


@dataclass(frozen=True)
class ConstantField:
    value: float

    time_dependent = False
    space_dependent = False

    def __call__(self, t, x):
        return self.value

    def space_gradient(self, t, x):
        return np.zeros(np.shape(x))


@dataclass(frozen=True)
class TimeSinusoidField:
    """``base + amplitude * sin(2*pi*frequency*t + phase)``."""

    base: float
    amplitude: float
    frequency: float = 1.0
    phase: float = 0.0

    time_dependent = True
    space_dependent = False

    def __call__(self, t, x):
        return self.base + self.amplitude * np.sin(
            2.0 * np.pi * self.frequency * t + self.phase
        )

    def space_gradient(self, t, x):
        return np.zeros(np.shape(x))


@dataclass(frozen=True)
class SpaceSinusoidField:
    """``base + amplitude * sin(2*pi*<wave, x> + phase)``."""

    base: float
    amplitude: float
    wave: tuple
    phase: float = 0.0

    time_dependent = False
    space_dependent = True

    def __call__(self, t, x):
        k = np.asarray(self.wave, dtype=float)
        return self.base + self.amplitude * np.sin(
            2.0 * np.pi * float(k @ np.asarray(x, dtype=float)) + self.phase
        )

    def space_gradient(self, t, x):
        k = np.asarray(self.wave, dtype=float)
        arg = 2.0 * np.pi * float(k @ np.asarray(x, dtype=float)) + self.phase
        return self.amplitude * 2.0 * np.pi * np.cos(arg) * k


@dataclass(frozen=True)
class TabulatedField:
    """Nearest-point lookup on a 1-d grid over time or one space coordinate.

    ``axis`` is ``"time"`` or a 0-based space coordinate index.
    """

    points: tuple
    values: tuple
    axis: object = "time"

    def __post_init__(self):
        if len(self.points) != len(self.values) or len(self.points) == 0:
            raise CoefficientError("tabulated field needs matching, nonempty grids")

    @property
    def time_dependent(self):
        return self.axis == "time"

    @property
    def space_dependent(self):
        return self.axis != "time"

    def __call__(self, t, x):
        coord = t if self.axis == "time" else np.asarray(x, dtype=float)[self.axis]
        pts = np.asarray(self.points, dtype=float)
        return float(np.asarray(self.values, dtype=float)[np.argmin(np.abs(pts - coord))])

    def space_gradient(self, t, x):
        if self.space_dependent:
            raise CoefficientError(
                "tabulated space fields are piecewise constant; no usable gradient"
            )
        return np.zeros(np.shape(x))


@dataclass(frozen=True)
class IsotropicMatrixField:
    """Scalar field times the identity, as an ``dim x dim`` matrix field."""

    scalar: object
    dim: int

    @property
    def time_dependent(self):
        return self.scalar.time_dependent

    @property
    def space_dependent(self):
        return self.scalar.space_dependent

    def __call__(self, t, x):
        return float(self.scalar(t, x)) * np.eye(self.dim)

    def divergence(self, t, x, dim=None):
        """Row divergence ``(sum_j d_j a_ij)_i``; the gradient of the scalar."""
        g = self.scalar.space_gradient(t, x)
        return np.asarray(g, dtype=float)[: self.dim]


@dataclass(frozen=True)
class ConstantMatrixField:
    matrix: np.ndarray

    time_dependent = False
    space_dependent = False

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __call__(self, t, x):
        return self.matrix

    def divergence(self, t, x, dim=None):
        return np.zeros(self.matrix.shape[0])


@dataclass(frozen=True)
class VectorField:
    """A vector of scalar fields, evaluated componentwise."""

    components: tuple

    @property
    def time_dependent(self):
        return any(c.time_dependent for c in self.components)

    @property
    def space_dependent(self):
        return any(c.space_dependent for c in self.components)

    def __call__(self, t, x):
        return np.array([c(t, x) for c in self.components], dtype=float)

    def is_zero(self):
        return all(
            isinstance(c, ConstantField) and c.value == 0.0 for c in self.components
        )


def batch_scalar(field, t, X):
    """Evaluate a scalar field at one time and many states, vectorized where possible."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(field, ConstantField):
        return np.full(len(X), field.value)
    if isinstance(field, TimeSinusoidField):
        return np.full(len(X), float(field(t, None)))
    if isinstance(field, SpaceSinusoidField):
        k = np.asarray(field.wave, dtype=float)
        return field.base + field.amplitude * np.sin(2.0 * np.pi * (X @ k) + field.phase)
    if isinstance(field, TabulatedField):
        if field.axis == "time":
            return np.full(len(X), float(field(t, np.zeros(X.shape[1]))))
        pts = np.asarray(field.points, dtype=float)
        vals = np.asarray(field.values, dtype=float)
        idx = np.argmin(np.abs(pts[None, :] - X[:, field.axis][:, None]), axis=1)
        return vals[idx]
    return np.array([float(field(t, xi)) for xi in X])


def batch_gradient(field, t, X):
    """Space gradients of a scalar field at many states."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(field, SpaceSinusoidField):
        k = np.asarray(field.wave, dtype=float)
        arg = 2.0 * np.pi * (X @ k) + field.phase
        return field.amplitude * 2.0 * np.pi * np.cos(arg)[:, None] * k[None, :]
    if isinstance(field, (ConstantField, TimeSinusoidField)):
        return np.zeros_like(X)
    return np.stack([np.asarray(field.space_gradient(t, xi), dtype=float) for xi in X])


_SCALAR_KINDS = {
    "constant": ConstantField,
    "time-sinusoid": TimeSinusoidField,
    "space-sinusoid": SpaceSinusoidField,
    "tabulated": TabulatedField,
}


def scalar_field_from_config(cfg):
    """Build a scalar field from its JSON dict form."""
    if cfg is None:
        return ConstantField(0.0)
    if isinstance(cfg, (int, float)):
        return ConstantField(float(cfg))
    kind = cfg.get("kind")
    if kind == "constant":
        return ConstantField(float(cfg["value"]))
    if kind == "time-sinusoid":
        return TimeSinusoidField(
            base=float(cfg["base"]),
            amplitude=float(cfg["amplitude"]),
            frequency=float(cfg.get("frequency", 1.0)),
            phase=float(cfg.get("phase", 0.0)),
        )
    if kind == "space-sinusoid":
        return SpaceSinusoidField(
            base=float(cfg["base"]),
            amplitude=float(cfg["amplitude"]),
            wave=tuple(float(v) for v in cfg["wave"]),
            phase=float(cfg.get("phase", 0.0)),
        )
    if kind == "tabulated":
        axis = cfg.get("axis", "time")
        if axis != "time":
            axis = int(axis)
        return TabulatedField(
            points=tuple(float(v) for v in cfg["points"]),
            values=tuple(float(v) for v in cfg["values"]),
            axis=axis,
        )
    raise CoefficientError(f"unknown scalar field kind: {kind!r}")


def scalar_field_to_config(f):
    if isinstance(f, ConstantField):
        return {"kind": "constant", "value": f.value}
    if isinstance(f, TimeSinusoidField):
        return {
            "kind": "time-sinusoid",
            "base": f.base,
            "amplitude": f.amplitude,
            "frequency": f.frequency,
            "phase": f.phase,
        }
    if isinstance(f, SpaceSinusoidField):
        return {
            "kind": "space-sinusoid",
            "base": f.base,
            "amplitude": f.amplitude,
            "wave": list(f.wave),
            "phase": f.phase,
        }
    if isinstance(f, TabulatedField):
        return {
            "kind": "tabulated",
            "axis": f.axis,
            "points": list(f.points),
            "values": list(f.values),
        }
    raise CoefficientError(f"cannot serialize field of type {type(f).__name__}")


def matrix_field_from_config(cfg, dim):
    """Build the diffusion-block matrix field.

    A scalar (or scalar field config) multiplies the identity; an explicit
    matrix value gives a constant matrix field.
    """
    if cfg is None:
        raise CoefficientError("diffusion coefficient 'a' is required")
    if isinstance(cfg, dict) and cfg.get("kind") == "constant" and np.ndim(cfg["value"]) == 2:
        m = np.array(cfg["value"], dtype=float)
        if m.shape != (dim, dim):
            raise CoefficientError(f"'a' must be {dim}x{dim}, got {m.shape}")
        return ConstantMatrixField(m)
    return IsotropicMatrixField(scalar_field_from_config(cfg), dim)


def matrix_field_to_config(f):
    if isinstance(f, ConstantMatrixField):
        return {"kind": "constant", "value": f.matrix.tolist()}
    if isinstance(f, IsotropicMatrixField):
        return scalar_field_to_config(f.scalar)
    raise CoefficientError(f"cannot serialize field of type {type(f).__name__}")


def vector_field_from_config(cfg, dim):
    if cfg is None:
        return VectorField(tuple(ConstantField(0.0) for _ in range(dim)))
    if isinstance(cfg, dict) and "components" in cfg:
        comps = tuple(scalar_field_from_config(c) for c in cfg["components"])
    elif isinstance(cfg, dict) and cfg.get("kind") == "constant" and np.ndim(cfg["value"]) == 1:
        comps = tuple(ConstantField(float(v)) for v in cfg["value"])
    else:
        comps = tuple(scalar_field_from_config(cfg) for _ in range(dim))
    if len(comps) != dim:
        raise CoefficientError(f"vector field needs {dim} components, got {len(comps)}")
    return VectorField(comps)


def vector_field_to_config(f):
    return {"components": [scalar_field_to_config(c) for c in f.components]}
