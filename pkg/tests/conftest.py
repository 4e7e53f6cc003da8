import json

import numpy as np
import pytest

from kolmo import fields
from kolmo.model import OperatorSpec, validate_structure


@pytest.fixture
def langevin():
    """Velocity/position system: diffusion in the first coordinate only."""
    return validate_structure([[0.0, 0.0], [1.0, 0.0]], [1, 1])


@pytest.fixture
def heat1d():
    """Non-degenerate scalar system (zero drift)."""
    return validate_structure([[0.0]], [1])


@pytest.fixture
def kinetic21():
    """m = [2, 1]: two diffusive coordinates coupled into one."""
    B = np.zeros((3, 3))
    B[2, 0] = 1.0
    return validate_structure(B, [2, 1])


@pytest.fixture
def deep221():
    """m = [2, 2, 1]: a three-level cascade."""
    B = np.zeros((5, 5))
    B[2:4, 0:2] = np.eye(2)
    B[4, 2:4] = [1.0, 0.0]
    return validate_structure(B, [2, 2, 1])


@pytest.fixture
def starful():
    """2x2 system with a nonzero diagonal block above the coupling."""
    return validate_structure([[1.0, 0.0], [1.0, 0.0]], [1, 1])


def make_spec(system, lam=1.0, **kwargs):
    """Comparison-operator spec with constant diffusion strength ``lam``."""
    m0 = system.m0
    zero = fields.VectorField(tuple(fields.ConstantField(0.0) for _ in range(m0)))
    defaults = dict(
        system=system,
        a=fields.ConstantMatrixField((lam / 2.0) * np.eye(m0)),
        a_low=zero,
        b_low=zero,
        c=fields.ConstantField(0.0),
        mu=max(lam / 2.0, 2.0 / lam),
        M_bound=0.0,
    )
    defaults.update(kwargs)
    return OperatorSpec(**defaults)


def sinusoid_spec(system):
    """The time-sinusoid comparison operator: strength 1.25 + 0.75 sin(2 pi s).

    The diffusion coefficient is half the strength, so the declared
    ellipticity constant is 4 and the admissible comparison range is
    [1/4, 4].
    """
    m0 = system.m0
    zero = fields.VectorField(tuple(fields.ConstantField(0.0) for _ in range(m0)))
    a = fields.IsotropicMatrixField(
        fields.TimeSinusoidField(base=0.625, amplitude=0.375), m0
    )
    return OperatorSpec(
        system=system, a=a, a_low=zero, b_low=zero,
        c=fields.ConstantField(0.0), mu=4.0, M_bound=0.0,
    )


def langevin_config(lam=1.0):
    return {
        "blocks": [1, 1],
        "B": [[0.0, 0.0], [1.0, 0.0]],
        "coefficients": {"a": {"kind": "constant", "value": lam / 2.0}},
        "mu": max(lam / 2.0, 2.0 / lam),
        "M": 0.0,
    }


@pytest.fixture
def langevin_model_path(tmp_path):
    path = tmp_path / "langevin.json"
    path.write_text(json.dumps(langevin_config()))
    return str(path)
