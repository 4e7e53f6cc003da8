import numpy as np
import pytest

from kolmo import fields
from kolmo.exceptions import CoefficientError, GramianError, StructureError
from kolmo.gramian import gramian, gramian_matrix
from kolmo.model import (
    BlockStructure,
    SpaceTimePoint,
    SystemMatrix,
    dilation_matrix,
    ellipticity_check,
    group_compose,
    group_inverse,
    homogeneous_dimension,
    kalman_rank,
    principal_part,
    scaled_system,
    spec_from_config,
    spec_to_config,
    validate_structure,
)

from conftest import make_spec, langevin_config


class TestValidateStructure:
    def test_langevin_valid(self):
        system = validate_structure([[0, 0], [1, 0]], [1, 1])
        assert system.d == 2 and system.structure.nu == 1

    def test_zero_subdiagonal_rejected(self):
        with pytest.raises(StructureError) as exc:
            validate_structure([[0, 0], [0, 0]], [1, 1])
        assert exc.value.clause == "subdiagonal-rank"
        assert exc.value.indices == (1, 0)

    def test_below_subdiagonal_rejected(self):
        B = [[0, 0, 0], [1, 0, 0], [1, 1, 0]]
        with pytest.raises(StructureError) as exc:
            validate_structure(B, [1, 1, 1])
        assert exc.value.clause == "zero-block"
        assert exc.value.indices == (2, 0)

    def test_monotonicity_rejected(self):
        with pytest.raises(StructureError) as exc:
            validate_structure(np.zeros((3, 3)), [1, 2])
        assert exc.value.clause == "m-monotonicity"

    def test_dimension_mismatch(self):
        with pytest.raises(StructureError) as exc:
            validate_structure(np.zeros((3, 3)), [1, 1])
        assert exc.value.clause == "dimension-mismatch"

    def test_rank_deficient_wide_block(self):
        # m = [2, 2] needs a rank-2 subdiagonal block.
        B = np.zeros((4, 4))
        B[2:, :2] = [[1.0, 2.0], [2.0, 4.0]]
        with pytest.raises(StructureError) as exc:
            validate_structure(B, [2, 2])
        assert exc.value.clause == "subdiagonal-rank"


class TestKalmanRank:
    def test_langevin(self, langevin):
        assert kalman_rank(langevin) == 2

    def test_full_diffusion_block(self):
        system = validate_structure(np.zeros((2, 2)), [2])
        assert kalman_rank(system) == 2

    def test_uncoupled_second_coordinate(self):
        # Deliberately broken: B = 0 with m0 = 1 never reaches x2.
        system = SystemMatrix(np.zeros((2, 2)), BlockStructure((1, 1)))
        assert kalman_rank(system) == 1

    def test_rank_iff_positive_definite(self, langevin, kinetic21, deep221):
        for system in (langevin, kinetic21, deep221):
            assert kalman_rank(system) == system.d
            assert np.linalg.eigvalsh(gramian_matrix(system, 1.0)).min() > 1e-10
        broken = SystemMatrix(np.zeros((2, 2)), BlockStructure((1, 1)))
        assert kalman_rank(broken) < broken.d
        assert np.linalg.eigvalsh(gramian_matrix(broken, 1.0)).min() <= 1e-10
        with pytest.raises(GramianError):
            gramian(broken, 1.0)


class TestHomogeneousDimension:
    @pytest.mark.parametrize(
        "m,expected", [((1, 1), 4), ((3,), 3), ((2, 1), 5), ((2, 2, 1), 13)]
    )
    def test_values(self, m, expected):
        assert homogeneous_dimension(BlockStructure(m)) == expected


class TestDilations:
    def test_langevin_r2(self):
        D = dilation_matrix(BlockStructure((1, 1)), 2.0)
        np.testing.assert_allclose(D, np.diag([2.0, 8.0]))

    def test_identity_at_one(self):
        D = dilation_matrix(BlockStructure((2, 2, 1)), 1.0)
        np.testing.assert_array_equal(D, np.eye(5))

    def test_kinetic_r3(self):
        D = dilation_matrix(BlockStructure((2, 1)), 3.0)
        np.testing.assert_allclose(D, np.diag([3.0, 3.0, 27.0]))

    def test_group_property_exact(self):
        s = BlockStructure((2, 1))
        left = dilation_matrix(s, 2.0) @ dilation_matrix(s, 3.0)
        np.testing.assert_array_equal(left, dilation_matrix(s, 6.0))

    def test_determinant_is_rQ(self):
        s = BlockStructure((2, 2, 1))
        Q = homogeneous_dimension(s)
        for r in (0.3, 1.7):
            assert np.isclose(np.linalg.det(dilation_matrix(s, r)), r**Q, rtol=1e-12)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            dilation_matrix(BlockStructure((1, 1)), 0.0)


class TestGroupOps:
    def test_euclidean_when_drift_vanishes(self):
        system = validate_structure(np.zeros((2, 2)), [2])
        z = group_compose(
            SpaceTimePoint(0.3, [1.0, 2.0]), SpaceTimePoint(0.5, [0.1, 0.2]), system
        )
        assert z.t == 0.8
        np.testing.assert_allclose(z.x, [1.1, 2.2])

    def test_langevin_composition(self, langevin):
        z = group_compose(
            SpaceTimePoint(1.0, [1.0, 0.0]), SpaceTimePoint(1.0, [0.0, 0.0]), langevin
        )
        assert z.t == 2.0
        np.testing.assert_allclose(z.x, [1.0, 1.0], atol=1e-14)

    def test_identity_element(self, langevin):
        z = SpaceTimePoint(0.7, [0.3, -0.4])
        out = group_compose(SpaceTimePoint(0.0, [0.0, 0.0]), z, langevin)
        assert out.t == z.t
        np.testing.assert_allclose(out.x, z.x)

    def test_inverse_closed_form_zero_drift(self):
        system = validate_structure(np.zeros((2, 2)), [2])
        z = SpaceTimePoint(0.8, [1.0, -2.0])
        zi = group_inverse(z, system)
        assert zi.t == -0.8
        np.testing.assert_allclose(zi.x, [-1.0, 2.0])

    def test_inverse_property(self, starful):
        rng = np.random.default_rng(3)
        for _ in range(20):
            z = SpaceTimePoint(rng.uniform(-2, 2), rng.normal(size=2))
            zi = group_inverse(z, starful)
            out = group_compose(zi, z, starful)
            assert abs(out.t) < 1e-12
            np.testing.assert_allclose(out.x, 0.0, atol=1e-12)

    def test_associativity(self, starful):
        rng = np.random.default_rng(4)
        for _ in range(20):
            zs = [SpaceTimePoint(rng.uniform(-1, 1), rng.normal(size=2)) for _ in range(3)]
            left = group_compose(group_compose(zs[0], zs[1], starful), zs[2], starful)
            right = group_compose(zs[0], group_compose(zs[1], zs[2], starful), starful)
            assert abs(left.t - right.t) < 1e-12
            np.testing.assert_allclose(left.x, right.x, atol=1e-12)


class TestScaledSystem:
    def test_langevin_invariant(self, langevin):
        for r in (0.5, 2.0, 7.3):
            np.testing.assert_array_equal(scaled_system(langevin, r).B, langevin.B)

    def test_starful_example(self, starful):
        out = scaled_system(starful, 2.0)
        np.testing.assert_allclose(out.B, [[4.0, 0.0], [1.0, 0.0]])

    def test_identity_at_one(self, starful):
        np.testing.assert_array_equal(scaled_system(starful, 1.0).B, starful.B)

    def test_round_trip(self, starful):
        out = scaled_system(scaled_system(starful, 3.7), 1 / 3.7)
        np.testing.assert_allclose(out.B, starful.B, atol=1e-12)

    def test_result_is_valid_structure(self, starful):
        out = scaled_system(starful, 2.0)
        validate_structure(out.B, out.structure.m)


class TestPrincipalPart:
    def test_half_identity(self, langevin):
        spec = make_spec(langevin, lam=1.0)
        pp = principal_part(spec, 1.0)
        np.testing.assert_allclose(pp.a(0.0, np.zeros(2)), 0.5 * np.eye(1))

    def test_lambda_two_scalar(self, heat1d):
        pp = principal_part(make_spec(heat1d), 2.0)
        np.testing.assert_allclose(pp.a(0.0, np.zeros(1)), [[1.0]])

    def test_fitted_mu_passes_ellipticity(self, langevin):
        for lam in (0.3, 1.0, 5.0):
            pp = principal_part(make_spec(langevin), lam)
            mu_low, mu_high = ellipticity_check(pp)
            assert mu_low <= pp.mu + 1e-12 and mu_high <= pp.mu + 1e-12

    def test_nonpositive_lambda(self, langevin):
        with pytest.raises(ValueError):
            principal_part(make_spec(langevin), 0.0)


class TestEllipticityCheck:
    def test_identity_coefficient(self, heat1d):
        spec = make_spec(heat1d, lam=2.0)  # a = I
        mu_low, mu_high = ellipticity_check(spec)
        assert np.isclose(mu_low, 1.0) and np.isclose(mu_high, 1.0)

    def test_time_sinusoid_extremes(self, heat1d):
        a = fields.IsotropicMatrixField(
            fields.TimeSinusoidField(base=1.25, amplitude=0.75), 1
        )
        spec = make_spec(heat1d, a=a, mu=2.0)
        mu_low, mu_high = ellipticity_check(spec)
        # The default time grid hits the sinusoid extremes 0.5 and 2 exactly.
        assert np.isclose(mu_low, 2.0, atol=1e-12)
        assert np.isclose(mu_high, 2.0, atol=1e-12)

    def test_negative_eigenvalue_rejected(self, heat1d):
        spec = make_spec(heat1d, a=fields.ConstantMatrixField([[-1.0]]))
        with pytest.raises(CoefficientError):
            ellipticity_check(spec)

    def test_nonsymmetric_rejected(self, langevin):
        kinetic = validate_structure(
            np.array([[0, 0, 0], [0, 0, 0], [1.0, 0, 0]]), [2, 1]
        )
        spec = make_spec(kinetic, a=fields.ConstantMatrixField([[1.0, 0.5], [0.0, 1.0]]))
        with pytest.raises(CoefficientError):
            ellipticity_check(spec)

    def test_explicit_directions(self, heat1d):
        spec = make_spec(heat1d, lam=2.0)
        mu_low, mu_high = ellipticity_check(spec, directions=[np.array([1.0])])
        assert np.isclose(mu_low, 1.0) and np.isclose(mu_high, 1.0)

    def test_empty_samples_rejected(self, heat1d):
        with pytest.raises(ValueError):
            ellipticity_check(make_spec(heat1d), sample_points=[])


class TestConfigRoundTrip:
    def test_langevin_round_trip(self):
        spec = spec_from_config(langevin_config())
        cfg = spec_to_config(spec)
        spec2 = spec_from_config(cfg)
        np.testing.assert_array_equal(spec.system.B, spec2.system.B)
        assert spec.mu == spec2.mu
        x = np.zeros(2)
        np.testing.assert_allclose(spec.a(0.3, x), spec2.a(0.3, x))

    def test_sinusoid_fields_round_trip(self):
        cfg = langevin_config()
        cfg["coefficients"]["a"] = {
            "kind": "time-sinusoid", "base": 0.625, "amplitude": 0.375,
        }
        cfg["mu"] = 4.0
        spec = spec_from_config(cfg)
        spec2 = spec_from_config(spec_to_config(spec))
        for t in (0.0, 0.25, 0.8):
            np.testing.assert_allclose(spec.a(t, np.zeros(2)), spec2.a(t, np.zeros(2)))

    def test_invalid_structure_rejected(self):
        cfg = langevin_config()
        cfg["blocks"] = [1, 2]
        cfg["B"] = np.zeros((3, 3)).tolist()
        with pytest.raises(StructureError):
            spec_from_config(cfg)
