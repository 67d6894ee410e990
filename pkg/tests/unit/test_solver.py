"""Tests for the feasibility search."""

import numpy as np
import pytest
from scipy.stats import unitary_group

from src.core.config import SolverConfig
from src.core.exceptions import ConfigurationError, InvalidTorsionError, JacobianCheckError
from src.geometry.frames import phi_compatible_frame
from src.geometry.tensor import TorsionTensor, transform_frame
from src.services.solver import (
    ResidualModel,
    SearchConfig,
    decode,
    encode,
    isolated_root_clamp,
    parameter_count,
    parameter_index,
    residual_vector,
    search,
)


class TestEncoding:
    """Test the real parameter vector."""

    def test_parameter_layout(self):
        """Test n^2 (n - 1) real parameters in (j, i < k) order."""
        assert parameter_count(3) == 18
        assert parameter_index(2) == [(0, 0, 1), (1, 0, 1)]

    def test_encode_decode(self, e2):
        """Test that decoding an encoded tensor gives it back."""
        x = encode(e2)
        assert x.size == parameter_count(4)
        assert np.array_equal(decode(x, 4), e2.data)

    def test_interleaving(self):
        """Test that real and imaginary parts alternate."""
        x = np.zeros(parameter_count(2))
        x[1] = 1.0
        assert decode(x, 2)[0, 0, 1] == 1j

    def test_wrong_length(self):
        """Test that a vector of the wrong size is rejected."""
        with pytest.raises(InvalidTorsionError):
            decode(np.zeros(5), 2)


class TestResidualModel:
    """Test the residual map and its Jacobian."""

    def test_zero_and_surface_are_roots(self, unit_surface):
        """Test that admissible points have zero residual."""
        assert np.max(np.abs(residual_vector(np.zeros(parameter_count(3)), 3))) == 0.0
        assert np.max(np.abs(residual_vector(encode(unit_surface), 2, target_rank=1, full=True))) <= 1e-12

    def test_negative_control_is_not_a_root(self):
        """Test that T^1_{23} = 1 has a nonzero residual."""
        x = np.zeros(parameter_count(3))
        x[2 * parameter_index(3).index((0, 1, 2))] = 1.0
        assert np.linalg.norm(residual_vector(x, 3)) > 1.0

    @pytest.mark.parametrize("draw", range(10))
    def test_jacobian_matches_finite_differences(self, draw):
        """Test the analytic Jacobian against central differences at random points."""
        model = ResidualModel(3, target_rank=2, full=True)
        x = np.random.default_rng(draw).standard_normal(model.size)
        assert model.check_jacobian(x) < 1e-5

    def test_jacobian_shape(self):
        """Test one column per real parameter."""
        model = ResidualModel(2, target_rank=1)
        x = np.ones(model.size)
        assert model.jacobian(x).shape == (model.residual(x).size, model.size)

    def test_strict_check_raises(self, mocker):
        """Test that a wrong Jacobian fails the strict self-check."""
        model = ResidualModel(3)
        x = np.random.default_rng(1).standard_normal(model.size)
        mocker.patch.object(model, "jacobian", return_value=np.zeros((model.residual(x).size, model.size)))
        with pytest.raises(JacobianCheckError) as exc_info:
            model.check_jacobian(x, strict=True)
        assert exc_info.value.exit_code == 1

    def test_clamped_columns_vanish(self):
        """Test that clamped parameters have zero Jacobian columns."""
        model = ResidualModel(3, clamped=isolated_root_clamp(3, 1))
        jac = model.jacobian(np.ones(model.size))
        assert not jac[:, ~model.free].any()

    def test_invalid_clamp(self):
        """Test that a diagonal lower pair cannot be clamped."""
        with pytest.raises(ConfigurationError):
            ResidualModel(3, clamped=[(1, 1, 1)])

    @pytest.mark.parametrize("draw", range(3))
    def test_adapted_jacobian_matches_finite_differences(self, draw):
        """Test the Jacobian with the adapted-frame rows and an isolated-root clamp."""
        model = ResidualModel(4, target_rank=3, full=True, clamped=isolated_root_clamp(4, 1), adapted=True)
        x = np.random.default_rng(draw).standard_normal(model.size)
        assert model.check_jacobian(x) < 1e-5

    def test_normalized_frame_is_adapted(self, e2):
        """Test that the adapted-frame rows vanish in the phi-compatible frame."""
        normalized = phi_compatible_frame(e2).normalized
        model = ResidualModel(4, target_rank=2, full=True, adapted=True)
        assert np.max(np.abs(model.residual(encode(normalized)))) <= 1e-9

    def test_adapted_rows_detect_rotated_frame(self, e2):
        """Test that a generic unitary frame change breaks the adapted-frame rows."""
        u = unitary_group.rvs(4, random_state=np.random.default_rng(0))
        rotated = transform_frame(phi_compatible_frame(e2).normalized, u)
        model = ResidualModel(4, adapted=True)
        assert np.max(np.abs(model.residual(encode(rotated)))) > 1e-3


class TestGaugeDirection:
    """Test the Jacobian along diagonal phase changes of the frame."""

    @staticmethod
    def gauge_tangent(torsion: TorsionTensor, w: np.ndarray) -> np.ndarray:
        """d/ds of the components under U = diag(exp(i s w)) at s = 0."""
        weight = w[None, :, None] + w[None, None, :] - w[:, None, None]
        return encode(TorsionTensor.antisymmetrized(1j * weight * torsion.data))

    @pytest.mark.parametrize("draw", range(5))
    def test_unit_surface(self, unit_surface, draw):
        """Test that J v = 0 for v tangent to the phase orbit of the unit surface."""
        model = ResidualModel(2, target_rank=1, full=True)
        w = np.random.default_rng(draw).standard_normal(2)
        jac = model.jacobian(encode(unit_surface))
        v = self.gauge_tangent(unit_surface, w)
        assert np.linalg.norm(v) > 0.0
        assert np.max(np.abs(jac @ v)) <= 1e-10 * max(1.0, float(np.linalg.norm(jac)) * float(np.linalg.norm(v)))

    @pytest.mark.parametrize("draw", range(5))
    def test_normalized_e2(self, e2, draw):
        """Test that J v = 0 along the phase orbit of E2 in its phi-compatible frame."""
        normalized = phi_compatible_frame(e2).normalized
        model = ResidualModel(4, adapted=True)
        w = np.random.default_rng(draw).standard_normal(4)
        jac = model.jacobian(encode(normalized))
        v = self.gauge_tangent(normalized, w)
        assert np.max(np.abs(jac @ v)) <= 1e-9 * max(1.0, float(np.linalg.norm(jac)) * float(np.linalg.norm(v)))

    def test_matches_finite_difference_of_frame_change(self, unit_surface):
        """Test the tangent against a small explicit phase change."""
        w, step = np.array([0.3, -1.1]), 1e-6
        moved = transform_frame(unit_surface, np.diag(np.exp(1j * step * w)))
        numeric = (encode(moved) - encode(unit_surface)) / step
        assert np.allclose(numeric, self.gauge_tangent(unit_surface, w), atol=1e-5)


class TestIsolatedRootClamp:
    """Test the components fixed to zero by an isolated root."""

    def test_dimension_three(self):
        """Test the clamp of a_1 when n = 3."""
        assert isolated_root_clamp(3, 1) == [(1, 1, 2), (2, 1, 2)]

    @pytest.mark.parametrize("i", [0, 4])
    def test_out_of_range(self, i):
        """Test that the root index must lie below n."""
        with pytest.raises(ConfigurationError):
            isolated_root_clamp(4, i)


class TestSearchConfig:
    """Test search configuration validation."""

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n": 1},
            {"n": 3, "target_rank": 3},
            {"n": 3, "target_rank": -1},
            {"n": 3, "restarts": 0},
        ],
    )
    def test_invalid(self, kwargs):
        """Test dimension, rank and restart bounds."""
        with pytest.raises(ConfigurationError):
            SearchConfig(**kwargs)

    def test_initial_point_dimension(self, unit_surface):
        """Test that the initial point must match n."""
        with pytest.raises(ConfigurationError):
            SearchConfig(n=3, initial=unit_surface)

    def test_from_settings(self):
        """Test that settings supply defaults and keyword arguments override them."""
        settings = SolverConfig(restarts=3, workers=2, max_iters=40)
        config = SearchConfig.from_settings(3, settings, seed=4, restarts=5)
        assert (config.restarts, config.workers, config.max_iters, config.seed) == (5, 2, 40, 4)
        assert config.settings is settings


class TestSearch:
    """Test seeded searches."""

    def test_converges_near_e2(self, e2):
        """Test that a perturbed twisted product is pulled back onto the variety."""
        config = SearchConfig(n=4, seed=3, restarts=1, max_iters=200, residual_tol=1e-11, initial=e2, perturbation=1e-2)
        result = search(config)
        assert result.success
        assert result.best_residual < 1e-11
        assert result.admissible

    def test_rank_target_at_e2(self, e2):
        """Test that an exact start satisfies the rank target without iterating."""
        config = SearchConfig(n=4, target_rank=2, full=True, restarts=1, initial=e2, perturbation=0.0)
        result = search(config)
        assert result.traces[0].iterations == 0
        assert result.success
        assert (result.rank, result.full, result.branch) == (2, True, "twisted-product")
        assert any("not implied" in note for note in result.notes)

    def test_worker_count_does_not_change_result(self):
        """Test that restarts run on a pool give bit-identical output."""
        serial = search(SearchConfig(n=3, seed=5, restarts=4, max_iters=30, workers=1))
        pooled = search(SearchConfig(n=3, seed=5, restarts=4, max_iters=30, workers=4))
        assert np.array_equal(serial.x, pooled.x)
        assert serial.best_restart == pooled.best_restart
        assert [t.residual for t in serial.traces] == [t.residual for t in pooled.traces]

    def test_same_seed_same_result(self):
        """Test that a fixed seed reproduces the search."""
        first = search(SearchConfig(n=2, seed=9, restarts=2, max_iters=20))
        second = search(SearchConfig(n=2, seed=9, restarts=2, max_iters=20))
        assert np.array_equal(first.x, second.x)

    def test_clamped_components_stay_zero(self):
        """Test that an isolated-root clamp holds throughout the search."""
        clamp = isolated_root_clamp(4, 1)
        result = search(SearchConfig(n=4, seed=2, restarts=2, max_iters=20, clamped=clamp))
        assert isinstance(result.torsion, TorsionTensor)
        assert all(result.torsion.component(j, i, k) == 0 for j, i, k in clamp)

    def test_isolated_root_floor(self):
        """Test that n = 4, r = 3 with an isolated root clamped in an adapted frame never converges."""
        config = SearchConfig(
            n=4,
            target_rank=3,
            full=True,
            seed=11,
            restarts=4,
            max_iters=150,
            clamped=isolated_root_clamp(4, 1),
            adapted=True,
        )
        result = search(config)
        assert not result.success
        assert min(trace.residual for trace in result.traces) > 1e-8
        assert all(result.torsion.component(j, i, k) == 0 for j, i, k in isolated_root_clamp(4, 1))

    def test_strict_jacobian_mode(self):
        """Test that the strict self-check passes for the analytic Jacobian."""
        settings = SolverConfig(strict_jacobian=True)
        result = search(SearchConfig(n=3, restarts=1, max_iters=5, settings=settings))
        assert len(result.traces) == 1
