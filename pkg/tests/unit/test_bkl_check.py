"""Tests for the admissibility residuals."""

import numpy as np
import pytest

from src.geometry.bkl_check import (
    b_kernel,
    bkl_residual,
    bkl_tensor,
    commutation_check,
    diagonal_residual,
    is_bkl_admissible,
)
from src.geometry.tensor import TorsionTensor, build_torsion


def random_with_kernel(rng: np.random.Generator, n: int) -> TorsionTensor:
    """Random tensor with T^n_{**} = 0, so that ker B is nontrivial."""
    raw = rng.standard_normal((n, n, n)) + 1j * rng.standard_normal((n, n, n))
    raw[n - 1] = 0.0
    return TorsionTensor.antisymmetrized(raw)


class TestAdmissible:
    """Test the residual report on admissible points."""

    @pytest.mark.parametrize("name", ["unit_surface", "e2", "e3", "zero_torsion"])
    def test_examples_pass(self, request, name):
        """Test that every named example is admissible with tiny residuals."""
        report = is_bkl_admissible(request.getfixturevalue(name))
        assert report.admissible
        assert max(report.residuals().values()) <= 1e-12

    def test_unit_surface_up_to_sign(self):
        """Test that T^1_{12} = 1 is admissible too."""
        assert is_bkl_admissible(build_torsion(2, [(1, 1, 2, 1.0)])).admissible

    def test_residual_keys(self, unit_surface):
        """Test the residual families reported."""
        report = is_bkl_admissible(unit_surface)
        assert set(report.residuals()) == {"main", "eta_orth", "norm_gap", "b_phi_gap", "commutation"}
        assert report.tol == 1e-9


class TestNotAdmissible:
    """Test the residual report on points off the variety."""

    def test_negative_control(self):
        """Test that T^1_{23} = 1 in dimension 3 fails."""
        torsion = build_torsion(3, [(1, 2, 3, 1.0)])
        report = is_bkl_admissible(torsion)
        assert not report.admissible
        assert report.norm_gap == pytest.approx(2.0)

    def test_tolerance_controls_the_verdict(self):
        """Test that a loose tolerance accepts a slightly perturbed surface."""
        torsion = build_torsion(3, [(1, 1, 2, 1.0), (1, 2, 3, 1e-4)])
        assert not is_bkl_admissible(torsion, tol=1e-9).admissible
        assert is_bkl_admissible(torsion, tol=1e-3).admissible

    def test_commutation_median_on_random_tensors(self):
        """Test that random tensors with a kernel violate the commutation identity."""
        rng = np.random.default_rng(2024)
        values = [commutation_check(random_with_kernel(rng, 3)) for _ in range(100)]
        assert float(np.median(values)) > 1e-3


class TestResidualParts:
    """Test the individual residual families."""

    def test_diagonal_specialization(self):
        """Test that the (i, i, k, k) entries of P match the written-out form."""
        rng = np.random.default_rng(5)
        raw = rng.standard_normal((3, 3, 3)) + 1j * rng.standard_normal((3, 3, 3))
        torsion = TorsionTensor.antisymmetrized(raw)
        p = bkl_tensor(torsion.data)
        full = np.array([[p[i, i, k, k] for k in range(3)] for i in range(3)])
        assert np.allclose(full, diagonal_residual(torsion))

    def test_moduli_shape(self, e2):
        """Test that the residual moduli cover every index tuple."""
        moduli, worst = bkl_residual(e2)
        assert moduli.shape == (4, 4, 4, 4)
        assert worst == float(moduli.max())

    def test_b_kernel_of_unit_surface(self, unit_surface):
        """Test that ker B is spanned by e_2."""
        kernel = b_kernel(unit_surface)
        assert kernel.dim == 1
        assert kernel.contains(np.array([0.0, 1.0]), 1e-12)

    def test_commutation_on_examples(self, e2, e3):
        """Test that constructed points pass the commutation identity."""
        assert commutation_check(e2) <= 1e-9
        assert commutation_check(e3) <= 1e-9
