"""Tests for point classification."""

import numpy as np
import pytest

from src.core.exceptions import NotAdmissibleError, PreconditionError
from src.geometry.bkl_check import is_bkl_admissible
from src.geometry.frames import phi_compatible_frame
from src.geometry.tensor import build_torsion, transform_frame
from src.services.analyzer import (
    BISMUT_FLAT,
    DIM5,
    KAHLER,
    OTHER,
    TWISTED,
    classify_point,
    dim5_report,
    flatness_witnesses,
    recover_twist,
)
from src.services.constructors import SasakianProductSpec, sasakian_product

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


class TestClassifyPoint:
    """Test the branch chosen for each example."""

    def test_kahler(self, zero_torsion):
        """Test that the zero tensor is Kähler."""
        result = classify_point(zero_torsion)
        assert result.branch == KAHLER
        assert result.r == 0
        assert result.twisted is None

    def test_unit_surface_is_twisted(self, unit_surface):
        """Test that a BKL surface is a twisted product with r = 1."""
        result = classify_point(unit_surface)
        assert result.branch == TWISTED
        assert result.full
        assert result.twisted.reconstruction_gap <= 1e-12

    def test_e2_is_twisted(self, e2):
        """Test the twist recovered from lambda = (1, 1), D = [[1, i], [i, 1]]."""
        result = classify_point(e2)
        assert result.branch == TWISTED
        twisted = result.twisted
        assert np.array_equal(twisted.lambdas, np.ones(2))
        assert np.allclose(twisted.column_norms, np.sqrt(2.0), atol=1e-10)
        assert twisted.re_orthogonality <= 1e-10
        assert twisted.reconstruction_gap <= 1e-10
        assert twisted.b_row_sums <= 1e-10
        assert result.evidence["b_row_sums"] == twisted.b_row_sums
        assert result.rank_bound["holds"]

    def test_rotated_e2_same_branch(self, e2):
        """Test that the branch does not depend on the input frame."""
        rng = np.random.default_rng(19)
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
        result = classify_point(transform_frame(e2, q))
        assert result.branch == TWISTED
        assert result.twisted.b_row_sums <= 1e-9

    def test_e3_is_dim5_sasakian(self, e3):
        """Test the dimension-5 identities on three Sasakian factors times R."""
        result = classify_point(e3)
        assert result.branch == DIM5
        dim5 = result.dim5
        assert dim5.degenerate
        assert np.allclose(dim5.B, [1.0, 1.0, 1.0], atol=1e-10)
        assert dim5.abik_residual <= 1e-10
        assert dim5.abi_residual <= 1e-10
        assert dim5.flat_subbranch is None
        assert result.rank_bound == {"bhat_rank": 2, "ceil_half_n": 3, "holds": True}
        assert any("not a proof" in note for note in result.notes)

    def test_sasakian_without_flat_factor(self):
        """Test that two Sasakian factors and no R land in the catch-all branch."""
        torsion = sasakian_product(SasakianProductSpec(r=2, s=0, c=[1.0, 1.0], D=J2), exact=False).torsion
        result = classify_point(torsion)
        assert result.branch == OTHER
        assert (result.n, result.r) == (3, 2)

    def test_not_admissible(self):
        """Test that classification refuses points off the variety."""
        with pytest.raises(NotAdmissibleError):
            classify_point(build_torsion(3, [(1, 2, 3, 1.0)]))

    def test_evidence_keys(self, e2):
        """Test that the residuals behind the verdict are reported."""
        evidence = classify_point(e2).evidence
        for key in ("main", "norm_gap", "frame_residual", "min_eig_A", "eigenvalue_sums", "a_block", "reconstruction_gap"):
            assert key in evidence


class TestStructureReports:
    """Test the per-branch reports directly."""

    def test_dim5_needs_dimension_five(self, e2):
        """Test that dim5_report rejects other dimensions."""
        with pytest.raises(PreconditionError) as exc_info:
            dim5_report(phi_compatible_frame(e2))
        assert exc_info.value.details["operation"] == "dim5_report"
        assert exc_info.value.exit_code == 1

    def test_y4_completion(self, e3):
        """Test that Y_4 is a unit vector Re-orthogonal to the columns of b-hat."""
        report = dim5_report(phi_compatible_frame(e3))
        assert report.y4 is not None
        assert report.y4_residual <= 1e-10

    def test_recover_twist_of_unit_surface(self, unit_surface):
        """Test that the surface is recovered with D = (1)."""
        recovery = recover_twist(phi_compatible_frame(unit_surface))
        assert np.allclose(recovery.D, [[1.0]], atol=1e-12)
        assert recovery.b_row_sums == 0.0

    def test_flatness_witnesses_of_unit_surface(self, unit_surface):
        """Test that the only index of the surface is an isolated root."""
        witnesses = flatness_witnesses(phi_compatible_frame(unit_surface))
        assert witnesses.isolated_roots == [1]
        assert witnesses.witnesses == []
        assert witnesses.distinct


class TestBismutFlatBranch:
    """Test left-invariant points of compact groups, where the Bismut connection is flat."""

    def test_su3_is_admissible(self, su3_point):
        """Test the SU(3) point against the admissibility check."""
        report = is_bkl_admissible(su3_point)
        assert report.admissible
        assert max(report.residuals().values()) <= 1e-10

    def test_su3_branch(self, su3_point):
        """Test that r = n - 1 = 3 is predicted Bismut flat with distinct a_i and no isolated root."""
        result = classify_point(su3_point)
        assert result.branch == BISMUT_FLAT
        assert (result.n, result.r, result.full) == (4, 3, True)
        flatness = result.flatness
        assert flatness.distinct
        assert flatness.isolated_roots == []
        assert result.notes == []

    def test_su3_witnesses(self, su3_point):
        """Test one witness per index, each on the bracket [E_12, E_23] = E_13 with a_j = a_i + a_k."""
        witnesses = flatness_witnesses(phi_compatible_frame(su3_point))
        assert [w.index for w in witnesses.witnesses] == [1, 2, 3]
        for w in witnesses.witnesses:
            assert w.value == pytest.approx(0.5)
            assert sorted((w.upper,) + w.lower) == [1, 2, 3]
            assert w.relation_residual <= 1e-9

    def test_frame_independent(self, su3_point):
        """Test that a unitary frame change keeps the branch and the witnesses."""
        u = np.linalg.qr(np.arange(16).reshape(4, 4) + 1j * np.eye(4))[0]
        result = classify_point(transform_frame(su3_point, u))
        assert result.branch == BISMUT_FLAT
        assert result.flatness.isolated_roots == []
        assert len(result.flatness.witnesses) == 3


class TestDim5FlatAlternative:
    """Test a dimension-5 full point with r = 3 whose E-torsion does not vanish."""

    def test_point_shape(self, su3_torus_point):
        """Test admissibility, r = 3 and fullness."""
        assert is_bkl_admissible(su3_torus_point).admissible
        report = phi_compatible_frame(su3_torus_point)
        assert (report.n, report.r, report.full) == (5, 3, True)

    def test_not_degenerate(self, su3_torus_point):
        """Test that T^3_{12} != 0 in the normalized frame and the flat sub-branch is reported."""
        dim5 = dim5_report(phi_compatible_frame(su3_torus_point))
        assert dim5.degenerate is False
        assert dim5.degeneracy_residual == pytest.approx(0.5)
        flat = dim5.flat_subbranch
        assert flat is not None
        assert flat.value == pytest.approx(0.5)
        assert sorted(flat.witness) == [1, 2, 3]

    def test_classified_as_flat(self, su3_torus_point):
        """Test that the classifier takes the flat alternative of the dichotomy."""
        result = classify_point(su3_torus_point)
        assert result.branch == BISMUT_FLAT
        assert result.dim5 is not None and not result.dim5.degenerate
        assert any("flat alternative" in note for note in result.notes)
