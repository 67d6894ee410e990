"""phi-compatible frames: eigenvalues a_i, the matrix b, b-hat, B-rank, fullness and grouping."""

from dataclasses import dataclass, field
from functools import cmp_to_key
from itertools import combinations

import numpy as np
from scipy import linalg

from ..core.exceptions import (
    NotAdmissibleError,
    SimultaneousDiagonalizationError,
    ToleranceInconsistencyError,
)
from ..core.logging import get_logger
from .bkl_check import is_bkl_admissible
from .linalg import (
    ComplexArray,
    KernelBasis,
    endomorphism_kernel,
    numerical_rank,
    orthonormal_complement,
    phase_gauge,
    simultaneous_diagonalize,
)
from .tensor import TorsionTensor, derived_tensors, endomorphism_P, hermitian_eigenvalues, transform_frame

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class FrameReport:
    """Normalizing frame change and the eigenvalue data read off in the new frame.

    In the normalized frame the first ``r`` vectors span E (a_i != 0), the next ``s`` span
    ker B orthogonal to X_eta and the last one is X_eta / lambda.
    """

    n: int
    U: ComplexArray
    lam: float
    r: int
    a: ComplexArray
    b: ComplexArray
    bhat: ComplexArray
    full: bool
    bhat_rank: int
    grouping: list[list[int]]
    kernels: dict[str, KernelBasis]
    normalized: TorsionTensor
    min_eig_A: float
    seed: int = 0
    attempts: int = 0
    kahler: bool = False
    frame_residual: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def s(self) -> int:
        return max(self.n - 1 - self.r, 0)


@dataclass(frozen=True)
class GroupingCertificate:
    """Equal-a groups and the block structure of A they induce."""

    groups: list[list[int]]
    a_block_residual: float
    distinct_required: bool
    distinct_violation: bool
    min_a_gap: float | None
    min_column_separation: float | None


def _kernels(derived, rank_tol: float) -> dict[str, KernelBasis]:
    return {
        "A": endomorphism_kernel(derived.A, rank_tol),
        "B": endomorphism_kernel(derived.B, rank_tol),
        "phi": endomorphism_kernel(derived.phi, rank_tol),
    }


def _b_matrix(t: ComplexArray, e_vectors: ComplexArray, n_vectors: ComplexArray) -> ComplexArray:
    """b[alpha, i] = <P_{e_alpha} v_i, v_i> for E columns v_i and N' columns of a matrix basis."""
    rows = []
    for alpha in range(n_vectors.shape[1]):
        p = endomorphism_P(t, n_vectors[:, alpha].conj())
        rows.append(np.einsum("ia,ij,ja->a", e_vectors.conj(), p, e_vectors))
    return np.array(rows, dtype=np.complex128).reshape(n_vectors.shape[1], e_vectors.shape[1])


def _canonical_key(a: ComplexArray, bhat: ComplexArray, tol: float):
    """Comparator: descending |a|, ascending arg, then b-hat column real parts, imaginary parts."""
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    keys = [
        [-abs(a[i]), float(np.angle(a[i])), *bhat[:, i].real.tolist(), *bhat[:, i].imag.tolist()]
        for i in range(a.size)
    ]

    def compare(p: int, q: int) -> int:
        for x, y in zip(keys[p], keys[q]):
            if abs(x - y) > tol * scale:
                return -1 if x < y else 1
        return 0

    return cmp_to_key(compare)


def group_equal(values: ComplexArray, tol: float) -> list[list[int]]:
    """Consecutive 1-based groups of values equal within tol * max|value|."""
    if values.size == 0:
        return []
    scale = tol * float(np.max(np.abs(values)))
    groups = [[1]]
    for i in range(1, values.size):
        if abs(values[i] - values[groups[-1][0] - 1]) <= scale:
            groups[-1].append(i + 1)
        else:
            groups.append([i + 1])
    return groups


def normalized_frame_residual(t: ComplexArray, r: int) -> float:
    """Deviation from the normalized pattern: diagonal T^j_{i alpha}, vanishing T^alpha and T_{alpha beta}."""
    n = t.shape[0]
    worst = 0.0
    for alpha in range(r, n):
        block = t[:, :, alpha]
        worst = max(worst, float(np.max(np.abs(block - np.diag(np.diag(block))))))
        worst = max(worst, float(np.max(np.abs(t[alpha]))))
        worst = max(worst, float(np.max(np.abs(t[:, alpha, r:]))))
    return worst


def _kahler_report(torsion: TorsionTensor, kernels: dict[str, KernelBasis], seed: int, min_eig_a: float) -> FrameReport:
    n = torsion.n
    return FrameReport(
        n=n,
        U=np.eye(n, dtype=np.complex128),
        lam=0.0,
        r=0,
        a=np.zeros(0, dtype=np.complex128),
        b=np.zeros((max(n - 1, 0), 0), dtype=np.complex128),
        bhat=np.zeros((n, 0), dtype=np.complex128),
        full=False,
        bhat_rank=0,
        grouping=[],
        kernels=kernels,
        normalized=torsion,
        min_eig_A=min_eig_a,
        seed=seed,
        attempts=0,
        kahler=True,
    )


def phi_compatible_frame(
    torsion: TorsionTensor,
    tol: float = 1e-9,
    rank_tol: float = 1e-7,
    seed: int = 0,
    retries: int = 5,
) -> FrameReport:
    """Normalize an admissible torsion to a phi-compatible frame.

    e_n is rotated onto X_eta / lambda, then the commuting normal family P_X (X in ker B,
    which contains phi / lambda = P_{e_n}) is diagonalized simultaneously. Kähler input
    returns a rank-0 report.

    Raises:
        NotAdmissibleError: If the torsion fails the admissibility check.
        SimultaneousDiagonalizationError: If the family cannot be diagonalized.
        ToleranceInconsistencyError: If rank(b-hat) and positivity of A disagree.
    """
    check = is_bkl_admissible(torsion, tol, rank_tol)
    if not check.admissible:
        raise NotAdmissibleError(check.residuals(), tol)

    n = torsion.n
    t = torsion.data
    derived = derived_tensors(torsion)
    kernels = _kernels(derived, rank_tol)
    min_eig_a = float(hermitian_eigenvalues(derived.A)[0])
    if derived.lam <= tol:
        logger.debug("Kähler point, returning rank-0 report", n=n)
        return _kahler_report(torsion, kernels, seed, min_eig_a)

    lam = derived.lam
    v_n = derived.eta / lam
    kernel_b = kernels["B"].vectors
    r = n - kernels["B"].dim

    family = [endomorphism_P(t, kernel_b[:, c]) for c in range(kernel_b.shape[1])]
    family.append(derived.phi / lam)
    rng = np.random.default_rng(seed)
    z, attempts = simultaneous_diagonalize(family, rng, tol, retries)

    a_all = np.einsum("ia,ij,ja->a", z.conj(), derived.phi / lam, z)
    order = np.argsort(-np.abs(a_all), kind="stable")
    e_vectors = z[:, order[:r]]
    n_block = z[:, order[r:]]
    n_prime = orthonormal_complement(v_n[:, None], n_block, rank_tol)
    s = n - 1 - r
    if n_prime.shape[1] != s:
        raise ToleranceInconsistencyError(
            "ker B does not split as X_eta plus a complement of the expected size",
            expected=s,
            found=int(n_prime.shape[1]),
        )

    if s > 0 and r > 0:
        left, _, _ = linalg.svd(_b_matrix(t, e_vectors, n_prime))
        n_prime = n_prime @ left
    n_prime = np.column_stack([phase_gauge(n_prime[:, c]) for c in range(s)]) if s else n_prime

    a_values = np.einsum("ia,ij,ja->a", e_vectors.conj(), derived.phi / lam, e_vectors)
    b_values = _b_matrix(t, e_vectors, n_prime)
    bhat_values = np.vstack([b_values, a_values[None, :]])
    ranked = sorted(range(r), key=_canonical_key(a_values, bhat_values, tol))
    e_vectors = np.column_stack([phase_gauge(e_vectors[:, i]) for i in ranked])

    v = np.column_stack([e_vectors, n_prime, v_n])
    u = v.conj().T
    normalized = transform_frame(torsion, u, tol)
    tn = normalized.data

    a = np.array([tn[i, i, n - 1] for i in range(r)], dtype=np.complex128)
    b = np.array([[tn[i, i, r + alpha] for i in range(r)] for alpha in range(s)], dtype=np.complex128).reshape(s, r)
    bhat = np.vstack([b, a[None, :]])

    residual = normalized_frame_residual(tn, r)
    scale = max(1.0, float(np.max(np.abs(t))))
    if residual > tol * scale:
        raise SimultaneousDiagonalizationError(attempts, residual)

    rank, full = _rank_and_fullness(bhat, n, r, min_eig_a, tol, rank_tol)
    report = FrameReport(
        n=n,
        U=u,
        lam=lam,
        r=r,
        a=a,
        b=b,
        bhat=bhat,
        full=full,
        bhat_rank=rank,
        grouping=group_equal(a, tol),
        kernels=kernels,
        normalized=normalized,
        min_eig_A=min_eig_a,
        seed=seed,
        attempts=attempts,
        frame_residual=residual,
    )
    logger.debug("Normalized frame", n=n, r=r, lam=lam, full=full, attempts=attempts)
    return report


def _rank_and_fullness(
    bhat: ComplexArray, n: int, r: int, min_eig_a: float, tol: float, rank_tol: float
) -> tuple[int, bool]:
    rank = numerical_rank(bhat, rank_tol) if bhat.size else 0
    full_by_rank = rank == n - r
    full_by_a = min_eig_a > tol
    if full_by_rank != full_by_a:
        raise ToleranceInconsistencyError(
            "rank(b-hat) = n - r disagrees with positivity of A",
            bhat_rank=rank,
            n_minus_r=n - r,
            min_eig_A=min_eig_a,
            tol=tol,
        )
    return rank, full_by_rank


def bhat_and_fullness(report: FrameReport, tol: float = 1e-9, rank_tol: float = 1e-7) -> tuple[int, bool]:
    """Rank of b-hat by SVD and fullness, cross-checked against min eig(A) > tol."""
    min_eig_a = float(hermitian_eigenvalues(derived_tensors(report.normalized).A)[0])
    return _rank_and_fullness(report.bhat, report.n, report.r, min_eig_a, tol, rank_tol)


def extended_eigenvalues(report: FrameReport) -> tuple[ComplexArray, ComplexArray]:
    """a and b padded with zeros to length n (indices beyond r carry no eigenvalue)."""
    n, r = report.n, report.r
    a_ext = np.zeros(n, dtype=np.complex128)
    a_ext[:r] = report.a
    b_ext = np.zeros((report.s, n), dtype=np.complex128)
    b_ext[:, :r] = report.b
    return a_ext, b_ext


def eigenvalue_sum_constraints(normalized: TorsionTensor, report: FrameReport) -> float:
    """max |(a_i + a_k - a_j) conj(T^j_ik)| together with the same expression for every b_alpha."""
    t = normalized.data
    a_ext, b_ext = extended_eigenvalues(report)

    def violation(values: ComplexArray) -> float:
        weight = values[None, :, None] + values[None, None, :] - values[:, None, None]
        return float(np.max(np.abs(weight * t.conj())))

    worst = violation(a_ext)
    for row in b_ext:
        worst = max(worst, violation(row))
    return worst


def eigen_grouping(report: FrameReport, tol: float = 1e-9) -> GroupingCertificate:
    """Equal-a groups, block-diagonality of A over the groups and N, and separation checks.

    At r = n - 1 the a_i must be pairwise distinct. Below that, b-hat columns inside one
    group must differ; their smallest distance is reported.
    """
    n, r = report.n, report.r
    groups = group_equal(report.a, tol)
    labels = np.full(n, -1)
    for g, members in enumerate(groups):
        for i in members:
            labels[i - 1] = g
    a_matrix = derived_tensors(report.normalized).A
    off_block = labels[:, None] != labels[None, :]
    a_block_residual = float(np.max(np.abs(a_matrix[off_block]))) if off_block.any() else 0.0

    gaps = [abs(report.a[i] - report.a[k]) for i, k in combinations(range(r), 2)]
    min_gap = float(min(gaps)) if gaps else None
    distinct_required = r == n - 1 and n >= 2
    scale = tol * float(np.max(np.abs(report.a))) if r else 0.0
    distinct_violation = bool(distinct_required and min_gap is not None and min_gap <= scale)

    separation = None
    if r < n - 1:
        distances = [
            float(np.linalg.norm(report.bhat[:, i - 1] - report.bhat[:, k - 1]))
            for members in groups
            for i, k in combinations(members, 2)
        ]
        separation = min(distances) if distances else None

    return GroupingCertificate(
        groups=groups,
        a_block_residual=a_block_residual,
        distinct_required=distinct_required,
        distinct_violation=distinct_violation,
        min_a_gap=min_gap,
        min_column_separation=separation,
    )


def isolated_roots(report: FrameReport, tol: float = 1e-9) -> list[int]:
    """1-based indices i < n with T^i_{jk} = T^j_{ik} = 0 for all j, k < n."""
    t = report.normalized.data
    m = report.n - 1
    roots = []
    for i in range(min(report.r, m)):
        coupled = max(float(np.max(np.abs(t[i, :m, :m]))), float(np.max(np.abs(t[:m, i, :m]))))
        if coupled <= tol:
            roots.append(i + 1)
    return roots
