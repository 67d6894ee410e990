"""Classification of admissible points and the structure read off their normalized frames."""

from dataclasses import dataclass, field
from itertools import combinations
from math import ceil
from typing import Any

import numpy as np
from scipy import linalg

from ..core.exceptions import PreconditionError
from ..core.logging import get_logger
from ..geometry.bkl_check import is_bkl_admissible
from ..geometry.frames import (
    FrameReport,
    eigen_grouping,
    eigenvalue_sum_constraints,
    isolated_roots,
    phi_compatible_frame,
)
from ..geometry.linalg import ComplexArray
from ..geometry.tensor import TorsionTensor
from .constructors import re_orthogonality_residual, twisted_torsion

logger = get_logger(__name__)

KAHLER = "kahler"
BISMUT_FLAT = "bismut-flat-predicted"
TWISTED = "twisted-product"
DIM5 = "dim5-sasakian"
OTHER = "other"

BRANCHES = (KAHLER, BISMUT_FLAT, TWISTED, DIM5, OTHER)


@dataclass(eq=False)
class TwistedRecovery:
    """Twist data of a full point with r = n/2, presented with unit surface constants.

    ``column_norms`` are the frame-independent quantities lambda_i |D_i| of any presentation.
    """

    lambdas: np.ndarray
    D: ComplexArray
    column_norms: np.ndarray
    re_orthogonality: float
    reconstruction_gap: float
    b_row_sums: float


@dataclass(eq=False)
class FlatSubbranch:
    witness: tuple[int, int, int]
    value: float
    column_sum_residual: float
    norm_residual: float


@dataclass(eq=False)
class Dim5Report:
    degenerate: bool
    degeneracy_residual: float
    abik_residual: float
    abi_residual: float
    B: np.ndarray
    y4: ComplexArray | None
    y4_residual: float | None
    flat_subbranch: FlatSubbranch | None = None


@dataclass(frozen=True)
class Witness:
    """T^upper_{lower} != 0 with a_upper = a_lower[0] + a_lower[1] (1-based)."""

    index: int
    upper: int
    lower: tuple[int, int]
    value: float
    relation_residual: float


@dataclass(eq=False)
class FlatnessWitnesses:
    isolated_roots: list[int]
    witnesses: list[Witness]
    distinct: bool


@dataclass(eq=False)
class ClassificationReport:
    n: int
    r: int
    full: bool
    branch: str
    frame: FrameReport
    evidence: dict[str, float] = field(default_factory=dict)
    rank_bound: dict[str, Any] = field(default_factory=dict)
    twisted: TwistedRecovery | None = None
    dim5: Dim5Report | None = None
    flatness: FlatnessWitnesses | None = None
    notes: list[str] = field(default_factory=list)


def recover_twist(report: FrameReport) -> TwistedRecovery:
    """Read the twist D = conj(b-hat) off a normalized frame, with lambda_i = 1."""
    r = report.r
    bhat = report.bhat
    d = bhat.conj()
    lambdas = np.ones(r)
    rebuilt = twisted_torsion(lambdas, d)
    return TwistedRecovery(
        lambdas=lambdas,
        D=d,
        column_norms=np.linalg.norm(bhat, axis=0),
        re_orthogonality=re_orthogonality_residual(d),
        reconstruction_gap=rebuilt.max_difference(report.normalized),
        b_row_sums=float(np.max(np.abs(report.b.sum(axis=1)))) if report.b.size else 0.0,
    )


def _y4_completion(bhat: ComplexArray) -> tuple[ComplexArray | None, float | None]:
    """Unit (b_4, b_5) that is Re-orthogonal to the three columns of b-hat, oriented positively."""
    rows = np.column_stack([bhat[0].real, bhat[0].imag, bhat[1].real, bhat[1].imag])
    kernel = linalg.null_space(rows)
    if kernel.shape[1] != 1:
        return None, None
    y = kernel[:, 0]
    if np.linalg.det(np.vstack([rows, y])) < 0:
        y = -y
    completion = np.array([y[0] + 1j * y[1], y[2] + 1j * y[3]])
    residual = max(
        float(np.max(np.abs(np.real(bhat.conj().T @ completion)))),
        abs(float(np.sum(np.abs(completion) ** 2)) - 1.0),
    )
    return completion, residual


def _flat_subbranch(t: ComplexArray, bhat: ComplexArray) -> FlatSubbranch:
    best = max(
        ((k, i, j) for k in range(3) for i, j in combinations(range(3), 2)),
        key=lambda key: abs(t[key[0], key[1], key[2]]),
    )
    k, i, j = best
    value = float(abs(t[k, i, j]))
    norms = [float(np.sum(np.abs(bhat[:, c]) ** 2)) for c in (i, j, k)]
    return FlatSubbranch(
        witness=(k + 1, i + 1, j + 1),
        value=value,
        column_sum_residual=float(np.linalg.norm(bhat[:, k] - bhat[:, i] - bhat[:, j])),
        norm_residual=max(abs(value**2 - x) for x in norms),
    )


def dim5_report(report: FrameReport, tol: float = 1e-9) -> Dim5Report:
    """Dimension-5 structure: E-degeneracy, the Re-orthogonality and length identities, Y_4.

    b-hat rows are (b_4, a) with the convention b_5i = a_i.

    Raises:
        PreconditionError: Unless n = 5, r = 3 and the point is full.
    """
    if report.n != 5 or report.r != 3 or not report.full:
        raise PreconditionError(
            "dim5_report",
            f"needs n = 5, r = 3 and a full point (got n={report.n}, r={report.r}, full={report.full})",
        )
    t = report.normalized.data
    bhat = report.bhat
    degeneracy = float(np.max(np.abs(t[:3, :3, :3])))
    scale = max(1.0, float(np.max(np.abs(t))))
    degenerate = degeneracy <= tol * scale

    gram = 2.0 * np.real(bhat.T @ bhat.conj())
    abik = max(abs(gram[i, k]) for i, k in combinations(range(3), 2))
    b_norms = 2.0 * np.sum(np.abs(bhat) ** 2, axis=0)
    abi = float(np.max(np.abs(report.lam * 2.0 * report.a.real - b_norms)))
    y4, y4_residual = _y4_completion(bhat)

    result = Dim5Report(
        degenerate=degenerate,
        degeneracy_residual=degeneracy,
        abik_residual=float(abik),
        abi_residual=abi,
        B=b_norms,
        y4=y4,
        y4_residual=y4_residual,
    )
    if not degenerate:
        result.flat_subbranch = _flat_subbranch(t, bhat)
    logger.debug("Dimension-5 analysis", degenerate=degenerate, abik=result.abik_residual, abi=abi)
    return result


def flatness_witnesses(report: FrameReport, tol: float = 1e-9) -> FlatnessWitnesses:
    """Isolated roots and, for every other index below n, a torsion entry chaining it to others."""
    t = report.normalized.data
    m = report.n - 1
    a = np.zeros(report.n, dtype=np.complex128)
    a[: report.r] = report.a
    roots = isolated_roots(report, tol)
    scale = max(1.0, float(np.max(np.abs(t))))
    witnesses = []
    for i in range(min(report.r, m)):
        if i + 1 in roots:
            continue
        candidates = [(j, i, k) for j in range(m) for k in range(m) if k != i]
        candidates += [(i, j, k) for j in range(m) for k in range(j + 1, m)]
        upper, left, right = max(candidates, key=lambda key: abs(t[key]))
        witnesses.append(
            Witness(
                index=i + 1,
                upper=upper + 1,
                lower=(left + 1, right + 1),
                value=float(abs(t[upper, left, right])),
                relation_residual=float(abs(a[upper] - a[left] - a[right])),
            )
        )
    grouping = eigen_grouping(report, tol)
    return FlatnessWitnesses(isolated_roots=roots, witnesses=witnesses, distinct=not grouping.distinct_violation)


def classify_point(
    torsion: TorsionTensor,
    tol: float = 1e-9,
    rank_tol: float = 1e-7,
    seed: int = 0,
    retries: int = 5,
) -> ClassificationReport:
    """Branch of an admissible point from (n, r, full) and the E-degeneracy in dimension 5.

    Raises:
        NotAdmissibleError: If the point is not admissible.
    """
    report = phi_compatible_frame(torsion, tol, rank_tol, seed, retries)
    check = is_bkl_admissible(torsion, tol, rank_tol)
    n, r = report.n, report.r
    evidence = dict(check.residuals())
    evidence["frame_residual"] = report.frame_residual
    evidence["min_eig_A"] = report.min_eig_A

    result = ClassificationReport(n=n, r=r, full=report.full, branch=OTHER, frame=report, evidence=evidence)
    if report.kahler:
        result.branch = KAHLER
        logger.debug("Point classified", n=n, branch=KAHLER)
        return result

    grouping = eigen_grouping(report, tol)
    evidence["eigenvalue_sums"] = eigenvalue_sum_constraints(report.normalized, report)
    evidence["a_block"] = grouping.a_block_residual
    if grouping.min_column_separation is not None:
        evidence["min_column_separation"] = grouping.min_column_separation
    result.rank_bound = {
        "bhat_rank": report.bhat_rank,
        "ceil_half_n": ceil(n / 2),
        "holds": (not report.full) or r >= ceil(n / 2),
    }

    if r == n - 1 and n >= 4:
        result.branch = BISMUT_FLAT
        result.flatness = flatness_witnesses(report, tol)
        if result.flatness.isolated_roots:
            result.notes.append(
                f"isolated roots {result.flatness.isolated_roots}: excluded on manifolds, not by pointwise data"
            )
        if not result.flatness.distinct:
            result.notes.append("eigenvalues a_i are not pairwise distinct")
    elif report.full and 2 * r == n:
        result.branch = TWISTED
        result.twisted = recover_twist(report)
        evidence["reconstruction_gap"] = result.twisted.reconstruction_gap
        evidence["re_orthogonality"] = result.twisted.re_orthogonality
        evidence["b_row_sums"] = result.twisted.b_row_sums
    elif n == 5 and r == 3 and report.full:
        result.dim5 = dim5_report(report, tol)
        evidence["abik"] = result.dim5.abik_residual
        evidence["abi"] = result.dim5.abi_residual
        if result.dim5.degenerate:
            result.branch = DIM5
        else:
            result.branch = BISMUT_FLAT
            result.notes.append("E-torsion is not degenerate: the flat alternative of the dimension-5 dichotomy")
        result.notes.append("pointwise analogue of a global dichotomy; not a proof")

    logger.debug("Point classified", n=n, r=r, full=report.full, branch=result.branch)
    return result
