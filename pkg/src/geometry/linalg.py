"""Dense complex linear algebra shared by the checker, the normalizer and the analyzer.

Endomorphisms are stored as matrices ``M[i, j]`` with ``M(e_i) = sum_j M[i, j] e_j``. A
vector ``X = sum_i X_i e_i`` therefore maps to the components ``M.T @ X``. Every kernel in
this package is a kernel of the endomorphism, i.e. a null space of ``M.T``.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import linalg

from ..core.exceptions import NonUnitaryError, SimultaneousDiagonalizationError
from ..core.logging import get_logger

logger = get_logger(__name__)

ComplexArray = NDArray[np.complex128]


@dataclass(frozen=True, eq=False)
class KernelBasis:
    """Orthonormal basis of a kernel, one basis vector per column."""

    vectors: ComplexArray
    singular_values: NDArray[np.float64]

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def contains(self, x: ComplexArray, tol: float) -> bool:
        """Whether ``x`` lies in the span within ``tol`` (absolute)."""
        residual = x - self.vectors @ (self.vectors.conj().T @ x)
        return bool(np.linalg.norm(residual) <= tol)


def kernel_basis(operator: ComplexArray, rank_tol: float = 1e-7) -> KernelBasis:
    """Null space of a matrix acting on column vectors, by singular value thresholding.

    Singular values ``<= rank_tol * sigma_max`` count as zero; a zero matrix has the full
    space as kernel.
    """
    op = np.asarray(operator, dtype=np.complex128)
    _, sigma, vh = linalg.svd(op)
    n_cols = op.shape[1]
    padded = np.zeros(n_cols)
    padded[: sigma.size] = sigma
    sigma_max = float(padded.max()) if n_cols else 0.0
    if sigma_max == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(padded > rank_tol * sigma_max))
    null = vh[rank:].conj().T
    return KernelBasis(vectors=np.ascontiguousarray(null), singular_values=padded)


def endomorphism_kernel(matrix: ComplexArray, rank_tol: float = 1e-7) -> KernelBasis:
    """Kernel of the endomorphism stored as ``matrix`` (see module docstring)."""
    return kernel_basis(np.asarray(matrix).T, rank_tol)


def numerical_rank(matrix: ComplexArray, rank_tol: float = 1e-7) -> int:
    """Rank by the same relative threshold ``kernel_basis`` uses."""
    m = np.asarray(matrix, dtype=np.complex128)
    if m.size == 0:
        return 0
    sigma = linalg.svdvals(m)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(sigma > rank_tol * sigma[0]))


def unitary_deviation(u: ComplexArray) -> float:
    """Frobenius norm of ``U U* - I``."""
    m = np.asarray(u, dtype=np.complex128)
    return float(np.linalg.norm(m @ m.conj().T - np.eye(m.shape[0])))


def check_unitary(u: ComplexArray, tol: float = 1e-9) -> ComplexArray:
    """Return ``u`` as a complex array, raising NonUnitaryError if it is not unitary."""
    m = np.asarray(u, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NonUnitaryError(float("inf"), tol)
    deviation = unitary_deviation(m)
    if deviation > tol:
        raise NonUnitaryError(deviation, tol)
    return m


def off_diagonal_norm(m: ComplexArray) -> float:
    """Largest modulus of an off-diagonal entry."""
    if m.shape[0] < 2:
        return 0.0
    return float(np.max(np.abs(m - np.diag(np.diag(m)))))


def simultaneous_diagonalize(
    family: Sequence[ComplexArray],
    rng: np.random.Generator,
    tol: float,
    retries: int = 5,
) -> tuple[ComplexArray, int]:
    """Unitary V with ``V* M V`` diagonal for every member of a commuting normal family.

    A random real combination of the family is Schur-decomposed; for normal matrices the
    Schur vectors are eigenvectors. The combination is redrawn until every member comes
    out diagonal within ``tol * max(1, |M|_F)``.

    Returns:
        The unitary matrix and the number of attempts used.

    Raises:
        SimultaneousDiagonalizationError: If no draw diagonalizes the whole family.
    """
    members = [np.asarray(m, dtype=np.complex128) for m in family]
    n = members[0].shape[0] if members else 0
    if not members or n == 0:
        return np.eye(n, dtype=np.complex128), 1

    scales = [max(1.0, float(np.linalg.norm(m))) for m in members]
    worst = np.inf
    for attempt in range(1, retries + 1):
        weights = rng.standard_normal(len(members))
        combination = sum(w * m for w, m in zip(weights, members))
        _, z = linalg.schur(combination, output="complex")
        worst = max(
            off_diagonal_norm(z.conj().T @ m @ z) / scale for m, scale in zip(members, scales)
        )
        if worst <= tol:
            if attempt > 1:
                logger.warning("Simultaneous diagonalization needed retries", attempts=attempt)
            return z, attempt
        logger.debug("Diagonalization attempt rejected", attempt=attempt, off_diagonal=worst)

    raise SimultaneousDiagonalizationError(retries, float(worst))


def orthonormal_complement(basis: ComplexArray, within: ComplexArray, rank_tol: float = 1e-7) -> ComplexArray:
    """Orthonormal basis of the part of ``span(within)`` orthogonal to ``span(basis)``."""
    q = np.asarray(within, dtype=np.complex128)
    if q.shape[1] == 0:
        return q
    b = np.asarray(basis, dtype=np.complex128)
    if b.size:
        q = q - b @ (b.conj().T @ q)
    u, sigma, _ = linalg.svd(q, full_matrices=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        return np.zeros((q.shape[0], 0), dtype=np.complex128)
    keep = int(np.count_nonzero(sigma > rank_tol * max(1.0, sigma[0])))
    return u[:, :keep]


def phase_gauge(vector: ComplexArray, rel_tol: float = 1e-9) -> ComplexArray:
    """Rotate a vector so its first largest-modulus entry is real positive."""
    moduli = np.abs(vector)
    top = float(moduli.max()) if moduli.size else 0.0
    if top == 0.0:
        return vector
    pivot = int(np.flatnonzero(moduli >= top * (1.0 - rel_tol))[0])
    return vector * (np.conj(vector[pivot]) / moduli[pivot])
