"""Residuals of the pointwise algebraic identities satisfied by BKL torsion."""

from dataclasses import asdict, dataclass
from itertools import product

import numpy as np
from numpy.typing import NDArray

from ..core.logging import get_logger
from .linalg import ComplexArray, KernelBasis, endomorphism_kernel
from .tensor import TorsionTensor, derived_tensors, endomorphism_P, gauduchon_eta

logger = get_logger(__name__)


@dataclass(frozen=True)
class BklResidualReport:
    """One residual per constraint family; admissible is their conjunction."""

    main: float
    eta_orth: float
    norm_gap: float
    b_phi_gap: float
    commutation: float
    admissible: bool
    tol: float

    def residuals(self) -> dict[str, float]:
        values = asdict(self)
        values.pop("admissible")
        values.pop("tol")
        return values


def bkl_tensor(t: ComplexArray) -> ComplexArray:
    """Complex P_{ijkl}, the left-hand side of the quadratic BKL identity."""
    tc = t.conj()
    return (
        np.einsum("qik,qjl->ijkl", t, tc)
        + np.einsum("jiq,klq->ijkl", t, tc)
        + np.einsum("lkq,ijq->ijkl", t, tc)
        - np.einsum("liq,kjq->ijkl", t, tc)
        - np.einsum("jkq,ilq->ijkl", t, tc)
    )


def bkl_residual(torsion: TorsionTensor) -> tuple[NDArray[np.float64], float]:
    """Moduli |P_{ijkl}| for all index tuples and their maximum."""
    moduli = np.abs(bkl_tensor(torsion.data))
    return moduli, float(moduli.max())


def diagonal_residual(torsion: TorsionTensor) -> ComplexArray:
    """The (i, i, k, k) specialization written out on its own.

    sum_q |T^q_ik|^2 + T^i_iq conj(T^k_kq) + T^k_kq conj(T^i_iq) - |T^k_iq|^2 - |T^i_kq|^2
    """
    t = torsion.data
    n = torsion.n
    square = np.abs(t) ** 2
    out = np.zeros((n, n), dtype=np.complex128)
    for i, k in product(range(n), repeat=2):
        cross = np.sum(t[i, i, :] * t[k, k, :].conj())
        out[i, k] = (
            np.sum(square[:, i, k])
            + cross
            + np.conj(cross)
            - np.sum(square[k, i, :])
            - np.sum(square[i, k, :])
        )
    return out


def auxiliary_residuals(torsion: TorsionTensor) -> tuple[float, float, float]:
    """(eta_orth, norm_gap, b_phi_gap)."""
    t = torsion.data
    derived = derived_tensors(torsion)
    eta_orth = float(np.max(np.abs(eta_orthogonality(t))))
    norm_gap = abs(derived.normT2 - 2.0 * derived.lam**2)
    b_phi = derived.B - derived.phi - derived.phi.conj().T
    return eta_orth, float(norm_gap), float(np.max(np.abs(b_phi)))


def b_kernel(torsion: TorsionTensor, rank_tol: float = 1e-7) -> KernelBasis:
    """ker B as a space of (1,0) vectors."""
    return endomorphism_kernel(derived_tensors(torsion).B, rank_tol)


def commutation_check(torsion: TorsionTensor, rank_tol: float = 1e-7) -> float:
    """Largest |P_X P_Y* - P_Y* P_X|_F over pairs from an orthonormal basis of ker B."""
    basis = b_kernel(torsion, rank_tol).vectors
    if basis.shape[1] == 0:
        return 0.0
    endos = [endomorphism_P(torsion.data, basis[:, a]) for a in range(basis.shape[1])]
    worst = 0.0
    for px, py in product(endos, repeat=2):
        pys = py.conj().T
        worst = max(worst, float(np.linalg.norm(px @ pys - pys @ px)))
    return worst


def is_bkl_admissible(torsion: TorsionTensor, tol: float = 1e-9, rank_tol: float = 1e-7) -> BklResidualReport:
    """Evaluate every residual family and their conjunction."""
    _, main = bkl_residual(torsion)
    eta_orth, norm_gap, b_phi_gap = auxiliary_residuals(torsion)
    commutation = commutation_check(torsion, rank_tol)
    values = (main, eta_orth, norm_gap, b_phi_gap, commutation)
    report = BklResidualReport(
        main=main,
        eta_orth=eta_orth,
        norm_gap=norm_gap,
        b_phi_gap=b_phi_gap,
        commutation=commutation,
        admissible=all(v <= tol for v in values),
        tol=tol,
    )
    logger.debug("BKL residuals evaluated", n=torsion.n, admissible=report.admissible, main=main)
    return report


def eta_orthogonality(t: ComplexArray) -> ComplexArray:
    """sum_q eta_q T^q_{ik} as an n x n array."""
    return np.einsum("q,qik->ik", gauduchon_eta(t), t)
