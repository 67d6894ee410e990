"""Chern torsion tensors under a unitary frame and the quantities derived from them.

Components are stored 0-based as ``data[j, i, k] = T^j_{ik}``.
"""

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numpy.typing import NDArray

from ..core.exceptions import InvalidTorsionError
from .linalg import ComplexArray, check_unitary


@dataclass(frozen=True, eq=False)
class TorsionTensor:
    """Chern torsion components T^j_{ik}, antisymmetric in (i, k)."""

    data: ComplexArray

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.complex128, copy=True)
        if arr.ndim != 3 or len(set(arr.shape)) != 1 or arr.shape[0] < 1:
            raise InvalidTorsionError(f"expected an n x n x n array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidTorsionError("non-finite component")
        if not np.array_equal(arr, -arr.transpose(0, 2, 1)):
            raise InvalidTorsionError("components are not antisymmetric in the lower pair")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return int(self.data.shape[0])

    @classmethod
    def antisymmetrized(cls, raw: ComplexArray) -> "TorsionTensor":
        """Build from an arbitrary array by taking its part antisymmetric in (i, k)."""
        arr = np.asarray(raw, dtype=np.complex128)
        return cls(0.5 * (arr - arr.transpose(0, 2, 1)))

    @classmethod
    def zero(cls, n: int) -> "TorsionTensor":
        return cls(np.zeros((n, n, n), dtype=np.complex128))

    def component(self, j: int, i: int, k: int) -> complex:
        """1-based accessor T^j_{ik}."""
        return complex(self.data[j - 1, i - 1, k - 1])

    def entries(self) -> list[tuple[int, int, int, complex]]:
        """Nonzero independent components (j, i, k, value) with i < k, 1-based, lexicographic."""
        out = []
        n = self.n
        for j in range(n):
            for i in range(n):
                for k in range(i + 1, n):
                    v = self.data[j, i, k]
                    if v != 0:
                        out.append((j + 1, i + 1, k + 1, complex(v)))
        return out

    def max_difference(self, other: "TorsionTensor") -> float:
        return float(np.max(np.abs(self.data - other.data)))


@dataclass(frozen=True, eq=False)
class DerivedTensors:
    """eta, lambda, X_eta, A, B, phi and |T|^2 of a torsion tensor."""

    eta: ComplexArray
    lam: float
    X_eta: ComplexArray
    A: ComplexArray
    B: ComplexArray
    phi: ComplexArray
    normT2: float


@dataclass(frozen=True, eq=False)
class PointwiseForms:
    """Coefficient arrays of gamma, theta_2 and the Bismut torsion at one point.

    ``gamma_prime[i, j, k]`` is the coefficient of phi_k and ``gamma_second[i, j, k]`` the
    coefficient of conj(phi_k) in gamma_{ij}; ``theta2[i, j, k]`` is the coefficient of
    phi_k in (theta_2)_{ij}; ``tb_holomorphic[i, j, k]`` is the e_k component of
    T^b(e_i, e_j) and ``tb_mixed_holomorphic``/``tb_mixed_antiholomorphic`` are the e_k and
    conj(e_k) components of T^b(e_i, conj(e_j)).
    """

    gamma_prime: ComplexArray
    gamma_second: ComplexArray
    theta2: ComplexArray
    tb_holomorphic: ComplexArray
    tb_mixed_holomorphic: ComplexArray
    tb_mixed_antiholomorphic: ComplexArray


def build_torsion(n: int, entries: Iterable[tuple[int, int, int, complex]]) -> TorsionTensor:
    """Antisymmetric completion of sparse 1-based entries (j, i, k, value)."""
    if n < 1:
        raise InvalidTorsionError(f"dimension must be at least 1, got {n}")
    data = np.zeros((n, n, n), dtype=np.complex128)
    seen: set[tuple[int, int, int]] = set()
    for j, i, k, value in entries:
        if not all(1 <= idx <= n for idx in (j, i, k)):
            raise InvalidTorsionError(f"index out of range 1..{n}", entry=[j, i, k])
        v = complex(value)
        if i == k:
            if v != 0:
                raise InvalidTorsionError("diagonal lower pair with nonzero value", entry=[j, i, k])
            continue
        slot = (j, min(i, k), max(i, k))
        if slot in seen:
            raise InvalidTorsionError("duplicate or conflicting entry", entry=[j, i, k])
        seen.add(slot)
        data[j - 1, i - 1, k - 1] = v
        data[j - 1, k - 1, i - 1] = -v
    return TorsionTensor(data)


def gauduchon_eta(t: ComplexArray) -> ComplexArray:
    """eta_k = sum_i T^i_{ik}."""
    return np.einsum("iik->k", t)


def derived_tensors(torsion: TorsionTensor) -> DerivedTensors:
    """eta, lambda, X_eta, A, B, phi and |T|^2 (sum over all index triples)."""
    t = torsion.data
    tc = t.conj()
    eta = gauduchon_eta(t)
    a = np.einsum("qik,qjk->ij", t, tc)
    b = np.einsum("jqk,iqk->ij", t, tc)
    phi = np.einsum("jiq,q->ij", t, eta.conj())
    return DerivedTensors(
        eta=eta,
        lam=float(np.linalg.norm(eta)),
        X_eta=eta.conj(),
        A=a,
        B=b,
        phi=phi,
        normT2=float(np.sum(np.abs(t) ** 2)),
    )


def transform_frame(torsion: TorsionTensor, u: ComplexArray, tol: float = 1e-9) -> TorsionTensor:
    """Components under the frame e'_a = sum_i U_ai e_i."""
    m = check_unitary(u, tol)
    if m.shape[0] != torsion.n:
        raise InvalidTorsionError(f"frame change of size {m.shape[0]} for dimension {torsion.n}")
    raw = np.einsum("ai,bk,cj,jik->cab", m, m, m.conj(), torsion.data)
    return TorsionTensor.antisymmetrized(raw)


def endomorphism_P(t: ComplexArray, x: ComplexArray) -> ComplexArray:
    """Matrix of P_X, (P_X)_i^j = sum_k T^j_{ik} X_k."""
    return np.einsum("jik,k->ij", t, x)


def associated_forms(torsion: TorsionTensor) -> PointwiseForms:
    """gamma, theta_2 and Bismut torsion components in terms of T."""
    t = torsion.data
    tc = t.conj()
    return PointwiseForms(
        gamma_prime=np.einsum("jik->ijk", t),
        gamma_second=-tc,
        theta2=np.einsum("kij->ijk", tc),
        tb_holomorphic=-2.0 * np.einsum("kij->ijk", t),
        tb_mixed_holomorphic=-2.0 * tc,
        tb_mixed_antiholomorphic=2.0 * np.einsum("jik->ijk", t),
    )


def hermitian_eigenvalues(m: ComplexArray) -> NDArray[np.float64]:
    """Ascending eigenvalues of the Hermitian part of ``m``."""
    return np.linalg.eigvalsh(0.5 * (m + m.conj().T))
