"""Shared example points."""

from pathlib import Path

import numpy as np
import pytest

from src.geometry.tensor import TorsionTensor, build_torsion
from src.services.constructors import (
    SasakianProductSpec,
    TwistedProductSpec,
    sasakian_product,
    twisted_product,
)

FIXTURES = Path(__file__).parent / "fixtures"

E2_D = np.array([[1, 1j], [1j, 1]], dtype=np.complex128)
J4 = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]], dtype=np.float64)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def unit_surface() -> TorsionTensor:
    """n = 2, T^1_{12} = -1."""
    return build_torsion(2, [(1, 1, 2, -1.0)])


@pytest.fixture
def zero_torsion() -> TorsionTensor:
    return TorsionTensor.zero(3)


@pytest.fixture
def e2_spec() -> TwistedProductSpec:
    return TwistedProductSpec(lambdas=[1.0, 1.0], D=E2_D)


@pytest.fixture
def e2(e2_spec) -> TorsionTensor:
    return twisted_product(e2_spec, exact=False).torsion


@pytest.fixture
def e3_spec() -> SasakianProductSpec:
    return SasakianProductSpec(r=3, s=1, c=[1.0, 1.0, 1.0], D=J4)


@pytest.fixture
def e3(e3_spec) -> TorsionTensor:
    return sasakian_product(e3_spec, exact=False).torsion


OMEGA = np.exp(2j * np.pi / 3)
SU3_ROOTS = ((0, 1), (1, 2), (0, 2))


def samelson_torsion(cartan: list[list[complex]], size: int) -> TorsionTensor:
    """Left-invariant point of a compact group inside block-diagonal U(size) with an SU(3) block.

    T^{1,0} is spanned by the diagonal matrices in ``cartan`` and the root vectors E_12, E_23,
    E_13. The frame is unitary for tr(Z W*) and T^j_{ik} = <[e_i, e_k], e_j> / 2.
    """
    basis = [np.diag(np.asarray(d, dtype=np.complex128)) for d in cartan]
    for a, b in SU3_ROOTS:
        root = np.zeros((size, size), dtype=np.complex128)
        root[a, b] = 1.0
        basis.append(root)
    q, _ = np.linalg.qr(np.column_stack([m.ravel() for m in basis]))
    frame = [q[:, c].reshape(size, size) for c in range(q.shape[1])]
    n = len(frame)
    data = np.zeros((n, n, n), dtype=np.complex128)
    for i in range(n):
        for k in range(n):
            bracket = frame[i] @ frame[k] - frame[k] @ frame[i]
            for j in range(n):
                data[j, i, k] = 0.5 * np.vdot(frame[j].ravel(), bracket.ravel())
    return TorsionTensor.antisymmetrized(data)


@pytest.fixture
def su3_point() -> TorsionTensor:
    """n = 4 on SU(3), r = 3."""
    return samelson_torsion([[1, OMEGA, OMEGA**2]], 3)


@pytest.fixture
def su3_torus_point() -> TorsionTensor:
    """n = 5 on SU(3) x T^2 with both Cartan directions reaching the SU(3) block, r = 3 and full."""
    return samelson_torsion([[1, OMEGA, OMEGA**2, 1, 1j], [1, OMEGA**2, OMEGA, -1.5, 1.5j]], 5)
