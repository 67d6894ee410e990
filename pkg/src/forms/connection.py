"""Connections, curvature and Hermitian frames over a FormModel."""

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import sympy

from ..core.exceptions import ConstructionSpecError, FormEngineError
from ..core.logging import get_logger
from ..geometry.tensor import TorsionTensor
from .engine import Form, FormModel, GeneratorSet, Scalar, conjugate_scalar, normalize_scalar, wedge

logger = get_logger(__name__)

FormMatrix = list[list[Form]]

SQRT2 = sympy.sqrt(2)


def _check_square(theta: Sequence[Sequence[Form]]) -> int:
    n = len(theta)
    if any(len(row) != n for row in theta):
        raise FormEngineError("connection matrix is not square")
    return n


def matrix_product(a: FormMatrix, b: FormMatrix) -> FormMatrix:
    """Entrywise wedge product of two matrices of forms."""
    n = len(a)
    basis = a[0][0].basis
    out = []
    for i in range(n):
        row = []
        for j in range(len(b[0])):
            entry = Form.zero(basis)
            for k in range(len(b)):
                entry = entry + wedge(a[i][k], b[k][j])
            row.append(entry)
        out.append(row)
    return out


def connection_curvature(model: FormModel, theta: FormMatrix) -> FormMatrix:
    """Theta_ij = d theta_ij - sum_k theta_ik ^ theta_kj."""
    n = _check_square(theta)
    if n == 0:
        return []
    square = matrix_product(theta, theta)
    return [[model.d(theta[i][j]) - square[i][j] for j in range(n)] for i in range(n)]


@dataclass(frozen=True)
class BklConditionResult:
    holds: bool
    residuals: list[Form]


def bkl_condition(coframe: Sequence[Form], theta_b: FormMatrix) -> BklConditionResult:
    """Residuals sum_i phi_i ^ Theta^b_ij, one per column j."""
    n = _check_square(theta_b)
    if len(coframe) != n:
        raise FormEngineError(f"coframe of length {len(coframe)} for a {n} x {n} curvature")
    residuals = []
    for j in range(n):
        entry = Form.zero(coframe[0].basis)
        for i in range(n):
            entry = entry + wedge(coframe[i], theta_b[i][j])
        residuals.append(entry)
    return BklConditionResult(holds=all(r.is_zero for r in residuals), residuals=residuals)


def bismut_ricci(theta_b: FormMatrix) -> Form:
    """Trace of the curvature matrix."""
    n = _check_square(theta_b)
    trace = Form.zero(theta_b[0][0].basis)
    for i in range(n):
        trace = trace + theta_b[i][i]
    return trace


@dataclass(frozen=True)
class CytResult:
    """Diagonal curvature coefficients and whether a vanishing trace forces each of them to vanish."""

    implies_flat: bool
    trace: Form
    coefficients: list[Scalar]
    trace_vanishing_conditions: list[Scalar]


def cyt_implies_flat(coframe: Sequence[Form], theta_b: FormMatrix) -> CytResult:
    """Check the diagonal normal form Theta^b_ii = k_i phi_i ^ conj(phi_i) and decide the trace identity.

    A zero trace forces every k_i to vanish exactly when the 2-forms phi_i ^ conj(phi_i) are
    linearly independent.

    Raises:
        FormEngineError: If the curvature is not in that normal form.
    """
    n = _check_square(theta_b)
    for i in range(n):
        for j in range(n):
            if i != j and not theta_b[i][j].is_zero:
                raise FormEngineError(f"curvature entry ({i + 1}, {j + 1}) is off-diagonal and nonzero")

    pairs = [wedge(coframe[i], coframe[i].conjugate()) for i in range(n)]
    coefficients: list[Scalar] = []
    for i, (entry, pair) in enumerate(zip((theta_b[k][k] for k in range(n)), pairs)):
        if pair.is_zero:
            raise FormEngineError(f"phi_{i + 1} ^ conj(phi_{i + 1}) vanishes")
        monomial, unit = next(iter(pair.terms.items()))
        kappa = normalize_scalar(entry.terms.get(monomial, 0) / unit)
        if not (entry - pair * kappa).is_zero:
            raise FormEngineError(f"diagonal entry {i + 1} is not a multiple of phi_{i + 1} ^ conj(phi_{i + 1})")
        coefficients.append(kappa)

    monomials = sorted({m for pair in pairs for m in pair.terms})
    matrix = sympy.Matrix([[pair.terms.get(m, 0) for m in monomials] for pair in pairs])
    independent = matrix.rank() == n
    trace = bismut_ricci(theta_b)
    conditions = [c for c in coefficients if c != 0]
    logger.debug("Trace identity evaluated", n=n, independent=independent, nonzero=len(conditions))
    return CytResult(
        implies_flat=bool(independent),
        trace=trace,
        coefficients=coefficients,
        trace_vanishing_conditions=conditions,
    )


def type_decomposition(form: Form) -> dict[tuple[int, int], Form]:
    """Split a form into (p, q) parts by the generator tags.

    Raises:
        FormEngineError: If a monomial contains an untyped generator.
    """
    parts: dict[tuple[int, int], dict] = {}
    for monomial, coefficient in form.terms.items():
        p = q = 0
        for position in monomial:
            tag = form.basis[position].ptype
            if tag is None:
                raise FormEngineError(f"generator {form.basis[position].name} has no (p,q) type")
            p += tag[0]
            q += tag[1]
        parts.setdefault((p, q), {})[monomial] = coefficient
    return {key: Form(form.basis, terms) for key, terms in sorted(parts.items())}


def zero_two_part(form: Form) -> Form:
    """(0,2) part of a 2-form; monomials with a (1,0) factor are skipped even when other factors are untyped."""
    terms = {}
    for monomial, coefficient in form.terms.items():
        tags = [form.basis[p].ptype for p in monomial]
        if any(tag is not None and tag[0] > 0 for tag in tags):
            continue
        if any(tag is None for tag in tags):
            names = [form.basis[p].name for p in monomial]
            raise FormEngineError(f"cannot decide the type of monomial {'^'.join(names)}")
        terms[monomial] = coefficient
    return Form(form.basis, terms)


def to_exact(value: complex | float, tol: float = 1e-12, max_denominator: int = 10**6) -> Scalar:
    """Recognise a floating constant as an element of Q(i, sqrt 2).

    Raises:
        ConstructionSpecError: If no such element lies within ``tol``.
    """
    z = complex(value)
    parts = []
    for x in (z.real, z.imag):
        guess = sympy.nsimplify(x, [SQRT2], tolerance=tol, rational=False)
        bad = guess.has(sympy.Float) or any(r.q > max_denominator for r in guess.atoms(sympy.Rational))
        if bad or guess.free_symbols or abs(complex(sympy.N(guess)) - x) > tol:
            raise ConstructionSpecError(f"constant {x!r} is not recognised in Q(i, sqrt 2)", value=[z.real, z.imag])
        parts.append(guess)
    return normalize_scalar(parts[0] + sympy.I * parts[1])


def exact_matrix(values, tol: float = 1e-12) -> sympy.Matrix:
    arr = np.asarray(values)
    return sympy.Matrix(arr.shape[0], arr.shape[1], lambda i, j: to_exact(arr[i, j], tol))


@dataclass(frozen=True)
class ExactTorsion:
    """Exact torsion components, stored for i < k with ``T^j_ki = -T^j_ik`` implied (0-based)."""

    n: int
    components: Mapping[tuple[int, int, int], Scalar] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean = {}
        for (j, i, k), value in self.components.items():
            if i == k:
                raise FormEngineError("torsion component with equal lower indices")
            if i > k:
                j, i, k, value = j, k, i, -value
            clean[(j, i, k)] = normalize_scalar(value)
        object.__setattr__(self, "components", {key: v for key, v in clean.items() if v != 0})

    def component(self, j: int, i: int, k: int) -> Scalar:
        if i == k:
            return sympy.Integer(0)
        if i < k:
            return self.components.get((j, i, k), sympy.Integer(0))
        return -self.components.get((j, k, i), sympy.Integer(0))

    def free_symbols(self) -> set[sympy.Symbol]:
        out: set[sympy.Symbol] = set()
        for value in self.components.values():
            out |= value.free_symbols
        return out

    def to_numeric(self, subs: Mapping | None = None) -> TorsionTensor:
        """Floating tensor after substituting symbol values."""
        data = np.zeros((self.n, self.n, self.n), dtype=np.complex128)
        for (j, i, k), value in self.components.items():
            number = value.subs(subs or {})
            if number.free_symbols:
                raise FormEngineError(f"unassigned symbols {sorted(map(str, number.free_symbols))}")
            v = complex(sympy.N(number, 30))
            data[j, i, k] = v
            data[j, k, i] = -v
        return TorsionTensor(data)


@dataclass(frozen=True)
class FrameCheck:
    structure_holds: bool
    bkl_holds: bool
    integrable: bool
    structure_residual: list[Form]
    bkl_residual: list[Form]
    zero_two_parts: list[Form]


class HermitianFrame:
    """A unitary coframe of a model with its exact torsion and Chern connection.

    ``chern[i][j]`` is theta^c_ij with de_i = sum_j theta^c_ij e_j, so the coframe obeys
    d phi = -theta^c^t ^ phi + tau.
    """

    def __init__(
        self,
        model: FormModel,
        coframe: Sequence[Form],
        torsion: ExactTorsion,
        chern: FormMatrix,
    ):
        n = len(coframe)
        if torsion.n != n:
            raise FormEngineError(f"torsion of dimension {torsion.n} for a coframe of length {n}")
        if _check_square(chern) != n:
            raise FormEngineError("Chern connection does not match the coframe")
        self.model = model
        self.coframe = list(coframe)
        self.conj_coframe = [phi.conjugate() for phi in self.coframe]
        self.torsion = torsion
        self.chern = [list(row) for row in chern]

    @property
    def n(self) -> int:
        return len(self.coframe)

    @property
    def basis(self) -> GeneratorSet:
        return self.model.basis

    def torsion_forms(self) -> list[Form]:
        """tau_j = sum_{i,k} T^j_ik phi_i ^ phi_k."""
        out = []
        for j in range(self.n):
            tau = self.model.zero()
            for (jj, i, k), value in self.torsion.components.items():
                if jj == j:
                    tau = tau + wedge(self.coframe[i], self.coframe[k]) * (2 * value)
            out.append(tau)
        return out

    def gamma(self) -> FormMatrix:
        """gamma_ij = sum_k (T^j_ik phi_k - conj(T^i_jk) conj(phi_k))."""
        n = self.n
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                entry = self.model.zero()
                for k in range(n):
                    t_jik = self.torsion.component(j, i, k)
                    t_ijk = self.torsion.component(i, j, k)
                    if t_jik != 0:
                        entry = entry + self.coframe[k] * t_jik
                    if t_ijk != 0:
                        entry = entry - self.conj_coframe[k] * conjugate_scalar(t_ijk)
                row.append(entry)
            out.append(row)
        return out

    def bismut_connection(self) -> FormMatrix:
        g = self.gamma()
        return [[self.chern[i][j] + g[i][j] * 2 for j in range(self.n)] for i in range(self.n)]

    def structure_residual(self) -> list[Form]:
        """d phi_i + sum_j theta^c_ji ^ phi_j - tau_i."""
        tau = self.torsion_forms()
        out = []
        for i in range(self.n):
            entry = self.model.d(self.coframe[i]) - tau[i]
            for j in range(self.n):
                entry = entry + wedge(self.chern[j][i], self.coframe[j])
            out.append(entry)
        return out

    def bismut_curvature(self) -> FormMatrix:
        return connection_curvature(self.model, self.bismut_connection())

    def integrability_defect(self) -> list[Form]:
        return [zero_two_part(self.model.d(phi)) for phi in self.coframe]

    def check(self) -> FrameCheck:
        """Structure equations, BKL condition and (0,2) defect in one pass."""
        structure = self.structure_residual()
        bkl = bkl_condition(self.coframe, self.bismut_curvature())
        defect = self.integrability_defect()
        result = FrameCheck(
            structure_holds=all(r.is_zero for r in structure),
            bkl_holds=bkl.holds,
            integrable=all(p.is_zero for p in defect),
            structure_residual=structure,
            bkl_residual=bkl.residuals,
            zero_two_parts=defect,
        )
        logger.debug(
            "Hermitian frame checked",
            model=self.model.name,
            structure=result.structure_holds,
            bkl=result.bkl_holds,
            integrable=result.integrable,
        )
        return result
