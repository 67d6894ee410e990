"""Example families of BKL points: pluriclosed twisted products, products of Sasakian 3-manifolds, eta-scalings.

Each constructor returns the floating torsion in its natural unitary frame and, when the
constants are exact, a HermitianFrame whose structure equations reproduce that torsion.

Labeling: twisted products order the surface directions first (phi_1..phi_r) and the twisted
directions after them (psi_1..psi_r); Sasakian products order the contact directions first
(phi_1..phi_r) and the tilde directions after them.
"""

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import sympy
from scipy import linalg

from ..core.exceptions import ConstructionSpecError, EtaScalingPreconditionError
from ..core.logging import get_logger
from ..forms.connection import SQRT2, ExactTorsion, FormMatrix, HermitianFrame, exact_matrix, to_exact
from ..forms.engine import Form, FormModel, Generator, GeneratorSet, conjugate_scalar, real_symbol
from ..geometry.bkl_check import BklResidualReport, is_bkl_admissible
from ..geometry.frames import FrameReport, phi_compatible_frame
from ..geometry.linalg import ComplexArray
from ..geometry.tensor import TorsionTensor

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class TwistedProductSpec:
    """r BKL surfaces with constants lambda_i, twisted by an invertible D (psi_i = sum_j d_ij phi_2^j)."""

    lambdas: Sequence[float]
    D: ComplexArray

    @property
    def r(self) -> int:
        return len(self.lambdas)


@dataclass(frozen=True, eq=False)
class SasakianProductSpec:
    """r Sasakian 3-manifolds with constants c_i times R^s; D acts on the Reeb and flat directions."""

    r: int
    s: int
    c: Sequence[float]
    D: np.ndarray

    @property
    def m(self) -> int:
        return (self.r + self.s) // 2


@dataclass(frozen=True, eq=False)
class EtaScaleSpec:
    """Scale the X_eta direction of an admissible point by t.

    ``frame`` optionally carries an exact frame of the base whose last coframe element is
    dual to X_eta / lambda; the scaled frame is then built as well.
    """

    base: TorsionTensor
    t: float
    frame: HermitianFrame | None = None


@dataclass(eq=False)
class ConstructionResult:
    torsion: TorsionTensor
    check: BklResidualReport
    frame: HermitianFrame | None = None
    substitutions: dict[sympy.Symbol, Any] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)


def _scale(matrix: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0


def re_orthogonality_residual(d: ComplexArray) -> float:
    """max over column pairs j < k of |sum_i (d_ij conj(d_ik) + d_ik conj(d_ij))|."""
    gram = d.T @ d.conj()
    real_part = 2.0 * gram.real
    r = d.shape[1]
    off = [abs(real_part[j, k]) for j in range(r) for k in range(j + 1, r)]
    return float(max(off)) if off else 0.0


def validate_twisted_spec(spec: TwistedProductSpec, tol: float = 1e-12) -> np.ndarray:
    r = spec.r
    if r < 1:
        raise ConstructionSpecError("at least one surface factor is required")
    lambdas = np.asarray(spec.lambdas, dtype=np.complex128)
    if np.any(np.abs(lambdas.imag) > tol) or np.any(lambdas.real <= 0):
        raise ConstructionSpecError("every lambda_i must be a positive real", lambdas=[complex(x).real for x in spec.lambdas])
    d = np.asarray(spec.D, dtype=np.complex128)
    if d.shape != (r, r):
        raise ConstructionSpecError(f"D must be {r} x {r}, got {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ConstructionSpecError("D has non-finite entries")
    scale = _scale(d)
    sigma = linalg.svdvals(d)
    if sigma[-1] <= tol * scale:
        raise ConstructionSpecError("D is singular", smallest_singular_value=float(sigma[-1]))
    residual = re_orthogonality_residual(d)
    if residual > tol * scale**2:
        raise ConstructionSpecError(
            "columns of D are not Re-orthogonal",
            error_type="invalid_construction_spec",
            residual=residual,
        )
    return d


def twisted_torsion(lambdas: Sequence[float], d: ComplexArray) -> TorsionTensor:
    """T^i_{i, r+k} = lambda_i conj(d_ki)."""
    r = len(lambdas)
    data = np.zeros((2 * r, 2 * r, 2 * r), dtype=np.complex128)
    for i in range(r):
        for k in range(r):
            value = float(np.real(lambdas[i])) * np.conj(d[k, i])
            data[i, i, r + k] = value
            data[i, r + k, i] = -value
    return TorsionTensor(data)


def twisted_product_frame(d: sympy.Matrix) -> HermitianFrame:
    """Exact frame of the twisted product for an exact D, with symbolic lambda_i and kappa_i."""
    r = d.shape[0]
    c = d.inv()
    generators = []
    for i in range(1, r + 1):
        generators += [
            Generator(f"phi_{i}", (1, 0), f"phibar_{i}"),
            Generator(f"phibar_{i}", (0, 1), f"phi_{i}"),
        ]
    for i in range(1, r + 1):
        generators += [
            Generator(f"psi_{i}", (1, 0), f"psibar_{i}"),
            Generator(f"psibar_{i}", (0, 1), f"psi_{i}"),
        ]
    generators += [Generator(f"theta_{i}", None, f"theta_{i}", -1) for i in range(1, r + 1)]
    basis = GeneratorSet(generators)
    lam = [real_symbol(f"lambda_{i}", positive=True) for i in range(1, r + 1)]
    kappa = [real_symbol(f"kappa_{i}") for i in range(1, r + 1)]

    def g(name: str) -> Form:
        return Form.generator(basis, name)

    phi = [g(f"phi_{i}") for i in range(1, r + 1)]
    phibar = [g(f"phibar_{i}") for i in range(1, r + 1)]
    psi = [g(f"psi_{i}") for i in range(1, r + 1)]
    psibar = [g(f"psibar_{i}") for i in range(1, r + 1)]
    theta = [g(f"theta_{i}") for i in range(1, r + 1)]

    def twist(i: int) -> Form:
        out = Form.zero(basis)
        for j in range(r):
            out = out + psi[j] * c[i, j] - psibar[j] * conjugate_scalar(c[i, j])
        return out

    derivatives: dict[str, Form] = {}
    for i in range(r):
        derivatives[f"phi_{i + 1}"] = (-theta[i] + twist(i) * (2 * lam[i])) ^ phi[i]
        dpsi = Form.zero(basis)
        for j in range(r):
            dpsi = dpsi + (phi[j] ^ phibar[j]) * (-2 * d[i, j] * lam[j])
        derivatives[f"psi_{i + 1}"] = dpsi
        derivatives[f"theta_{i + 1}"] = (phi[i] ^ phibar[i]) * kappa[i]

    symbols = {str(s): s for s in lam + kappa}
    model = FormModel(f"twisted_product_r{r}", basis, derivatives, symbols)

    n = 2 * r
    zero = Form.zero(basis)
    chern: FormMatrix = [[zero for _ in range(n)] for _ in range(n)]
    components = {}
    for i in range(r):
        chern[i][i] = theta[i] - twist(i) * (2 * lam[i])
        for j in range(r):
            chern[i][r + j] = phibar[i] * (-2 * d[j, i] * lam[i])
            chern[r + j][i] = phi[i] * (2 * conjugate_scalar(d[j, i]) * lam[i])
        for k in range(r):
            components[(i, i, r + k)] = lam[i] * conjugate_scalar(d[k, i])
    return HermitianFrame(model, phi + psi, ExactTorsion(n, components), chern)


def twisted_curvature_coefficients(d: sympy.Matrix) -> list[sympy.Expr]:
    """kappa_i - 8 lambda_i^2 (sum_k |d_ki|^2 - 1), the diagonal of Theta^b over the surface block."""
    r = d.shape[0]
    out = []
    for i in range(r):
        lam = real_symbol(f"lambda_{i + 1}", positive=True)
        kappa = real_symbol(f"kappa_{i + 1}")
        column = sum(d[k, i] * conjugate_scalar(d[k, i]) for k in range(r))
        out.append(sympy.expand(kappa - 8 * lam**2 * (column - 1)))
    return out


def twisted_product(spec: TwistedProductSpec, tol: float = 1e-12, exact: bool = True) -> ConstructionResult:
    """Torsion and (when D is exact) the Hermitian frame of a pluriclosed twisted product.

    Raises:
        ConstructionSpecError: If lambda_i <= 0, D is singular or its columns are not Re-orthogonal.
    """
    d = validate_twisted_spec(spec, tol)
    lambdas = [float(np.real(x)) for x in spec.lambdas]
    torsion = twisted_torsion(lambdas, d)
    check = is_bkl_admissible(torsion, tol=max(tol, 1e-12) * 1e3 * _scale(d) ** 2)
    result = ConstructionResult(torsion=torsion, check=check, details={"r": spec.r, "n": 2 * spec.r})
    if exact:
        try:
            frame = twisted_product_frame(exact_matrix(d, tol))
        except ConstructionSpecError as e:
            logger.warning("Exact model skipped", construction="twisted_product", reason=e.message)
        else:
            result.frame = frame
            result.substitutions = {
                real_symbol(f"lambda_{i + 1}", positive=True): value for i, value in enumerate(lambdas)
            }
    logger.debug("Twisted product built", r=spec.r, admissible=check.admissible, exact=result.frame is not None)
    return result


def _canonical_j(m: int) -> np.ndarray:
    eye = np.eye(m)
    zero = np.zeros((m, m))
    return np.block([[zero, eye], [-eye, zero]])


def validate_skew_orthogonal(d: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    mat = np.asarray(d)
    if np.iscomplexobj(mat):
        if np.max(np.abs(mat.imag), initial=0.0) > tol:
            raise ConstructionSpecError("D must be real")
        mat = mat.real
    mat = mat.astype(np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConstructionSpecError(f"D must be square, got shape {mat.shape}")
    if mat.shape[0] % 2:
        raise ConstructionSpecError("D must have even size", size=int(mat.shape[0]))
    skew = float(np.max(np.abs(mat + mat.T), initial=0.0))
    if skew > tol:
        raise ConstructionSpecError("D is not skew-symmetric", deviation=skew)
    ortho = float(np.max(np.abs(mat.T @ mat - np.eye(mat.shape[0])), initial=0.0))
    if ortho > tol:
        raise ConstructionSpecError("D is not orthogonal", deviation=ortho)
    return mat


def skew_orthogonal_canonical_form(d: np.ndarray, tol: float = 1e-12, allow_reflection: bool = False) -> np.ndarray:
    """P with P^-1 D P = [[0, I_m], [-I_m, 0]].

    The 2 x 2 blocks of the real Schur form of D supply the column pairs (p_a, p_{m+a}) with
    D p_a = -p_{m+a} and D p_{m+a} = p_a. det P is the ratio of the Pfaffians of J and D, so an
    orientation-reversed D has no solution in SO(2m); such a P is returned only with
    ``allow_reflection``.

    Raises:
        ConstructionSpecError: If D is not skew orthogonal, or P would need det -1.
    """
    mat = validate_skew_orthogonal(d, tol)
    size = mat.shape[0]
    m = size // 2
    j = _canonical_j(m)
    if size == 0 or np.max(np.abs(mat - j)) <= tol:
        return np.eye(size)

    t, z = linalg.schur(mat, output="real")
    p = np.zeros((size, size))
    for a in range(m):
        z1, z2 = z[:, 2 * a], z[:, 2 * a + 1]
        if t[2 * a, 2 * a + 1] > 0:
            p[:, a], p[:, m + a] = z1, z2
        else:
            p[:, a], p[:, m + a] = z2, z1

    deviation = float(np.max(np.abs(p.T @ mat @ p - j)))
    if deviation > 1e3 * tol * size:
        raise ConstructionSpecError("canonical form did not converge", deviation=deviation)
    if np.linalg.det(p) < 0 and not allow_reflection:
        raise ConstructionSpecError(
            "D has the opposite orientation to J; no P in SO(2m) exists",
            pfaffian_sign=-1,
        )
    return p


def sasakian_weights(p: np.ndarray, r: int) -> np.ndarray:
    """w[alpha, i] = q_{alpha i} - i q_{alpha* i} with Q = P^t, for the first r columns."""
    q = p.T
    m = q.shape[0] // 2
    return q[:m, :r] - 1j * q[m:, :r]


def sasakian_torsion(c: Sequence[float], w: np.ndarray) -> TorsionTensor:
    """T^i_{i, r+alpha} = (c_i sqrt(-1) / sqrt 2) w_{alpha i}."""
    r = len(c)
    m = w.shape[0]
    n = r + m
    data = np.zeros((n, n, n), dtype=np.complex128)
    for i in range(r):
        for alpha in range(m):
            value = c[i] * 1j / np.sqrt(2.0) * w[alpha, i]
            data[i, i, r + alpha] = value
            data[i, r + alpha, i] = -value
    return TorsionTensor(data)


def sasakian_product_frame(p: sympy.Matrix, r: int) -> HermitianFrame:
    """Exact frame of the Sasakian product for an exact orthogonal P, with symbolic c_i and kappa_i."""
    size = p.shape[0]
    m = size // 2
    q = p.T
    w = [[q[a, i] - sympy.I * q[a + m, i] for i in range(r)] for a in range(m)]

    generators = []
    for i in range(1, r + 1):
        generators += [
            Generator(f"phi_{i}", (1, 0), f"phibar_{i}"),
            Generator(f"phibar_{i}", (0, 1), f"phi_{i}"),
        ]
    for a in range(1, m + 1):
        generators += [
            Generator(f"tphi_{a}", (1, 0), f"tphibar_{a}"),
            Generator(f"tphibar_{a}", (0, 1), f"tphi_{a}"),
        ]
    generators += [Generator(f"alpha_{i}", None, f"alpha_{i}", -1) for i in range(1, r + 1)]
    basis = GeneratorSet(generators)
    cs = [real_symbol(f"c_{i}", positive=True) for i in range(1, r + 1)]
    kappa = [real_symbol(f"kappa_{i}") for i in range(1, r + 1)]

    def g(name: str) -> Form:
        return Form.generator(basis, name)

    phi = [g(f"phi_{i}") for i in range(1, r + 1)]
    phibar = [g(f"phibar_{i}") for i in range(1, r + 1)]
    tphi = [g(f"tphi_{a}") for a in range(1, m + 1)]
    tphibar = [g(f"tphibar_{a}") for a in range(1, m + 1)]
    alpha = [g(f"alpha_{i}") for i in range(1, r + 1)]

    def reeb(i: int) -> Form:
        out = Form.zero(basis)
        for a in range(m):
            out = out + tphi[a] * (w[a][i] / SQRT2) + tphibar[a] * (conjugate_scalar(w[a][i]) / SQRT2)
        return out

    derivatives: dict[str, Form] = {}
    for i in range(r):
        derivatives[f"phi_{i + 1}"] = (alpha[i] + reeb(i) * (sympy.I * cs[i])) ^ phi[i]
        derivatives[f"alpha_{i + 1}"] = (phi[i] ^ phibar[i]) * kappa[i]
    for a in range(m):
        dt = Form.zero(basis)
        for i in range(r):
            dt = dt + (phi[i] ^ phibar[i]) * (sympy.I * SQRT2 * cs[i] * conjugate_scalar(w[a][i]))
        derivatives[f"tphi_{a + 1}"] = dt

    symbols = {str(s): s for s in cs + kappa}
    model = FormModel(f"sasakian_product_r{r}_m{m}", basis, derivatives, symbols)

    n = r + m
    zero = Form.zero(basis)
    chern: FormMatrix = [[zero for _ in range(n)] for _ in range(n)]
    components = {}
    for i in range(r):
        chern[i][i] = -alpha[i] - reeb(i) * (sympy.I * cs[i])
        for a in range(m):
            chern[i][r + a] = phibar[i] * (sympy.I * SQRT2 * cs[i] * conjugate_scalar(w[a][i]))
            chern[r + a][i] = phi[i] * (sympy.I * SQRT2 * cs[i] * w[a][i])
            components[(i, i, r + a)] = cs[i] * sympy.I / SQRT2 * w[a][i]
    return HermitianFrame(model, phi + tphi, ExactTorsion(n, components), chern)


def sasakian_curvature_coefficients(r: int) -> list[sympy.Expr]:
    """-(kappa_j + 2 c_j^2), the diagonal of Theta^b over the contact block."""
    return [
        -(real_symbol(f"kappa_{j}") + 2 * real_symbol(f"c_{j}", positive=True) ** 2)
        for j in range(1, r + 1)
    ]


def sasakian_product(spec: SasakianProductSpec, tol: float = 1e-12, exact: bool = True) -> ConstructionResult:
    """Torsion and (when P is exact) the Hermitian frame of a multiple product of Sasakian 3-manifolds.

    Raises:
        ConstructionSpecError: If r + s is odd, some c_j <= 0, or D is not skew orthogonal.
    """
    if spec.r < 1 or spec.s < 0:
        raise ConstructionSpecError("need r >= 1 and s >= 0", r=spec.r, s=spec.s)
    if (spec.r + spec.s) % 2:
        raise ConstructionSpecError("r + s must be even", r=spec.r, s=spec.s)
    if len(spec.c) != spec.r or any(not float(x) > 0 for x in spec.c):
        raise ConstructionSpecError("need r positive constants c_j", c=[float(x) for x in spec.c])
    mat = validate_skew_orthogonal(spec.D, tol)
    if mat.shape[0] != spec.r + spec.s:
        raise ConstructionSpecError(f"D must have size r + s = {spec.r + spec.s}", size=int(mat.shape[0]))

    p = skew_orthogonal_canonical_form(mat, tol, allow_reflection=True)
    c = [float(x) for x in spec.c]
    torsion = sasakian_torsion(c, sasakian_weights(p, spec.r))
    check = is_bkl_admissible(torsion, tol=1e3 * max(tol, 1e-12) * max(1.0, max(c)) ** 2)
    result = ConstructionResult(
        torsion=torsion,
        check=check,
        details={
            "r": spec.r,
            "s": spec.s,
            "n": spec.r + spec.m,
            "P": p,
            "det_P": float(np.linalg.det(p)) if p.size else 1.0,
            "full_expected": spec.r >= spec.s,
        },
    )
    if exact:
        try:
            frame = sasakian_product_frame(exact_matrix(p, tol), spec.r)
        except ConstructionSpecError as e:
            logger.warning("Exact model skipped", construction="sasakian_product", reason=e.message)
        else:
            result.frame = frame
            result.substitutions = {
                real_symbol(f"c_{i + 1}", positive=True): value for i, value in enumerate(c)
            }
    logger.debug("Sasakian product built", r=spec.r, s=spec.s, admissible=check.admissible)
    return result


def eta_precondition(report: FrameReport) -> tuple[float, tuple[int, int] | None]:
    """Largest |Re(a_i conj(a_k))| over i < k and the 1-based pair attaining it."""
    worst, pair = 0.0, None
    a = report.a
    for i in range(a.size):
        for k in range(i + 1, a.size):
            value = abs(float(np.real(a[i] * np.conj(a[k]))))
            if pair is None or value > worst:
                worst, pair = value, (i + 1, k + 1)
    return worst, pair


def scale_normalized(normalized: TorsionTensor, t: float) -> TorsionTensor:
    """Multiply every T^j_{in} by t in a normalized frame."""
    data = np.array(normalized.data)
    n = normalized.n
    data[:, :, n - 1] *= t
    data[:, n - 1, :] *= t
    return TorsionTensor(data)


def eta_scaled_frame(frame: HermitianFrame, t) -> HermitianFrame:
    """Frame of the eta-scaling of an exact frame whose last coframe element is dual to X_eta / lambda.

    The Chern connection is theta^b - 2 Gamma, where Gamma is the old gamma with its last row and
    column multiplied by t.
    """
    n = frame.n
    t = sympy.sympify(t)
    coframe = frame.coframe[:-1] + [frame.coframe[-1] * t]
    components = {
        key: (value * t if key[2] == n - 1 else value) for key, value in frame.torsion.components.items()
    }
    gamma = frame.gamma()
    bismut = frame.bismut_connection()
    chern = []
    for i in range(n):
        row = []
        for j in range(n):
            weight = t if (i == n - 1) != (j == n - 1) else 1
            row.append(bismut[i][j] - gamma[i][j] * (2 * weight))
        chern.append(row)
    return HermitianFrame(frame.model, coframe, ExactTorsion(n, components), chern)


def eta_connection_shift(frame: HermitianFrame, t) -> FormMatrix:
    """Exact difference of the Bismut connections after eta-scaling: 2(t^2 - 1)(a_i phi_n - conj(a_i) conj(phi_n)) on the diagonal."""
    n = frame.n
    t = sympy.sympify(t)
    zero = frame.model.zero()
    out = [[zero for _ in range(n)] for _ in range(n)]
    phi_n, phibar_n = frame.coframe[-1], frame.conj_coframe[-1]
    for i in range(n - 1):
        a_i = frame.torsion.component(i, i, n - 1)
        out[i][i] = (phi_n * a_i - phibar_n * conjugate_scalar(a_i)) * (2 * (t**2 - 1))
    return out


def eta_scaling(
    spec: EtaScaleSpec,
    tol: float = 1e-9,
    rank_tol: float = 1e-7,
    seed: int = 0,
    retries: int = 5,
) -> ConstructionResult:
    """eta-scaling of an admissible point, returned in the normalized frame of the base.

    Raises:
        ConstructionSpecError: If t <= 0 or the frame dimension differs from the base.
        EtaScalingPreconditionError: If Re(a_i conj(a_k)) != 0 for some i != k.
        NotAdmissibleError: If the base is not admissible.
    """
    t = float(spec.t)
    if not t > 0:
        raise ConstructionSpecError("t must be positive", t=t)
    if spec.frame is not None and spec.frame.n != spec.base.n:
        raise ConstructionSpecError("model frame dimension differs from the base", n=spec.base.n, frame_n=spec.frame.n)
    report = phi_compatible_frame(spec.base, tol, rank_tol, seed, retries)
    if report.kahler:
        logger.debug("Kähler base, eta-scaling is the identity")
        return ConstructionResult(torsion=spec.base, check=is_bkl_admissible(spec.base, tol, rank_tol),
                                  details={"t": t, "lambda": 0.0, "lambda_scaled": 0.0})

    violation, pair = eta_precondition(report)
    scale = max(1.0, float(np.max(np.abs(report.a))) ** 2)
    if pair is not None and violation > tol * scale:
        raise EtaScalingPreconditionError(violation, pair)

    scaled = scale_normalized(report.normalized, t)
    check = is_bkl_admissible(scaled, tol * max(1.0, t) ** 2, rank_tol)
    result = ConstructionResult(
        torsion=scaled,
        check=check,
        details={"t": t, "lambda": report.lam, "lambda_scaled": t * report.lam, "a": report.a, "U": report.U},
    )
    if spec.frame is not None:
        try:
            t_exact = to_exact(t)
        except ConstructionSpecError as e:
            logger.warning("Exact model skipped", construction="eta_scaling", reason=e.message)
        else:
            result.frame = eta_scaled_frame(spec.frame, t_exact)
    logger.debug("eta-scaling built", t=t, admissible=check.admissible, lam=report.lam)
    return result
