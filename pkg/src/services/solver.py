"""Seeded damped least-squares search for points on the BKL variety with a prescribed B-rank.

Parameters are the independent components T^j_{ik}, i < k, in lexicographic (j, i, k) order,
stored as interleaved real and imaginary parts. Residual blocks, in order:

1. real and imaginary parts of every P_{ijkl};
2. real and imaginary parts of sum_q eta_q T^q_{ik};
3. |T|^2 - 2|eta|^2;
4. real and imaginary parts of B - phi - phi*;
5. with a target rank r: mu_{r+1}(B), max(0, margin - mu_r) and, for full points,
   max(0, margin - min eig A);
6. with an adapted frame: eta_k for k < n and T^j_{in} for i != j < n, both real and imaginary
   parts. These are linear and pin e_n to X_eta with phi diagonal on e_1, ..., e_{n-1}.

Blocks 1-4 are quadratic: each is C(t, t) for a form C linear in its first argument, so the
Jacobian column along a direction delta is C(delta, t) + C(t, delta).
"""

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import linalg

from ..core.config import SolverConfig
from ..core.exceptions import BklError, ConfigurationError, InvalidTorsionError, JacobianCheckError
from ..core.logging import get_logger
from ..geometry.bkl_check import is_bkl_admissible
from ..geometry.linalg import numerical_rank
from ..geometry.tensor import TorsionTensor, derived_tensors, hermitian_eigenvalues
from .analyzer import classify_point
from .workers import WorkerPool

logger = get_logger(__name__)

Triple = tuple[int, int, int]


def parameter_index(n: int) -> list[Triple]:
    """0-based (j, i, k), i < k, in encoding order."""
    return [(j, i, k) for j in range(n) for i in range(n) for k in range(i + 1, n)]


def parameter_count(n: int) -> int:
    return n * n * (n - 1)


def encode(torsion: TorsionTensor) -> np.ndarray:
    values = np.array([torsion.data[key] for key in parameter_index(torsion.n)], dtype=np.complex128)
    x = np.empty(2 * values.size)
    x[0::2] = values.real
    x[1::2] = values.imag
    return x


def _basis(n: int) -> np.ndarray:
    """Unit tensors E_p, one per independent component."""
    keys = parameter_index(n)
    e = np.zeros((len(keys), n, n, n))
    for p, (j, i, k) in enumerate(keys):
        e[p, j, i, k] = 1.0
        e[p, j, k, i] = -1.0
    return e


def decode(x: np.ndarray, n: int) -> np.ndarray:
    """Antisymmetric complex array from a parameter vector.

    Raises:
        InvalidTorsionError: If the length is not 2 n^2 (n - 1) / 2.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != parameter_count(n):
        raise InvalidTorsionError(f"parameter vector of length {x.size} for n = {n}", expected=parameter_count(n))
    values = x[0::2] + 1j * x[1::2]
    return np.einsum("p,pjik->jik", values, _basis(n))


def isolated_root_clamp(n: int, i: int) -> list[Triple]:
    """1-based components T^i_{jk} and T^j_{ik} (j, k < n) that vanish when a_i is an isolated root."""
    if not 1 <= i < n:
        raise ConfigurationError(f"isolated root index must lie in 1..{n - 1}, got {i}")
    out: set[Triple] = set()
    for j in range(1, n):
        for k in range(1, n):
            if j < k:
                out.add((i, j, k))
            if k != i:
                out.add((j, min(i, k), max(i, k)))
    return sorted(out)


def _eta(t: np.ndarray) -> np.ndarray:
    return np.einsum("...iik->...k", t)


def _pairing(t: np.ndarray, u: np.ndarray) -> dict[str, np.ndarray]:
    """The quadratic blocks as a form C(t, u), batched over a leading axis."""
    uc = u.conj()
    eta_t, eta_u = _eta(t), _eta(u)
    bkl = (
        np.einsum("pqik,pqjl->pijkl", t, uc)
        + np.einsum("pjiq,pklq->pijkl", t, uc)
        + np.einsum("plkq,pijq->pijkl", t, uc)
        - np.einsum("pliq,pkjq->pijkl", t, uc)
        - np.einsum("pjkq,pilq->pijkl", t, uc)
    )
    eta_orth = np.einsum("pq,pqik->pik", eta_t, u)
    norm_gap = np.einsum("pjik,pjik->p", t, uc) - 2.0 * np.einsum("pk,pk->p", eta_t, eta_u.conj())
    b = np.einsum("pjqk,piqk->pij", t, uc)
    phi = np.einsum("pjiq,pq->pij", t, eta_u.conj())
    phi_star = np.einsum("pijq,pq->pij", uc, eta_t)
    batch = t.shape[0]
    return {
        "bkl": bkl.reshape(batch, -1),
        "eta_orth": eta_orth.reshape(batch, -1),
        "norm_gap": norm_gap,
        "b": b,
        "b_phi": (b - phi - phi_star).reshape(batch, -1),
    }


def _stack(blocks: dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate(
        [
            blocks["bkl"].real,
            blocks["bkl"].imag,
            blocks["eta_orth"].real,
            blocks["eta_orth"].imag,
            blocks["norm_gap"].real[:, None],
            blocks["b_phi"].real,
            blocks["b_phi"].imag,
        ],
        axis=1,
    )


def _cluster_derivative(values: np.ndarray, vectors: np.ndarray, index: int, d_matrix: np.ndarray, tol: float) -> np.ndarray:
    """Derivative of the index-th eigenvalue, averaged over the cluster it belongs to."""
    scale = max(1.0, float(np.max(np.abs(values))))
    members = np.flatnonzero(np.abs(values - values[index]) <= tol * scale)
    v = vectors[:, members]
    return np.real(np.einsum("ia,pij,ja->p", v.conj(), d_matrix, v)) / members.size


@dataclass
class ResidualModel:
    """Residual map and its Jacobian for one (n, target rank, fullness, clamp) choice."""

    n: int
    target_rank: int | None = None
    full: bool = False
    margin: float = 1e-2
    clamped: Sequence[Triple] = ()
    cluster_tol: float = 1e-9
    adapted: bool = False

    def __post_init__(self) -> None:
        keys = {key: p for p, key in enumerate(parameter_index(self.n))}
        mask = np.ones(parameter_count(self.n), dtype=bool)
        for j, i, k in self.clamped:
            lo, hi = min(i, k), max(i, k)
            key = (j - 1, lo - 1, hi - 1)
            if key not in keys or i == k:
                raise ConfigurationError(f"clamped component {(j, i, k)} is not an independent entry for n = {self.n}")
            mask[2 * keys[key]] = mask[2 * keys[key] + 1] = False
        self.free = mask
        self._basis = _basis(self.n)
        self._frame_rows = self._frame_constraints() if self.adapted else np.zeros((0, 2 * len(keys)))

    @property
    def size(self) -> int:
        return parameter_count(self.n)

    def project(self, x: np.ndarray) -> np.ndarray:
        out = np.array(x, dtype=np.float64)
        out[~self.free] = 0.0
        return out

    def tensor(self, x: np.ndarray) -> np.ndarray:
        return decode(self.project(x), self.n)

    def _frame_constraints(self) -> np.ndarray:
        """Rows of the linear adapted-frame block, acting on the interleaved parameter vector."""
        n = self.n
        e = self._basis.astype(np.complex128)
        off_diagonal = ~np.eye(n - 1, dtype=bool)
        values = np.concatenate([_eta(e)[:, : n - 1], e[:, : n - 1, : n - 1, n - 1][:, off_diagonal]], axis=1)
        m = values.shape[1]
        rows = np.empty((2 * m, 2 * values.shape[0]))
        rows[:m, 0::2], rows[m:, 0::2] = values.real.T, values.imag.T
        rows[:m, 1::2], rows[m:, 1::2] = -values.imag.T, values.real.T
        return rows

    def _penalties(self, t: np.ndarray) -> list[float]:
        if self.target_rank is None:
            return []
        r = self.target_rank
        mu = np.linalg.eigvalsh(np.einsum("jqk,iqk->ij", t, t.conj()))[::-1]
        out = [float(mu[r]) if r < self.n else 0.0]
        out.append(max(0.0, self.margin - float(mu[r - 1])) if r >= 1 else 0.0)
        if self.full:
            out.append(max(0.0, self.margin - float(hermitian_eigenvalues(np.einsum("qik,qjk->ij", t, t.conj()))[0])))
        return out

    def residual(self, x: np.ndarray) -> np.ndarray:
        t = self.tensor(x)
        quadratic = _stack(_pairing(t[None], t[None]))[0]
        return np.concatenate([quadratic, np.array(self._penalties(t)), self._frame_rows @ self.project(x)])

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        t = self.tensor(x)
        e = self._basis
        count = e.shape[0]
        tt = np.broadcast_to(t, e.shape)
        left = _pairing(e.astype(np.complex128), tt)
        right_re = _pairing(tt, e.astype(np.complex128))
        right_im = _pairing(tt, 1j * e)

        re_cols = {name: left[name] + right_re[name] for name in left}
        im_cols = {name: 1j * left[name] + right_im[name] for name in left}
        jac = np.empty((self.residual(x).size, 2 * count))
        jac_quadratic_re = _stack(re_cols)
        jac_quadratic_im = _stack(im_cols)
        rows = jac_quadratic_re.shape[1]
        jac[:rows, 0::2] = jac_quadratic_re.T
        jac[:rows, 1::2] = jac_quadratic_im.T

        if self.target_rank is not None:
            penalty = self._penalty_jacobian(t, re_cols["b"], im_cols["b"])
            jac[rows : rows + penalty.shape[0]] = penalty
        jac[jac.shape[0] - self._frame_rows.shape[0] :] = self._frame_rows
        jac[:, ~self.free] = 0.0
        return jac

    def _penalty_jacobian(self, t: np.ndarray, db_re: np.ndarray, db_im: np.ndarray) -> np.ndarray:
        r = self.target_rank
        assert r is not None
        count = db_re.shape[0]
        b_values, b_vectors = np.linalg.eigh(np.einsum("jqk,iqk->ij", t, t.conj()))
        b_values, b_vectors = b_values[::-1], b_vectors[:, ::-1]

        def d_eigen(values, vectors, index, d_re, d_im) -> np.ndarray:
            row = np.empty(2 * count)
            row[0::2] = _cluster_derivative(values, vectors, index, d_re, self.cluster_tol)
            row[1::2] = _cluster_derivative(values, vectors, index, d_im, self.cluster_tol)
            return row

        rows = []
        if r < self.n:
            rows.append(d_eigen(b_values, b_vectors, r, db_re, db_im))
        else:
            rows.append(np.zeros(2 * count))
        if r >= 1 and self.margin - b_values[r - 1] > 0:
            rows.append(-d_eigen(b_values, b_vectors, r - 1, db_re, db_im))
        else:
            rows.append(np.zeros(2 * count))
        if self.full:
            e = self._basis.astype(np.complex128)
            da_re = np.einsum("pqik,qjk->pij", e, t.conj()) + np.einsum("qik,pqjk->pij", t, e.conj())
            da_im = np.einsum("pqik,qjk->pij", 1j * e, t.conj()) + np.einsum("qik,pqjk->pij", t, (1j * e).conj())
            a_values, a_vectors = np.linalg.eigh(np.einsum("qik,qjk->ij", t, t.conj()))
            if self.margin - a_values[0] > 0:
                rows.append(-d_eigen(a_values, a_vectors, 0, da_re, da_im))
            else:
                rows.append(np.zeros(2 * count))
        return np.vstack(rows)

    def check_jacobian(self, x: np.ndarray, step: float = 1e-6, rel_tol: float = 1e-5, strict: bool = False) -> float:
        """Largest |J - J_fd| relative to max(1, |J_fd|_max), J_fd by central differences.

        Raises:
            JacobianCheckError: In strict mode when the error exceeds ``rel_tol``.
        """
        x = self.project(x)
        analytic = self.jacobian(x)
        numeric = np.zeros_like(analytic)
        for c in np.flatnonzero(self.free):
            shift = np.zeros_like(x)
            shift[c] = step
            numeric[:, c] = (self.residual(x + shift) - self.residual(x - shift)) / (2.0 * step)
        error = float(np.max(np.abs(analytic - numeric))) / max(1.0, float(np.max(np.abs(numeric))))
        logger.debug("Jacobian self-check", n=self.n, rel_error=error)
        if strict and error > rel_tol:
            raise JacobianCheckError(error, rel_tol)
        return error


def residual_vector(x: np.ndarray, n: int, target_rank: int | None = None, full: bool = False, margin: float = 1e-2) -> np.ndarray:
    return ResidualModel(n, target_rank, full, margin).residual(x)


def jacobian(x: np.ndarray, n: int, target_rank: int | None = None, full: bool = False, margin: float = 1e-2) -> np.ndarray:
    return ResidualModel(n, target_rank, full, margin).jacobian(x)


@dataclass
class LmOutcome:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool
    damping: float


def levenberg_marquardt(model: ResidualModel, x0: np.ndarray, settings: SolverConfig, max_iters: int, residual_tol: float) -> LmOutcome:
    """Solve (J^t J + mu I) delta = -J^t r, scaling mu down on accepted steps and up on rejected ones."""
    x = model.project(x0)
    r = model.residual(x)
    norm = float(np.linalg.norm(r))
    mu = settings.damping_init
    iterations = 0
    while iterations < max_iters and norm >= residual_tol:
        iterations += 1
        jac = model.jacobian(x)
        normal = jac.T @ jac
        gradient = jac.T @ r
        try:
            delta = linalg.solve(normal + mu * np.eye(normal.shape[0]), -gradient, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            delta = linalg.lstsq(normal + mu * np.eye(normal.shape[0]), -gradient)[0]
        candidate = model.project(x + delta)
        r_new = model.residual(candidate)
        norm_new = float(np.linalg.norm(r_new))
        if norm_new < norm:
            x, r, norm = candidate, r_new, norm_new
            mu = max(mu / settings.damping_decrease, settings.damping_min)
        else:
            if mu >= settings.damping_max:
                break
            mu = min(mu * settings.damping_increase, settings.damping_max)
        if float(np.linalg.norm(delta)) <= 1e-15 * (1.0 + float(np.linalg.norm(x))):
            break
    return LmOutcome(x=x, residual=norm, iterations=iterations, converged=norm < residual_tol, damping=mu)


@dataclass
class SearchConfig:
    """One search: dimension, optional rank target and the solver settings it runs with."""

    n: int
    target_rank: int | None = None
    full: bool = False
    seed: int = 0
    restarts: int = 8
    max_iters: int = 500
    residual_tol: float = 1e-12
    settings: SolverConfig = field(default_factory=SolverConfig)
    initial: TorsionTensor | None = None
    perturbation: float = 1e-2
    clamped: Sequence[Triple] = ()
    adapted: bool = False
    workers: int = 1
    check_tol: float = 1e-9

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ConfigurationError(f"search dimension must be at least 2, got {self.n}")
        if self.target_rank is not None and not 0 <= self.target_rank <= self.n - 1:
            raise ConfigurationError(f"target rank must lie in 0..{self.n - 1}, got {self.target_rank}")
        if self.restarts < 1:
            raise ConfigurationError("restarts must be at least 1")
        if self.initial is not None and self.initial.n != self.n:
            raise ConfigurationError(f"initial point has dimension {self.initial.n}, expected {self.n}")

    @classmethod
    def from_settings(cls, n: int, settings: SolverConfig, **overrides: Any) -> "SearchConfig":
        values: dict[str, Any] = {
            "restarts": settings.restarts,
            "max_iters": settings.max_iters,
            "residual_tol": settings.residual_tol,
            "workers": settings.workers,
        }
        values.update(overrides)
        return cls(n=n, settings=settings, **values)


@dataclass
class RestartTrace:
    restart: int
    iterations: int
    residual: float
    converged: bool
    x: np.ndarray


@dataclass(eq=False)
class SearchResult:
    best_residual: float
    best_restart: int
    x: np.ndarray
    torsion: TorsionTensor
    traces: list[RestartTrace]
    success: bool
    admissible: bool
    rank: int
    full: bool
    branch: str | None = None
    notes: list[str] = field(default_factory=list)


def starting_point(config: SearchConfig, restart: int, model: ResidualModel) -> np.ndarray:
    """Seeded start of one restart, from its own (seed, restart) stream."""
    rng = np.random.default_rng([config.seed, restart])
    if config.initial is not None:
        direction = rng.standard_normal(model.size)
        direction = model.project(direction)
        direction /= max(float(np.linalg.norm(direction)), 1e-300)
        return model.project(encode(config.initial) + config.perturbation * direction)
    return model.project(config.settings.init_scale * rng.standard_normal(model.size))


def run_restart(config: SearchConfig, model: ResidualModel, restart: int) -> RestartTrace:
    outcome = levenberg_marquardt(
        model, starting_point(config, restart, model), config.settings, config.max_iters, config.residual_tol
    )
    logger.debug(
        "Restart finished",
        restart=restart,
        iterations=outcome.iterations,
        residual=outcome.residual,
        converged=outcome.converged,
    )
    return RestartTrace(restart, outcome.iterations, outcome.residual, outcome.converged, outcome.x)


def search(config: SearchConfig) -> SearchResult:
    """Run every restart, keep the smallest residual (lowest restart index on ties), then check it independently."""
    model = ResidualModel(
        config.n, config.target_rank, config.full, config.settings.rank_margin, config.clamped, adapted=config.adapted
    )
    if config.settings.strict_jacobian:
        start = starting_point(config, 0, model)
        model.check_jacobian(start, config.settings.fd_step, config.settings.fd_rel_tol, strict=True)

    if config.workers > 1:
        with WorkerPool(config.workers) as pool:
            traces = pool.map(lambda restart: run_restart(config, model, restart), range(config.restarts))
    else:
        traces = [run_restart(config, model, restart) for restart in range(config.restarts)]
    traces.sort(key=lambda trace: trace.restart)

    best = min(traces, key=lambda trace: (trace.residual, trace.restart))
    torsion = TorsionTensor(model.tensor(best.x))
    check = is_bkl_admissible(torsion, config.check_tol)
    derived = derived_tensors(torsion)
    result = SearchResult(
        best_residual=best.residual,
        best_restart=best.restart,
        x=best.x,
        torsion=torsion,
        traces=traces,
        success=best.residual < config.residual_tol,
        admissible=check.admissible,
        rank=numerical_rank(derived.B),
        full=float(hermitian_eigenvalues(derived.A)[0]) > config.check_tol,
    )
    if check.admissible:
        try:
            report = classify_point(torsion, config.check_tol)
        except BklError as e:
            result.notes.append(f"classification failed: {e.message}")
        else:
            result.rank, result.full, result.branch = report.r, report.full, report.branch
        result.notes.append("admissible at this point only; existence of a BKL metric is not implied")
    logger.info(
        "Search finished",
        n=config.n,
        target_rank=config.target_rank,
        restarts=config.restarts,
        best_residual=result.best_residual,
        success=result.success,
        admissible=result.admissible,
    )
    return result
