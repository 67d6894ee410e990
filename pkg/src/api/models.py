"""Report and spec-file models for the command line.

Complex numbers are [re, im] pairs and indices are 1-based.
"""

from typing import Annotated, Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..core.exceptions import ConstructionSpecError
from ..forms.connection import FrameCheck
from ..geometry.bkl_check import BklResidualReport
from ..geometry.frames import FrameReport
from ..services.analyzer import ClassificationReport
from ..services.constructors import ConstructionResult, SasakianProductSpec, TwistedProductSpec
from ..services.solver import SearchResult
from .io import complex_array, torsion_to_dict

Pair = Annotated[List[float], Field(min_length=2, max_length=2)]


def _floats(values: np.ndarray) -> List[float]:
    return [float(x) for x in np.asarray(values).ravel()]


class TorsionFileModel(BaseModel):
    n: int
    entries: List[Dict[str, Any]]


class ResidualReportModel(BaseModel):
    """Admissibility residuals, one per constraint family."""

    main: float
    eta_orth: float
    norm_gap: float
    b_phi_gap: float
    commutation: float
    admissible: bool
    tol: float

    @classmethod
    def from_report(cls, report: BklResidualReport) -> "ResidualReportModel":
        return cls(admissible=report.admissible, tol=report.tol, **report.residuals())


class KernelModel(BaseModel):
    dim: int
    vectors: List[List[Pair]]


class FrameReportModel(BaseModel):
    n: int
    lam: float
    r: int
    s: int
    full: bool
    kahler: bool
    bhat_rank: int
    a: List[Pair]
    b: List[List[Pair]]
    bhat: List[List[Pair]]
    U: List[List[Pair]]
    grouping: List[List[int]]
    kernels: Dict[str, KernelModel]
    min_eig_A: float
    frame_residual: float
    seed: int
    attempts: int
    normalized: TorsionFileModel
    notes: List[str] = Field(default_factory=list)

    @classmethod
    def from_report(cls, report: FrameReport) -> "FrameReportModel":
        return cls(
            n=report.n,
            lam=report.lam,
            r=report.r,
            s=report.s,
            full=report.full,
            kahler=report.kahler,
            bhat_rank=report.bhat_rank,
            a=complex_array(report.a),
            b=complex_array(report.b),
            bhat=complex_array(report.bhat),
            U=complex_array(report.U),
            grouping=report.grouping,
            kernels={
                name: KernelModel(dim=basis.dim, vectors=complex_array(basis.vectors.T))
                for name, basis in report.kernels.items()
            },
            min_eig_A=report.min_eig_A,
            frame_residual=report.frame_residual,
            seed=report.seed,
            attempts=report.attempts,
            normalized=TorsionFileModel(**torsion_to_dict(report.normalized)),
            notes=list(report.notes),
        )


class ClassificationModel(BaseModel):
    n: int
    r: int
    full: bool
    branch: str
    evidence: Dict[str, float]
    rank_bound: Dict[str, Any]
    twisted: Optional[Dict[str, Any]] = None
    dim5: Optional[Dict[str, Any]] = None
    flatness: Optional[Dict[str, Any]] = None
    notes: List[str] = Field(default_factory=list)
    frame: FrameReportModel

    @classmethod
    def from_report(cls, report: ClassificationReport) -> "ClassificationModel":
        twisted = dim5 = flatness = None
        if report.twisted is not None:
            tw = report.twisted
            twisted = {
                "lambdas": _floats(tw.lambdas),
                "D": complex_array(tw.D),
                "column_norms": _floats(tw.column_norms),
                "re_orthogonality": tw.re_orthogonality,
                "reconstruction_gap": tw.reconstruction_gap,
                "b_row_sums": tw.b_row_sums,
            }
        if report.dim5 is not None:
            d5 = report.dim5
            dim5 = {
                "degenerate": d5.degenerate,
                "degeneracy_residual": d5.degeneracy_residual,
                "abik_residual": d5.abik_residual,
                "abi_residual": d5.abi_residual,
                "B": _floats(d5.B),
                "y4": complex_array(d5.y4) if d5.y4 is not None else None,
                "y4_residual": d5.y4_residual,
                "flat_subbranch": None,
            }
            if d5.flat_subbranch is not None:
                fs = d5.flat_subbranch
                dim5["flat_subbranch"] = {
                    "witness": list(fs.witness),
                    "value": fs.value,
                    "column_sum_residual": fs.column_sum_residual,
                    "norm_residual": fs.norm_residual,
                }
        if report.flatness is not None:
            flatness = {
                "isolated_roots": report.flatness.isolated_roots,
                "distinct": report.flatness.distinct,
                "witnesses": [
                    {
                        "index": w.index,
                        "upper": w.upper,
                        "lower": list(w.lower),
                        "value": w.value,
                        "relation_residual": w.relation_residual,
                    }
                    for w in report.flatness.witnesses
                ],
            }
        return cls(
            n=report.n,
            r=report.r,
            full=report.full,
            branch=report.branch,
            evidence=report.evidence,
            rank_bound=report.rank_bound,
            twisted=twisted,
            dim5=dim5,
            flatness=flatness,
            notes=report.notes,
            frame=FrameReportModel.from_report(report.frame),
        )


class ConstructionModel(BaseModel):
    construction: str
    n: int
    torsion: TorsionFileModel
    check: ResidualReportModel
    exact_model: bool
    details: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_result(cls, construction: str, result: ConstructionResult) -> "ConstructionModel":
        details: Dict[str, Any] = {}
        for key, value in result.details.items():
            if isinstance(value, np.ndarray):
                details[key] = complex_array(value) if np.iscomplexobj(value) else value.tolist()
            else:
                details[key] = value
        return cls(
            construction=construction,
            n=result.torsion.n,
            torsion=TorsionFileModel(**torsion_to_dict(result.torsion)),
            check=ResidualReportModel.from_report(result.check),
            exact_model=result.frame is not None,
            details=details,
        )


class ModelCheckModel(BaseModel):
    name: str
    generators: int
    has_frame: bool
    structure_holds: Optional[bool] = None
    bkl_holds: Optional[bool] = None
    integrable: Optional[bool] = None
    failures: List[str] = Field(default_factory=list)

    @classmethod
    def from_check(cls, name: str, generators: int, check: Optional[FrameCheck]) -> "ModelCheckModel":
        if check is None:
            return cls(name=name, generators=generators, has_frame=False)
        failures = [f"structure residual {i + 1}: {r}" for i, r in enumerate(check.structure_residual) if not r.is_zero]
        failures += [f"BKL residual {j + 1}: {r}" for j, r in enumerate(check.bkl_residual) if not r.is_zero]
        failures += [f"(0,2) part of d phi_{i + 1}: {r}" for i, r in enumerate(check.zero_two_parts) if not r.is_zero]
        return cls(
            name=name,
            generators=generators,
            has_frame=True,
            structure_holds=check.structure_holds,
            bkl_holds=check.bkl_holds,
            integrable=check.integrable,
            failures=failures,
        )


class RestartModel(BaseModel):
    restart: int
    iterations: int
    residual: float
    converged: bool


class SearchResultModel(BaseModel):
    best_residual: float
    best_restart: int
    success: bool
    admissible: bool
    rank: int
    full: bool
    branch: Optional[str] = None
    torsion: TorsionFileModel
    x: List[float]
    traces: List[RestartModel]
    notes: List[str] = Field(default_factory=list)

    @classmethod
    def from_result(cls, result: SearchResult) -> "SearchResultModel":
        return cls(
            best_residual=result.best_residual,
            best_restart=result.best_restart,
            success=result.success,
            admissible=result.admissible,
            rank=result.rank,
            full=result.full,
            branch=result.branch,
            torsion=TorsionFileModel(**torsion_to_dict(result.torsion)),
            x=_floats(result.x),
            traces=[
                RestartModel(restart=t.restart, iterations=t.iterations, residual=t.residual, converged=t.converged)
                for t in result.traces
            ],
            notes=result.notes,
        )


class TwistedProductSpecFile(BaseModel):
    """lambdas and D, with D as a matrix of [re, im] pairs."""
    model_config = ConfigDict(extra="forbid")

    lambdas: List[float] = Field(min_length=1)
    D: List[List[Pair]]

    def to_spec(self) -> TwistedProductSpec:
        if any(len(row) != len(self.D) for row in self.D):
            raise ConstructionSpecError("D must be a square matrix")
        d = np.array([[complex(x[0], x[1]) for x in row] for row in self.D], dtype=np.complex128)
        return TwistedProductSpec(lambdas=list(self.lambdas), D=d)


class SasakianProductSpecFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    r: int = Field(ge=1)
    s: int = Field(ge=0)
    c: List[float]
    D: List[List[float]]

    def to_spec(self) -> SasakianProductSpec:
        if any(len(row) != len(self.D) for row in self.D):
            raise ConstructionSpecError("D must be a square matrix")
        return SasakianProductSpec(r=self.r, s=self.s, c=list(self.c), D=np.array(self.D, dtype=np.float64))
