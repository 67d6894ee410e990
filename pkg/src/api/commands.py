"""One handler per subcommand; each returns (exit code, report)."""

import argparse
from typing import Any, Callable, Dict, Tuple

from pydantic import BaseModel, ValidationError

from ..core.config import AppConfig
from ..core.exceptions import EXIT_FAILED_CHECK, EXIT_OK, ConstructionSpecError
from ..core.logging import get_logger
from ..forms.io import read_model, write_model
from ..geometry.bkl_check import is_bkl_admissible
from ..geometry.frames import phi_compatible_frame
from ..services.analyzer import classify_point
from ..services.constructors import EtaScaleSpec, eta_scaling, sasakian_product, twisted_product
from ..services.solver import SearchConfig, isolated_root_clamp, search
from .io import read_json, read_torsion, write_torsion
from .models import (
    ClassificationModel,
    ConstructionModel,
    FrameReportModel,
    ModelCheckModel,
    ResidualReportModel,
    SasakianProductSpecFile,
    SearchResultModel,
    TwistedProductSpecFile,
)

logger = get_logger(__name__)

Outcome = Tuple[int, BaseModel]


def check(args: argparse.Namespace, cfg: AppConfig) -> Outcome:
    torsion = read_torsion(args.file)
    report = is_bkl_admissible(torsion, cfg.tolerance.tol, cfg.tolerance.rank_tol)
    if not report.admissible:
        logger.warning("Torsion is not admissible", file=args.file, **report.residuals())
    return (EXIT_OK if report.admissible else EXIT_FAILED_CHECK), ResidualReportModel.from_report(report)


def normalize(args: argparse.Namespace, cfg: AppConfig) -> Outcome:
    torsion = read_torsion(args.file)
    report = phi_compatible_frame(
        torsion, cfg.tolerance.tol, cfg.tolerance.rank_tol, cfg.normalizer.seed, cfg.normalizer.retries
    )
    return EXIT_OK, FrameReportModel.from_report(report)


def classify(args: argparse.Namespace, cfg: AppConfig) -> Outcome:
    torsion = read_torsion(args.file)
    report = classify_point(
        torsion, cfg.tolerance.tol, cfg.tolerance.rank_tol, cfg.normalizer.seed, cfg.normalizer.retries
    )
    return EXIT_OK, ClassificationModel.from_report(report)


SPEC_FILES: Dict[str, type] = {
    "twisted-product": TwistedProductSpecFile,
    "sasakian": SasakianProductSpecFile,
}


def construct(args: argparse.Namespace, cfg: AppConfig) -> Outcome:
    data = read_json(args.spec)
    try:
        spec = SPEC_FILES[args.kind].model_validate(data).to_spec()
    except ValidationError as e:
        raise ConstructionSpecError(f"{args.spec}: {e}") from e
    exact_tol = cfg.tolerance.exact_tol
    if args.kind == "twisted-product":
        result = twisted_product(spec, exact_tol)
    else:
        result = sasakian_product(spec, exact_tol)

    if args.out:
        write_torsion(args.out, result.torsion)
    if args.model_out:
        if result.frame is None:
            logger.warning("No exact model for these constants", model_out=args.model_out)
        else:
            write_model(args.model_out, result.frame.model, result.frame)
    code = EXIT_OK if result.check.admissible else EXIT_FAILED_CHECK
    return code, ConstructionModel.from_result(args.kind, result)


def scale_eta(args: argparse.Namespace, cfg: AppConfig) -> Outcome:
    base = read_torsion(args.file)
    frame = None
    if args.base_model:
        _, frame = read_model(args.base_model)
        if frame is None:
            raise ConstructionSpecError(f"{args.base_model}: model has no frame", path=args.base_model)
    elif args.model_out:
        raise ConstructionSpecError("--model-out needs --base-model")
    result = eta_scaling(
        EtaScaleSpec(base=base, t=args.t, frame=frame),
        cfg.tolerance.tol,
        cfg.tolerance.rank_tol,
        cfg.normalizer.seed,
        cfg.normalizer.retries,
    )
    if args.out:
        write_torsion(args.out, result.torsion)
    if args.model_out:
        if result.frame is None:
            logger.warning("No exact model for this t", model_out=args.model_out)
        else:
            write_model(args.model_out, result.frame.model, result.frame)
    code = EXIT_OK if result.check.admissible else EXIT_FAILED_CHECK
    return code, ConstructionModel.from_result("eta-scaling", result)


def verify_model(args: argparse.Namespace, cfg: AppConfig) -> Outcome:
    model, frame = read_model(args.file)
    frame_check = frame.check() if frame is not None else None
    report = ModelCheckModel.from_check(model.name, len(model.basis), frame_check)
    ok = frame_check is None or (frame_check.structure_holds and frame_check.bkl_holds and frame_check.integrable)
    return (EXIT_OK if ok else EXIT_FAILED_CHECK), report


def run_search(args: argparse.Namespace, cfg: AppConfig) -> Outcome:
    overrides: Dict[str, Any] = {
        "target_rank": args.rank,
        "full": args.full,
        "seed": cfg.normalizer.seed if args.seed is None else args.seed,
        "check_tol": cfg.tolerance.tol,
    }
    if args.restarts is not None:
        overrides["restarts"] = args.restarts
    if args.max_iters is not None:
        overrides["max_iters"] = args.max_iters
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.initial:
        overrides["initial"] = read_torsion(args.initial)
    if args.clamp_isolated_root is not None:
        overrides["clamped"] = isolated_root_clamp(args.dim, args.clamp_isolated_root)
        overrides["adapted"] = True
    result = search(SearchConfig.from_settings(args.dim, cfg.solver, **overrides))
    if args.out:
        write_torsion(args.out, result.torsion)
    return EXIT_OK, SearchResultModel.from_result(result)


COMMANDS: Dict[str, Callable[[argparse.Namespace, AppConfig], Outcome]] = {
    "check": check,
    "normalize": normalize,
    "classify": classify,
    "construct": construct,
    "scale-eta": scale_eta,
    "verify-model": verify_model,
    "search": run_search,
}
