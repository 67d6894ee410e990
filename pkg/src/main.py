"""Command-line entry point for bklkit."""

import argparse
import sys
from typing import Optional, Sequence

from .api.commands import COMMANDS
from .api.io import dumps, write_json
from .core.config import AppConfig, load_config, with_overrides
from .core.exceptions import EXIT_USAGE, BklError, ConfigurationError, OutputWriteError
from .core.logging import bind_invocation, get_logger, setup_logging

logger = get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    """Argument grammar; the shared flags are accepted after every subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Configuration file (YAML)")
    common.add_argument("--log-level", help="Log level (DEBUG, INFO, WARNING, ERROR)")
    common.add_argument("--log-format", choices=["text", "json"], help="Log format")
    common.add_argument("--tol", type=float, help="Residual tolerance")
    common.add_argument("--seed", type=int, help="Random seed")
    common.add_argument("--report", help="Also write the report to this file")

    parser = argparse.ArgumentParser(prog="bklkit", description="Bismut Kähler-like torsion toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("check", "Evaluate the admissibility residuals of a torsion file"),
        ("normalize", "Normalize to a phi-compatible frame"),
        ("classify", "Classify an admissible point"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("file", help="Torsion file (JSON)")

    p = sub.add_parser("construct", parents=[common], help="Build an example family")
    p.add_argument("kind", choices=["twisted-product", "sasakian"])
    p.add_argument("--spec", required=True, help="Construction spec file (JSON)")
    p.add_argument("--out", help="Write the torsion file here")
    p.add_argument("--model-out", help="Write the exact model file here")

    p = sub.add_parser("scale-eta", parents=[common], help="eta-scaling of an admissible point")
    p.add_argument("file", help="Torsion file (JSON)")
    p.add_argument("--t", type=float, required=True, help="Scaling factor, positive")
    p.add_argument("--out", help="Write the scaled torsion file here")
    p.add_argument("--base-model", help="Exact model file of the base, as written by construct --model-out")
    p.add_argument("--model-out", help="Write the exact model of the scaled point here (needs --base-model)")

    p = sub.add_parser("verify-model", parents=[common], help="Check a model file exactly")
    p.add_argument("file", help="Model file (JSON)")

    p = sub.add_parser("search", parents=[common], help="Seeded search on the BKL variety")
    p.add_argument("--dim", type=int, required=True, help="Complex dimension n")
    p.add_argument("--rank", type=int, help="Target B-rank")
    p.add_argument("--full", action="store_true", help="Require min eig A away from zero")
    p.add_argument("--restarts", type=int, help="Number of restarts")
    p.add_argument("--max-iters", type=int, help="Iterations per restart")
    p.add_argument("--workers", type=int, help="Worker threads")
    p.add_argument("--initial", help="Torsion file to start every restart near")
    p.add_argument("--clamp-isolated-root", type=int, help="Clamp the isolated-root pattern of this index in an adapted frame")
    p.add_argument("--out", help="Write the best torsion file here")
    return parser


def resolve_config(args: argparse.Namespace) -> AppConfig:
    """Configuration for one invocation: file and environment, then command-line flags."""
    cfg = load_config(args.config)
    if args.tol is not None and not args.tol > 0:
        raise ConfigurationError(f"--tol must be positive, got {args.tol}")
    flags = {
        "tolerance": {"tol": args.tol},
        "normalizer": {"seed": args.seed},
        "logging": {"level": args.log_level, "format": args.log_format},
    }
    overrides = {section: {k: v for k, v in values.items() if v is not None} for section, values in flags.items()}
    return with_overrides(cfg, **overrides)


def _configuration_error(message: str) -> int:
    print(dumps({"error": {"message": message, "type": "configuration_error", "code": str(EXIT_USAGE)}, "details": {}}))
    return EXIT_USAGE


def _emit(payload, path: Optional[str]) -> None:
    """Write the report file, if any, then print the report."""
    if path:
        write_json(path, payload)
    print(dumps(payload))


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, dispatch and map errors to exit codes (0 ok, 1 failed check, 2 usage or format)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        cfg = resolve_config(args)
        setup_logging(cfg.logging.level, cfg.logging.format)
    except (ConfigurationError, ValueError) as e:
        return _configuration_error(str(e))

    bind_invocation(args.command)
    logger.debug("Command started")
    try:
        code, report = COMMANDS[args.command](args, cfg)
        _emit(report, args.report)
        return code
    except BklError as e:
        logger.debug("Command failed", error_type=e.error_type, exit_code=e.exit_code)
        try:
            _emit(e.to_dict(), args.report)
        except OutputWriteError:
            _emit(e.to_dict(), None)
        return e.exit_code
    except ConfigurationError as e:
        return _configuration_error(str(e))


def main() -> None:
    """Main entry point."""
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
