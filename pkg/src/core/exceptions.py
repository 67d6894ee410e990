"""Custom exceptions for bklkit."""

from typing import Any, Dict, Optional

# Exit codes shared by the CLI.
EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_USAGE = 2


class BklError(Exception):
    """Base exception for bklkit errors."""

    def __init__(
        self,
        message: str,
        error_type: str,
        exit_code: int,
        details: Optional[Dict[str, Any]] = None
    ):
        """Initialize a bklkit error.

        Args:
            message: Human-readable error message
            error_type: Machine-readable error type
            exit_code: Process exit code the CLI returns for this error
            details: Optional diagnostics (residuals, indices, tolerances)
        """
        super().__init__(message)
        self.message = message
        self.error_type = error_type
        self.exit_code = exit_code
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Convert error to the machine-readable error object."""
        return {
            "error": {
                "message": self.message,
                "type": self.error_type,
                "code": str(self.exit_code)
            },
            "details": self.details
        }


class InvalidTorsionError(BklError):
    """Raised when torsion entries are out of range, duplicated or not antisymmetric."""

    def __init__(self, reason: str, **details: Any):
        super().__init__(f"Invalid torsion: {reason}", "invalid_torsion", EXIT_USAGE, details)


class TorsionFormatError(BklError):
    """Raised when a torsion file cannot be parsed."""

    def __init__(self, source: str, reason: str):
        """Initialize torsion format error.

        Args:
            source: File path or other description of the input
            reason: What is wrong with it
        """
        super().__init__(
            f"Malformed torsion file {source}: {reason}",
            "invalid_format",
            EXIT_USAGE,
            {"source": source}
        )


class OutputWriteError(BklError):
    """Raised when an output file (torsion, model or report) cannot be written."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"Cannot write {path}: {reason}", "write_failed", EXIT_USAGE, {"path": path})


class NonUnitaryError(BklError):
    """Raised when a frame change is not unitary within tolerance."""

    def __init__(self, deviation: float, tol: float):
        super().__init__(
            f"Frame change is not unitary: |UU* - I|_F = {deviation:.3e} > {tol:.1e}",
            "non_unitary",
            EXIT_USAGE,
            {"deviation": deviation, "tol": tol}
        )


class NotAdmissibleError(BklError):
    """Raised when an operation requires a BKL-admissible torsion."""

    def __init__(self, residuals: Dict[str, Any], tol: float):
        """Initialize not-admissible error.

        Args:
            residuals: Residual families of the failed check
            tol: Tolerance the check was run with
        """
        from ..core.logging import get_logger
        logger = get_logger(__name__)
        logger.warning("Torsion is not BKL-admissible", tol=tol, **residuals)

        worst = max(residuals, key=lambda key: residuals[key]) if residuals else "none"
        super().__init__(
            f"Torsion is not BKL-admissible at tol={tol:.1e} (largest residual family: {worst})",
            "not_admissible",
            EXIT_FAILED_CHECK,
            {"residuals": residuals, "tol": tol}
        )


class SimultaneousDiagonalizationError(BklError):
    """Raised when the commuting family cannot be diagonalized after all retries."""

    def __init__(self, attempts: int, off_diagonal: float):
        super().__init__(
            f"Simultaneous diagonalization failed after {attempts} attempts "
            f"(off-diagonal residual {off_diagonal:.3e})",
            "simultaneous_diagonalization_failed",
            EXIT_FAILED_CHECK,
            {"attempts": attempts, "off_diagonal": off_diagonal}
        )


class ToleranceInconsistencyError(BklError):
    """Raised when two equivalent rank tests disagree."""

    def __init__(self, reason: str, **details: Any):
        super().__init__(
            f"Tolerance inconsistency: {reason}",
            "tolerance_inconsistency",
            EXIT_FAILED_CHECK,
            details
        )


class PreconditionError(BklError):
    """Raised when an analysis is asked for on data outside its hypotheses."""

    def __init__(self, operation: str, reason: str):
        super().__init__(
            f"{operation}: {reason}",
            "precondition_failed",
            EXIT_FAILED_CHECK,
            {"operation": operation}
        )


class ConstructionSpecError(BklError):
    """Raised when a construction spec violates its invariants."""

    def __init__(self, reason: str, error_type: str = "invalid_construction_spec", **details: Any):
        super().__init__(f"Invalid construction spec: {reason}", error_type, EXIT_USAGE, details)


class EtaScalingPreconditionError(ConstructionSpecError):
    """Raised when the eigenvalues a_i are not pairwise Re-orthogonal."""

    def __init__(self, violation: float, pair: tuple[int, int]):
        from ..core.logging import get_logger
        logger = get_logger(__name__)
        logger.warning("eta-scaling precondition violated", violation=violation, pair=pair)

        super().__init__(
            f"Re(a_{pair[0]} conj(a_{pair[1]})) = {violation:.6g} is not zero",
            error_type="eta_scaling_precondition",
            violation=violation,
            pair=list(pair)
        )


class ModelFormatError(BklError):
    """Raised when a model file cannot be parsed."""

    def __init__(self, reason: str):
        super().__init__(f"Malformed model file: {reason}", "invalid_model_format", EXIT_USAGE)


class ModelValidationError(BklError):
    """Raised when structure equations violate d^2 = 0 or conjugation."""

    def __init__(self, generator: str, reason: str):
        super().__init__(
            f"Structure equations rejected at {generator}: {reason}",
            "model_validation_failed",
            EXIT_FAILED_CHECK,
            {"generator": generator}
        )


class FormEngineError(BklError):
    """Raised on misuse of the exterior calculus (mixed models, missing derivatives, ...)."""

    def __init__(self, reason: str):
        super().__init__(reason, "form_engine_error", EXIT_USAGE)


class JacobianCheckError(BklError):
    """Raised in strict mode when the analytic Jacobian disagrees with finite differences."""

    def __init__(self, rel_error: float, threshold: float):
        super().__init__(
            f"Jacobian self-check failed: relative error {rel_error:.3e} > {threshold:.1e}",
            "jacobian_check_failed",
            EXIT_FAILED_CHECK,
            {"rel_error": rel_error, "threshold": threshold}
        )


class ConfigurationError(Exception):
    """Raised when configuration is invalid."""
    pass
