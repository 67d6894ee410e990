"""structlog setup for bklkit.

Log lines go to standard error; standard output is reserved for the JSON report of a command.
"""

import logging
import sys
import uuid
from typing import Any, List

import numpy as np
import structlog
from structlog.processors import CallsiteParameter, CallsiteParameterAdder
from structlog.typing import EventDict

TEXT_FLOAT_DIGITS = 6


def bind_invocation(command: str) -> str:
    """Attach the subcommand and a fresh run id to every line logged until the next call."""
    run_id = uuid.uuid4().hex[:12]
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(command=command, run_id=run_id)
    return run_id


def summarize_arrays(logger: Any, method_name: str, event_dict: EventDict) -> EventDict:
    """Replace arrays and tensors by their shape so that a log line stays one line."""
    for key, value in event_dict.items():
        data = getattr(value, "data", value)
        if isinstance(data, np.ndarray) and data.size > 1:
            event_dict[key] = f"<{data.dtype} array {'x'.join(map(str, data.shape))}>"
        elif isinstance(value, np.generic):
            event_dict[key] = value.item()
    return event_dict


def _text_value(value: Any) -> str:
    if isinstance(value, float):
        return format(value, f".{TEXT_FLOAT_DIGITS}g")
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}={_text_value(v)}" for k, v in value.items()) + "}"
    return str(value)


def render_plaintext(logger: Any, name: str, event_dict: EventDict) -> str:
    """LEVEL time file:line [command] event key=value ..."""
    level = str(event_dict.pop("level", "")).upper()
    timestamp = event_dict.pop("timestamp", "")
    filename = event_dict.pop("filename", "")
    lineno = event_dict.pop("lineno", "")
    command = event_dict.pop("command", "")
    event = event_dict.pop("event", "")
    event_dict.pop("run_id", None)
    event_dict.pop("logger", None)

    location = f"{filename}:{lineno}" if filename else ""
    parts = [level, timestamp, location, f"[{command}]" if command else "", str(event)]
    parts += [f"{key}={_text_value(value)}" for key, value in event_dict.items()]
    return " ".join(part for part in parts if part)


def setup_logging(level: str = "WARNING", format_type: str = "text") -> None:
    """Configure structlog on top of the standard library.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR)
        format_type: Log format (json or text)

    Raises:
        ValueError: If the level is unknown.
    """
    numeric_level = logging.getLevelName(level.upper())
    if not isinstance(numeric_level, int):
        raise ValueError(f"Invalid log level: {level}")

    processors: List[Any] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        summarize_arrays,
    ]
    if format_type == "json":
        processors += [structlog.processors.TimeStamper(fmt="iso"), structlog.processors.JSONRenderer()]
    else:
        processors += [
            structlog.processors.TimeStamper(fmt="%H:%M:%S", key="timestamp"),
            CallsiteParameterAdder(parameters=[CallsiteParameter.FILENAME, CallsiteParameter.LINENO]),
            render_plaintext,
        ]

    structlog.configure(
        processors=processors,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=numeric_level, force=True)


def get_logger(name: str) -> structlog.BoundLogger:
    """Get a configured logger instance.

    Args:
        name: Logger name (typically __name__)
    """
    return structlog.get_logger(name)
