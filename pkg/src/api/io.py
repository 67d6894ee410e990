"""Torsion file format and the JSON writer used for every report."""

import json
import math
from pathlib import Path
from typing import Any, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..core.exceptions import OutputWriteError, TorsionFormatError
from ..core.logging import get_logger
from ..geometry.tensor import TorsionTensor, build_torsion

logger = get_logger(__name__)

SIGNIFICANT_DIGITS = 17


class TorsionEntryFile(BaseModel):
    """One independent component T^upper_{lower}, 1-based, value as [real, imaginary]."""
    model_config = ConfigDict(extra="forbid")

    upper: int = Field(ge=1)
    lower: List[int] = Field(min_length=2, max_length=2)
    value: List[float] = Field(min_length=2, max_length=2)


class TorsionFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=1, description="Complex dimension")
    entries: List[TorsionEntryFile] = Field(default_factory=list)


def complex_pair(z: complex) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def complex_array(values: np.ndarray) -> Any:
    """Nested lists of [re, im] pairs."""
    arr = np.asarray(values)
    if arr.ndim == 0:
        return complex_pair(arr.item())
    return [complex_array(row) for row in arr]


def torsion_to_dict(torsion: TorsionTensor) -> dict[str, Any]:
    return {
        "n": torsion.n,
        "entries": [
            {"upper": j, "lower": [i, k], "value": complex_pair(v)} for j, i, k, v in torsion.entries()
        ],
    }


def torsion_from_dict(data: Any, source: str = "<input>") -> TorsionTensor:
    """Parse the torsion format; only entries with lower[0] < lower[1] are accepted.

    Raises:
        TorsionFormatError: On schema violations or unordered lower pairs.
        InvalidTorsionError: On out-of-range or duplicate entries.
    """
    try:
        spec = TorsionFile.model_validate(data)
    except ValidationError as e:
        raise TorsionFormatError(source, str(e)) from e
    for entry in spec.entries:
        i, k = entry.lower
        if i >= k:
            raise TorsionFormatError(source, f"lower pair {entry.lower} must be increasing")
        if not all(math.isfinite(x) for x in entry.value):
            raise TorsionFormatError(source, f"non-finite value in entry {entry.upper}, {entry.lower}")
    return build_torsion(
        spec.n,
        ((e.upper, e.lower[0], e.lower[1], complex(e.value[0], e.value[1])) for e in spec.entries),
    )


def read_json(path: str | Path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise TorsionFormatError(str(path), str(e)) from e


def read_torsion(path: str | Path) -> TorsionTensor:
    torsion = torsion_from_dict(read_json(path), str(path))
    logger.debug("Torsion file read", path=str(path), n=torsion.n)
    return torsion


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    text = format(x, f".{SIGNIFICANT_DIGITS}g")
    if not any(c in text for c in ".eE"):
        text += ".0"
    return text


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, BaseModel):
        return _encode(obj.model_dump(), indent, level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode(complex_pair(obj), indent, level)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[" + pad + ("," + pad).join(_encode(v, indent, level + 1) for v in obj) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj, indent, 0)


def write_json(path: str | Path, obj: Any) -> None:
    """Write ``dumps(obj)`` to ``path``.

    Raises:
        OutputWriteError: If the file cannot be created or written.
    """
    text = dumps(obj) + "\n"
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise OutputWriteError(str(path), e.strerror or str(e)) from e
    logger.debug("JSON written", path=str(path))


def write_torsion(path: str | Path, torsion: TorsionTensor) -> None:
    write_json(path, torsion_to_dict(torsion))
