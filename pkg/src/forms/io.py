"""JSON model files: generators, symbols, structure equations and an optional Hermitian frame."""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import sympy
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from ..core.exceptions import FormEngineError, ModelFormatError, OutputWriteError
from ..core.logging import get_logger
from .connection import ExactTorsion, HermitianFrame
from .engine import Form, FormModel, Generator, GeneratorSet, real_symbol

logger = get_logger(__name__)

_PARSER_GLOBALS = {
    "Integer": sympy.Integer,
    "Rational": sympy.Rational,
    "Float": sympy.Float,
    "Symbol": sympy.Symbol,
    "I": sympy.I,
    "sqrt": sympy.sqrt,
}


class SymbolEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    real: bool = True
    positive: bool = False


class GeneratorEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    type: Optional[List[int]] = Field(default=None, description="(p, q) tag, omitted for untyped generators")
    conjugate: str
    conjugate_sign: int = 1


class TermEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    coefficient: str
    wedge: List[str]


class TorsionEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    upper: int
    lower: List[int] = Field(min_length=2, max_length=2)
    value: str


class ModelFile(BaseModel):
    """On-disk model; indices in ``torsion`` are 1-based."""

    model_config = ConfigDict(extra="forbid")

    name: str = "model"
    symbols: List[SymbolEntry] = Field(default_factory=list)
    generators: List[GeneratorEntry]
    structure: Dict[str, List[TermEntry]]
    coframe: Optional[List[List[TermEntry]]] = None
    torsion: Optional[List[TorsionEntry]] = None
    chern_connection: Optional[List[List[List[TermEntry]]]] = None


def _form_terms(form: Form) -> list[dict[str, Any]]:
    return [
        {"coefficient": str(form.terms[m]), "wedge": [form.basis[p].name for p in m]}
        for m in sorted(form.terms)
    ]


def model_to_dict(model: FormModel, frame: HermitianFrame | None = None) -> dict[str, Any]:
    """Serializable description of a model and, optionally, a frame on it."""
    data: dict[str, Any] = {
        "name": model.name,
        "symbols": [
            {"name": name, "real": bool(s.is_real), "positive": bool(s.is_positive)}
            for name, s in sorted(model.symbols.items())
        ],
        "generators": [
            {
                "name": g.name,
                "type": list(g.ptype) if g.ptype is not None else None,
                "conjugate": g.conjugate,
                "conjugate_sign": g.conjugate_sign,
            }
            for g in model.basis.generators
        ],
        "structure": {name: _form_terms(form) for name, form in model.structure().items()},
    }
    if frame is not None:
        data["coframe"] = [_form_terms(phi) for phi in frame.coframe]
        data["torsion"] = [
            {"upper": j + 1, "lower": [i + 1, k + 1], "value": str(value)}
            for (j, i, k), value in sorted(frame.torsion.components.items())
        ]
        data["chern_connection"] = [[_form_terms(entry) for entry in row] for row in frame.chern]
    return data


def write_model(path: str | Path, model: FormModel, frame: HermitianFrame | None = None) -> None:
    text = json.dumps(model_to_dict(model, frame), indent=2) + "\n"
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise OutputWriteError(str(path), e.strerror or str(e)) from e


class _Parser:
    def __init__(self, symbols: dict[str, sympy.Symbol]):
        self.symbols = symbols

    def scalar(self, text: str) -> sympy.Expr:
        try:
            value = parse_expr(
                text,
                local_dict=dict(self.symbols),
                global_dict=dict(_PARSER_GLOBALS),
                transformations=standard_transformations,
            )
        except Exception as e:
            raise ModelFormatError(f"cannot parse coefficient {text!r}: {e}") from e
        value = sympy.sympify(value)
        if value.has(sympy.Float):
            raise ModelFormatError(f"coefficient {text!r} is not exact")
        undeclared = {str(s) for s in value.free_symbols} - set(self.symbols)
        if undeclared:
            raise ModelFormatError(f"coefficient {text!r} uses undeclared symbols {sorted(undeclared)}")
        return value

    def form(self, basis: GeneratorSet, terms: List[TermEntry]) -> Form:
        out = Form.zero(basis)
        for term in terms:
            try:
                out = out + Form.monomial(basis, term.wedge, self.scalar(term.coefficient))
            except FormEngineError as e:
                raise ModelFormatError(e.message) from e
        return out


def model_from_dict(data: dict[str, Any]) -> tuple[FormModel, HermitianFrame | None]:
    """Parse and validate a model description.

    Raises:
        ModelFormatError: On malformed content.
        ModelValidationError: If the structure equations violate d^2 = 0 or conjugation.
    """
    try:
        spec = ModelFile.model_validate(data)
    except ValidationError as e:
        raise ModelFormatError(str(e)) from e

    symbols = {s.name: real_symbol(s.name, positive=s.positive) for s in spec.symbols}
    try:
        basis = GeneratorSet([
            Generator(
                name=g.name,
                ptype=tuple(g.type) if g.type is not None else None,  # type: ignore[arg-type]
                conjugate=g.conjugate,
                conjugate_sign=g.conjugate_sign,
            )
            for g in spec.generators
        ])
    except FormEngineError as e:
        raise ModelFormatError(e.message) from e

    parser = _Parser(symbols)
    derivatives = {name: parser.form(basis, terms) for name, terms in spec.structure.items()}
    for name in derivatives:
        if name not in basis.names():
            raise ModelFormatError(f"structure equation for undeclared generator {name}")
    model = FormModel(spec.name, basis, derivatives, symbols)

    pieces = (spec.coframe, spec.torsion, spec.chern_connection)
    if all(p is None for p in pieces):
        return model, None
    if any(p is None for p in pieces):
        raise ModelFormatError("coframe, torsion and chern_connection must be given together")

    coframe = [parser.form(basis, terms) for terms in spec.coframe]  # type: ignore[union-attr]
    n = len(coframe)
    components = {}
    for entry in spec.torsion:  # type: ignore[union-attr]
        j, (i, k) = entry.upper, entry.lower
        if not all(1 <= idx <= n for idx in (j, i, k)) or i == k:
            raise ModelFormatError(f"torsion entry {[j, i, k]} is out of range or diagonal")
        components[(j - 1, i - 1, k - 1)] = parser.scalar(entry.value)
    chern = [[parser.form(basis, terms) for terms in row] for row in spec.chern_connection]  # type: ignore[union-attr]
    try:
        frame = HermitianFrame(model, coframe, ExactTorsion(n, components), chern)
    except FormEngineError as e:
        raise ModelFormatError(e.message) from e
    return model, frame


def read_model(path: str | Path) -> tuple[FormModel, HermitianFrame | None]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"{path}: {e}") from e
    logger.debug("Model file read", path=str(path))
    return model_from_dict(data)
