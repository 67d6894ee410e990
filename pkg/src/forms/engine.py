"""Exact exterior calculus over a finitely generated coframe.

Scalars are sympy expressions over Q(i, sqrt 2) and declared real symbols. A form is a map
from sorted tuples of generator positions to scalars; wedge products sort their factors and
track the sign, so equal forms have equal dictionaries.
"""

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import sympy

from ..core.exceptions import FormEngineError, ModelValidationError
from ..core.logging import get_logger

logger = get_logger(__name__)

Scalar = sympy.Expr
Monomial = tuple[int, ...]


def normalize_scalar(value) -> Scalar:
    """Canonical expanded form of a scalar."""
    return sympy.expand(sympy.sympify(value))


def conjugate_scalar(value: Scalar) -> Scalar:
    return sympy.expand(sympy.conjugate(value))


def sort_monomial(indices: Sequence[int]) -> tuple[int, Monomial]:
    """Sign of the sorting permutation and the sorted tuple; sign 0 on a repeated factor."""
    if len(set(indices)) != len(indices):
        return 0, ()
    items = list(indices)
    sign = 1
    for a in range(len(items)):
        for b in range(len(items) - 1 - a):
            if items[b] > items[b + 1]:
                items[b], items[b + 1] = items[b + 1], items[b]
                sign = -sign
    return sign, tuple(items)


@dataclass(frozen=True)
class Generator:
    """Degree-1 generator with a (p,q) tag (None when the type is not fixed) and a conjugate link.

    ``conj(self) = conjugate_sign * conjugate``; an imaginary 1-form points at itself with
    sign -1.
    """

    name: str
    ptype: tuple[int, int] | None
    conjugate: str
    conjugate_sign: int = 1


class GeneratorSet:
    """Ordered generators with resolved conjugation."""

    def __init__(self, generators: Sequence[Generator]):
        names = [g.name for g in generators]
        if len(set(names)) != len(names):
            raise FormEngineError("duplicate generator names")
        self.generators = tuple(generators)
        self._index = {name: pos for pos, name in enumerate(names)}
        for g in generators:
            if g.conjugate not in self._index:
                raise FormEngineError(f"conjugate of {g.name} is undeclared: {g.conjugate}")
            if g.conjugate_sign not in (1, -1):
                raise FormEngineError(f"conjugate sign of {g.name} must be +1 or -1")
            partner = generators[self._index[g.conjugate]]
            if partner.conjugate != g.name or partner.conjugate_sign != g.conjugate_sign:
                raise FormEngineError(f"conjugation of {g.name} and {partner.name} is not an involution")

    def __len__(self) -> int:
        return len(self.generators)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise FormEngineError(f"unknown generator {name}") from None

    def __getitem__(self, position: int) -> Generator:
        return self.generators[position]

    def names(self) -> list[str]:
        return [g.name for g in self.generators]


class Form:
    """Scalar-linear combination of sorted wedge monomials."""

    __slots__ = ("basis", "terms")

    def __init__(self, basis: GeneratorSet, terms: Mapping[Monomial, Scalar] | None = None):
        self.basis = basis
        clean: dict[Monomial, Scalar] = {}
        for monomial, coefficient in (terms or {}).items():
            value = normalize_scalar(coefficient)
            if value != 0:
                clean[monomial] = value
        self.terms = clean

    @classmethod
    def zero(cls, basis: GeneratorSet) -> "Form":
        return cls(basis)

    @classmethod
    def scalar(cls, basis: GeneratorSet, value) -> "Form":
        return cls(basis, {(): value})

    @classmethod
    def generator(cls, basis: GeneratorSet, name: str) -> "Form":
        return cls(basis, {(basis.index(name),): sympy.Integer(1)})

    @classmethod
    def monomial(cls, basis: GeneratorSet, names: Sequence[str], coefficient=1) -> "Form":
        sign, key = sort_monomial([basis.index(name) for name in names])
        if sign == 0:
            return cls(basis)
        return cls(basis, {key: sign * sympy.sympify(coefficient)})

    def _same_basis(self, other: "Form") -> None:
        if self.basis is not other.basis:
            raise FormEngineError("forms belong to different models")

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int | None:
        """Degree of a homogeneous form; None for the zero form."""
        degrees = {len(m) for m in self.terms}
        if not degrees:
            return None
        if len(degrees) > 1:
            raise FormEngineError(f"form is not homogeneous (degrees {sorted(degrees)})")
        return degrees.pop()

    def __add__(self, other: "Form") -> "Form":
        self._same_basis(other)
        combined = dict(self.terms)
        for monomial, coefficient in other.terms.items():
            combined[monomial] = combined.get(monomial, 0) + coefficient
        return Form(self.basis, combined)

    def __neg__(self) -> "Form":
        return Form(self.basis, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Form") -> "Form":
        return self + (-other)

    def __mul__(self, value) -> "Form":
        if isinstance(value, Form):
            raise FormEngineError("use wedge() or ^ to multiply two forms")
        factor = sympy.sympify(value)
        return Form(self.basis, {m: factor * c for m, c in self.terms.items()})

    __rmul__ = __mul__

    def __xor__(self, other: "Form") -> "Form":
        return wedge(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Form):
            return NotImplemented
        return self.basis is other.basis and (self - other).is_zero

    def __hash__(self) -> int:
        return hash(frozenset(self.terms))

    def conjugate(self) -> "Form":
        out = Form.zero(self.basis)
        for monomial, coefficient in self.terms.items():
            factors = []
            scale = conjugate_scalar(coefficient)
            for position in monomial:
                g = self.basis[position]
                factors.append(self.basis.index(g.conjugate))
                scale = scale * g.conjugate_sign
            sign, key = sort_monomial(factors)
            out = out + Form(self.basis, {key: sign * scale})
        return out

    def coefficient(self, *names: str) -> Scalar:
        """Coefficient of the monomial g_1 ^ ... ^ g_k, sign-adjusted to the given order."""
        sign, key = sort_monomial([self.basis.index(name) for name in names])
        if sign == 0:
            return sympy.Integer(0)
        return sign * self.terms.get(key, sympy.Integer(0))

    def subs(self, mapping: Mapping) -> "Form":
        return Form(self.basis, {m: c.subs(mapping) for m, c in self.terms.items()})

    def free_symbols(self) -> set[sympy.Symbol]:
        out: set[sympy.Symbol] = set()
        for coefficient in self.terms.values():
            out |= coefficient.free_symbols
        return out

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for monomial in sorted(self.terms):
            word = "^".join(self.basis[p].name for p in monomial) or "1"
            parts.append(f"({self.terms[monomial]})*{word}")
        return " + ".join(parts)


def wedge(a: Form, b: Form) -> Form:
    """Graded-commutative product."""
    a._same_basis(b)
    product: dict[Monomial, Scalar] = {}
    for ma, ca in a.terms.items():
        for mb, cb in b.terms.items():
            sign, key = sort_monomial(ma + mb)
            if sign:
                product[key] = product.get(key, 0) + sign * ca * cb
    return Form(a.basis, product)


def wedge_all(forms: Iterable[Form], basis: GeneratorSet) -> Form:
    out = Form.scalar(basis, 1)
    for f in forms:
        out = wedge(out, f)
    return out


class FormModel:
    """Generators, their exterior derivatives and declared scalar symbols.

    Derivatives of conjugate generators are filled in from d(conj g) = conj(d g) when only one
    side is declared. The model is validated on construction: d^2 = 0 on every generator and
    conjugation commutes with d.
    """

    def __init__(
        self,
        name: str,
        basis: GeneratorSet,
        derivatives: Mapping[str, Form],
        symbols: Mapping[str, sympy.Symbol] | None = None,
    ):
        self.name = name
        self.basis = basis
        self.symbols = dict(symbols or {})
        table: dict[int, Form] = {}
        for generator_name, form in derivatives.items():
            if form.basis is not basis:
                raise FormEngineError(f"derivative of {generator_name} uses another model")
            table[basis.index(generator_name)] = form
        for position in list(table):
            g = basis[position]
            partner = basis.index(g.conjugate)
            if partner not in table:
                table[partner] = table[position].conjugate() * g.conjugate_sign
        self._d = table
        self.validate()

    def generator(self, name: str) -> Form:
        return Form.generator(self.basis, name)

    def scalar(self, value) -> Form:
        return Form.scalar(self.basis, value)

    def zero(self) -> Form:
        return Form.zero(self.basis)

    def has_derivative(self, name: str) -> bool:
        return self.basis.index(name) in self._d

    def derivative_of(self, name: str) -> Form:
        position = self.basis.index(name)
        if position not in self._d:
            raise FormEngineError(f"generator {name} has no declared derivative")
        return self._d[position]

    def d(self, form: Form) -> Form:
        """Exterior derivative by the Leibniz rule; scalars are constants."""
        if form.basis is not self.basis:
            raise FormEngineError("form belongs to another model")
        out = self.zero()
        for monomial, coefficient in form.terms.items():
            for slot, position in enumerate(monomial):
                if position not in self._d:
                    raise FormEngineError(f"generator {self.basis[position].name} has no declared derivative")
                left = Form(self.basis, {monomial[:slot]: coefficient * (-1) ** slot})
                right = Form(self.basis, {monomial[slot + 1:]: 1})
                out = out + wedge(wedge(left, self._d[position]), right)
        return out

    def validate(self) -> None:
        """Check d^2 = 0 and conjugation compatibility on every declared generator."""
        for position, derivative in self._d.items():
            g = self.basis[position]
            if derivative.degree not in (2, None):
                raise ModelValidationError(g.name, "derivative is not a 2-form")
            if not self.d(derivative).is_zero:
                raise ModelValidationError(g.name, "d(d g) is not zero")
            partner = self.basis.index(g.conjugate)
            expected = derivative.conjugate() * g.conjugate_sign
            if self._d[partner] != expected:
                raise ModelValidationError(g.name, "d(conj g) differs from conj(d g)")
        logger.debug("Form model validated", model=self.name, generators=len(self.basis))

    def structure(self) -> dict[str, Form]:
        return {self.basis[p].name: form for p, form in sorted(self._d.items())}


def real_symbol(name: str, positive: bool = False) -> sympy.Symbol:
    if positive:
        return sympy.Symbol(name, positive=True)
    return sympy.Symbol(name, real=True)
