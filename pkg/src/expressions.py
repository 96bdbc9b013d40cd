"""Text formats: group specs, ring expressions and ring matrices.

Grammar accepted by parse_ring_expr::

    matrix  := '[' row (',' row)* ']' | '[' expr (',' expr)* ']'
    row     := '[' expr (',' expr)* ']'
    expr    := ['+'|'-'] term (('+'|'-') term)*
    term    := factor (('*'|'/') factor)*
    factor  := '-' factor | atom ['^' ['-'] INT]
    atom    := NUMBER | NUMBER 'i' | 'i' | VAR | '(' expr ')'

Variables x, y, z, u, v name the standard generators in that order.
Division is only defined by single-term elements, so ``1/x`` is ``x^-1``.
"""

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Union

from src.exceptions import ExpressionSyntaxError, UnknownVariableError
from src.groupring import (
    CoefficientDomain,
    RingElement,
    RingMatrix,
    convolve,
    inverse_monomial,
)
from src.groups import Cocycle, GroupDescriptor, GroupElement, GroupKind

VARIABLES = "xyzuv"

_TOKEN_RE = re.compile(r"""
    (?P<space>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>i)?
  | (?P<unit>i)
  | (?P<var>[a-zA-Z])
  | (?P<op>[-+*/^()\[\],])
""", re.VERBOSE)

_GROUP_RE = re.compile(r"""
    ^\s*(?P<body>Z\s*(?:\^\s*(?P<rank>\d+))?|H3|Z\s*/\s*\d+(?:\s*[x×]\s*Z\s*/\s*\d+)*)\s*
    (?:[;,]?\s*theta\s*=\s*(?P<theta>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?))?\s*$
""", re.VERBOSE)


@dataclass
class _Token:
    kind: str
    text: str
    position: int
    value: object = None


def parse_group(text: str, theta: Optional[float] = None) -> GroupDescriptor:
    """
    Parse a group spec: ``Z``, ``Z^d``, ``Z/n1 x Z/n2 ...``, ``H3``, optional ``theta=<float>``.

    Args:
        text: group spec
        theta: cocycle parameter overriding a theta given in text

    Returns:
        GroupDescriptor
    """
    match = _GROUP_RE.match(text)
    if not match:
        raise ExpressionSyntaxError(f"Malformed group spec {text!r}", text, 0)
    body = match.group("body").replace(" ", "")
    if match.group("theta") is not None and theta is None:
        theta = float(match.group("theta"))
    if body == "H3":
        group = GroupDescriptor.heisenberg()
    elif "/" in body:
        moduli = [int(m) for m in re.findall(r"Z/(\d+)", body)]
        group = GroupDescriptor.finite(*moduli)
    else:
        group = GroupDescriptor.lattice(int(match.group("rank") or 1))
    if theta is not None:
        group = GroupDescriptor(group.kind, group.rank, group.moduli, twist=Cocycle(theta))
    return group


def format_group(group: GroupDescriptor) -> str:
    if group.kind == GroupKind.HEISENBERG3:
        text = "H3"
    elif group.is_finite:
        text = " x ".join(f"Z/{n}" for n in group.moduli)
    else:
        text = "Z" if group.rank == 1 else f"Z^{group.rank}"
    if group.twist is not None:
        text += f"; theta={group.twist.theta!r}"
    return text


class _Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, text: str, group: GroupDescriptor):
        self.text = text
        self.group = group
        self.tokens = self._tokenize(text)
        self.index = 0

    def _tokenize(self, text: str) -> List[_Token]:
        tokens = []
        position = 0
        while position < len(text):
            match = _TOKEN_RE.match(text, position)
            if not match:
                raise ExpressionSyntaxError(f"Unexpected character {text[position]!r}", text, position)
            if match.group("number") is not None:
                literal = match.group("number")
                if match.group("imag"):
                    tokens.append(_Token("number", match.group(0), position, complex(0.0, float(literal))))
                elif re.fullmatch(r"\d+", literal):
                    tokens.append(_Token("number", literal, position, int(literal)))
                else:
                    tokens.append(_Token("number", literal, position, Fraction(literal)))
            elif match.group("unit") is not None:
                tokens.append(_Token("number", "i", position, 1j))
            elif match.group("var") is not None:
                tokens.append(_Token("var", match.group("var"), position))
            elif match.group("op") is not None:
                tokens.append(_Token("op", match.group("op"), position))
            position = match.end()
        tokens.append(_Token("end", "", len(text)))
        return tokens

    # ---- token helpers ----

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def _accept(self, op: str) -> bool:
        if self.current.kind == "op" and self.current.text == op:
            self.index += 1
            return True
        return False

    def _expect(self, op: str):
        if not self._accept(op):
            self._fail(f"Expected {op!r}")

    def _fail(self, message: str):
        token = self.current
        found = token.text or "end of input"
        raise ExpressionSyntaxError(f"{message}, found {found!r}", self.text, token.position)

    # ---- grammar ----

    def parse(self) -> Union[RingElement, RingMatrix]:
        if self.current.kind == "op" and self.current.text == "[":
            result = self._matrix()
        else:
            result = self._expr()
        if self.current.kind != "end":
            self._fail("Unexpected trailing input")
        return result

    def _matrix(self) -> RingMatrix:
        self._expect("[")
        if self.current.kind == "op" and self.current.text == "[":
            rows = [self._row()]
            while self._accept(","):
                rows.append(self._row())
        else:
            rows = [self._expr_list()]
        self._expect("]")
        if len({len(row) for row in rows}) != 1:
            raise ExpressionSyntaxError("Ragged matrix rows", self.text, 0)
        return RingMatrix.from_rows(rows)

    def _row(self) -> List[RingElement]:
        self._expect("[")
        row = self._expr_list()
        self._expect("]")
        return row

    def _expr_list(self) -> List[RingElement]:
        items = [self._expr()]
        while self._accept(","):
            items.append(self._expr())
        return items

    def _expr(self) -> RingElement:
        negate = False
        if self._accept("-"):
            negate = True
        else:
            self._accept("+")
        result = self._term()
        if negate:
            result = -result
        while True:
            if self._accept("+"):
                result = result + self._term()
            elif self._accept("-"):
                result = result - self._term()
            else:
                return result

    def _term(self) -> RingElement:
        result = self._factor()
        while True:
            if self._accept("*"):
                result = convolve(result, self._factor())
            elif self.current.kind == "op" and self.current.text == "/":
                position = self.current.position
                self.index += 1
                divisor = self._factor()
                if len(divisor.terms) != 1:
                    raise ExpressionSyntaxError("Can only divide by a single term", self.text, position)
                result = convolve(result, inverse_monomial(divisor))
            else:
                return result

    def _factor(self) -> RingElement:
        if self._accept("-"):
            return -self._factor()
        position = self.current.position
        base = self._atom()
        if self._accept("^"):
            sign = -1 if self._accept("-") else 1
            if self.current.kind != "number" or not isinstance(self.current.value, int):
                self._fail("Expected an integer exponent")
            exponent = sign * self.current.value
            self.index += 1
            if exponent < 0:
                if len(base.terms) != 1:
                    raise ExpressionSyntaxError("Negative powers need a single term", self.text, position)
                base, exponent = inverse_monomial(base), -exponent
            result = RingElement.one(self.group)
            for _ in range(exponent):
                result = convolve(result, base)
            return result
        return base

    def _atom(self) -> RingElement:
        token = self.current
        if token.kind == "number":
            self.index += 1
            return RingElement.scalar(self.group, token.value)
        if token.kind == "var":
            self.index += 1
            return RingElement.monomial(self.group, self._generator(token))
        if self._accept("("):
            inner = self._expr()
            self._expect(")")
            return inner
        self._fail("Expected a number, variable or '('")

    def _generator(self, token: _Token) -> GroupElement:
        name = token.text
        index = VARIABLES.find(name)
        if index < 0 or index >= self.group.arity:
            allowed = ", ".join(VARIABLES[:self.group.arity])
            raise UnknownVariableError(
                f"Unknown variable {name!r} for {format_group(self.group)} (allowed: {allowed})",
                self.text, token.position
            )
        return self.group.generators()[index]


def parse_ring_expr(text: str, group: GroupDescriptor) -> Union[RingElement, RingMatrix]:
    """Parse a ring element, or a bracketed ring matrix, over group."""
    return _Parser(text, group).parse()


def parse_ring_matrix(text: str, group: GroupDescriptor) -> RingMatrix:
    result = parse_ring_expr(text, group)
    return result if isinstance(result, RingMatrix) else RingMatrix.from_element(result)


# ---- printing ----

def _power(name: str, k: int) -> Optional[str]:
    if k == 0:
        return None
    return name if k == 1 else f"{name}^{k}"


def _monomial_factors(group: GroupDescriptor, element: GroupElement) -> List[str]:
    if group.kind == GroupKind.HEISENBERG3:
        a, b, c = element
        # (a, b, c) = z^(c - ab) x^a y^b
        parts = [_power("z", c - a * b), _power("x", a), _power("y", b)]
    else:
        parts = [_power(VARIABLES[i], k) for i, k in enumerate(element)]
    return [p for p in parts if p is not None]


def _monomial_phase(group: GroupDescriptor, element: GroupElement) -> complex:
    """Coefficient that parsing the printed monomial attaches to element (twisted groups)."""
    text = "*".join(_monomial_factors(group, element)) or "1"
    parsed = parse_ring_expr(text, group)
    return parsed.coefficient(element)


def _format_exact(value) -> str:
    return str(value)


def _format_complex(value: complex) -> str:
    imag = value.imag
    sign = "-" if imag < 0 or (imag == 0 and str(imag).startswith("-")) else "+"
    return f"({value.real!r}{sign}{abs(imag)!r}i)"


def _format_element(x: RingElement) -> str:
    if x.is_zero():
        return "0"
    group = x.group
    pieces = []
    for element, value in x.terms:
        if group.twist is not None:
            value = value / _monomial_phase(group, element)
        monomial = "*".join(_monomial_factors(group, element))
        if x.domain == CoefficientDomain.COMPLEX:
            coefficient = _format_complex(complex(value))
            body = f"{coefficient}*{monomial}" if monomial else coefficient
            pieces.append(("+", body))
            continue
        sign = "-" if value < 0 else "+"
        magnitude = abs(value)
        if monomial and magnitude == 1:
            body = monomial
        elif monomial:
            body = f"{_format_exact(magnitude)}*{monomial}"
        else:
            body = _format_exact(magnitude)
        pieces.append((sign, body))
    first_sign, first_body = pieces[0]
    text = f"-{first_body}" if first_sign == "-" else first_body
    for sign, body in pieces[1:]:
        text += f" {sign} {body}"
    return text


def format_ring_expr(x: Union[RingElement, RingMatrix]) -> str:
    """Canonical text form; parse_ring_expr(format_ring_expr(x), group) == x for untwisted groups."""
    if isinstance(x, RingElement):
        return _format_element(x)
    rows = ", ".join("[" + ", ".join(_format_element(e) for e in row) + "]" for row in x.entries)
    return f"[{rows}]"
