"""Pauli words, real-weighted Pauli expressions, and their dense expansion.

Expressions use a small text grammar::

    expr   := term (('+' | '-') term)*
    term   := [number '*'] word
    word   := [IXYZ]+
    number := [sign] atom ['/' atom]      atom := decimal | 'sqrt2'

so ``"0.5*II - 0.5*ZZ"``, ``"1/sqrt2*ZY + -1/sqrt2*YI"`` and ``"XX"`` are all
valid.  Whitespace is ignored.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import reduce
from itertools import product
from typing import Iterable, Mapping

import numpy as np

PAULI_LETTERS = "IXYZ"

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# coefficients below this magnitude are treated as cancelled when merging
ZERO_CUTOFF = 1e-14


class ExprError(ValueError):
    """Malformed or inconsistent operator expression."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


@dataclass(frozen=True, order=True)
class PauliWord:
    letters: str

    def __post_init__(self):
        if not self.letters:
            raise ExprError("Pauli word must have at least one letter")
        bad = set(self.letters) - set(PAULI_LETTERS)
        if bad:
            raise ExprError(f"invalid Pauli letters {sorted(bad)} in {self.letters!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    def commutes_with(self, other: PauliWord) -> bool:
        """Two Pauli words commute iff they clash on an even number of sites."""
        if self.n_qubits != other.n_qubits:
            raise ExprError("Pauli words of different length")
        clashes = sum(
            1 for a, b in zip(self.letters, other.letters) if a != b and a != "I" and b != "I"
        )
        return clashes % 2 == 0

    def to_dense(self) -> np.ndarray:
        return reduce(np.kron, (_SINGLE[c] for c in self.letters))

    def __str__(self) -> str:
        return self.letters


class OperatorExpr:
    """Real linear combination of equal-length Pauli words, kept canonical.

    Terms are merged, cancelled terms dropped, and words sorted
    lexicographically, so two equal operators have equal ``terms``.
    """

    __slots__ = ("terms", "n_qubits")

    def __init__(self, terms: Iterable[tuple[float, PauliWord | str]], n_qubits: int | None = None):
        merged: dict[str, float] = {}
        for coef, word in terms:
            letters = word.letters if isinstance(word, PauliWord) else PauliWord(word).letters
            if n_qubits is None:
                n_qubits = len(letters)
            elif len(letters) != n_qubits:
                raise ExprError(
                    f"mixed word lengths: {letters!r} has {len(letters)} qubits, expected {n_qubits}"
                )
            if not math.isfinite(coef):
                raise ExprError(f"non-finite coefficient {coef!r} on {letters}")
            merged[letters] = merged.get(letters, 0.0) + float(coef)
        if n_qubits is None or n_qubits < 1:
            raise ExprError("expression needs at least one term or an explicit n_qubits")
        self.n_qubits = n_qubits
        self.terms: tuple[tuple[float, PauliWord], ...] = tuple(
            (c, PauliWord(w)) for w, c in sorted(merged.items()) if abs(c) > ZERO_CUTOFF
        )

    @classmethod
    def word(cls, letters: str, coef: float = 1.0) -> OperatorExpr:
        return cls([(coef, letters)])

    @classmethod
    def identity(cls, n_qubits: int) -> OperatorExpr:
        return cls([(1.0, "I" * n_qubits)])

    def as_dict(self) -> dict[str, float]:
        return {w.letters: c for c, w in self.terms}

    def __add__(self, other: OperatorExpr) -> OperatorExpr:
        return OperatorExpr(self.terms + other.terms, self.n_qubits)

    def __sub__(self, other: OperatorExpr) -> OperatorExpr:
        return self + (-1.0) * other

    def __neg__(self) -> OperatorExpr:
        return (-1.0) * self

    def __mul__(self, scale: float) -> OperatorExpr:
        return OperatorExpr(((scale * c, w) for c, w in self.terms), self.n_qubits)

    __rmul__ = __mul__

    def __truediv__(self, scale: float) -> OperatorExpr:
        return self * (1.0 / scale)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorExpr):
            return NotImplemented
        return self.n_qubits == other.n_qubits and self.terms == other.terms

    def __hash__(self) -> int:
        return hash((self.n_qubits, self.terms))

    def __repr__(self) -> str:
        return f"OperatorExpr({format_expr(self)!r})"

    def __str__(self) -> str:
        return format_expr(self)


def format_expr(expr: OperatorExpr) -> str:
    """Canonical text form; ``parse_expr(format_expr(e)) == e``."""
    if not expr.terms:
        return "0*" + "I" * expr.n_qubits
    parts = []
    for i, (coef, word) in enumerate(expr.terms):
        mag = repr(abs(coef))
        if i == 0:
            parts.append(f"{'-' if coef < 0 else ''}{mag}*{word}")
        else:
            parts.append(f"{'-' if coef < 0 else '+'} {mag}*{word}")
    return " ".join(parts)


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<sqrt2>sqrt2)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<word>[IXYZ]+)
  | (?P<op>[-+*/])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise ExprError("unexpected end of input", len(self.text))
        self.i += 1
        return tok

    def expect(self, kind, value=None):
        tok = self.take()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            raise ExprError(f"expected {want}, found {tok[1]!r}", tok[2])
        return tok

    def atom(self) -> float:
        kind, value, pos = self.take()
        if kind == "sqrt2":
            return math.sqrt(2.0)
        if kind == "number":
            return float(value)
        raise ExprError(f"expected a number, found {value!r}", pos)

    def number(self) -> float:
        sign = 1.0
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] in "+-":
            self.take()
            sign = -1.0 if tok[1] == "-" else 1.0
        value = self.atom()
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] == "/":
            self.take()
            denom_pos = self.peek()[2] if self.peek() else len(self.text)
            denom = self.atom()
            if denom == 0:
                raise ExprError("division by zero", denom_pos)
            value /= denom
        return sign * value

    def term(self) -> tuple[float, str]:
        tok = self.peek()
        if tok is None:
            raise ExprError("unexpected end of input", len(self.text))
        if tok[0] == "word":
            self.take()
            return 1.0, tok[1]
        coef = self.number()
        self.expect("op", "*")
        word = self.expect("word")
        return coef, word[1]

    def expr(self) -> OperatorExpr:
        if not self.tokens:
            raise ExprError("empty expression", 0)
        terms = [self.term()]
        positions = [self.tokens[0][2]]
        while self.peek() is not None:
            kind, value, pos = self.take()
            if kind != "op" or value not in "+-":
                raise ExprError(f"expected '+' or '-', found {value!r}", pos)
            positions.append(self.peek()[2] if self.peek() else len(self.text))
            coef, word = self.term()
            terms.append((-coef if value == "-" else coef, word))
        n = len(terms[0][1])
        for (_, word), pos in zip(terms, positions):
            if len(word) != n:
                raise ExprError(
                    f"mixed word lengths: {word!r} has {len(word)} qubits, expected {n}", pos
                )
        return OperatorExpr(terms, n)


def parse_expr(text: str) -> OperatorExpr:
    """Parse the expression grammar into a canonical :class:`OperatorExpr`."""
    return _Parser(text).expr()


def to_dense(expr: OperatorExpr | str) -> np.ndarray:
    if isinstance(expr, str):
        expr = parse_expr(expr)
    dim = 2**expr.n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for coef, word in expr.terms:
        out += coef * word.to_dense()
    return out


def all_words(n_qubits: int) -> list[PauliWord]:
    return [PauliWord("".join(p)) for p in product(PAULI_LETTERS, repeat=n_qubits)]


def from_dense(op: np.ndarray, tol: float = 1e-9) -> OperatorExpr:
    """Pauli decomposition of a Hermitian ``2^n x 2^n`` matrix.

    Raises ``ExprError`` if the matrix is not Hermitian (complex Pauli
    coefficients cannot be written in the grammar).
    """
    op = np.asarray(op)
    dim = op.shape[0]
    n = int(round(math.log2(dim))) if dim > 0 else 0
    if op.shape != (dim, dim) or 2**n != dim or n < 1:
        raise ExprError(f"expected a 2^n square matrix, got shape {op.shape}")
    if np.abs(op - op.conj().T).max() > tol:
        raise ExprError("only Hermitian operators have a real Pauli expansion")
    terms = []
    for word in all_words(n):
        c = np.trace(word.to_dense() @ op) / dim
        terms.append((float(c.real), word))
    return OperatorExpr(terms, n)


def rotated(p: str, q: str, angle: float, sign_p: float = 1.0, sign_q: float = 1.0) -> OperatorExpr:
    """``sign_p*cos(angle)*p + sign_q*sin(angle)*q`` as an expression."""
    return OperatorExpr(
        [(sign_p * math.cos(angle), p), (sign_q * math.sin(angle), q)]
    )


def expr_from_mapping(coefs: Mapping[str, float]) -> OperatorExpr:
    return OperatorExpr((c, w) for w, c in coefs.items())
