import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqctx.linalg import anticommutator, commutator, is_hermitian, is_involutory
from seqctx.pauli import (
    ExprError,
    OperatorExpr,
    PauliWord,
    all_words,
    format_expr,
    from_dense,
    parse_expr,
    rotated,
    to_dense,
)

letters = st.sampled_from("IXYZ")


def words(n):
    return st.lists(letters, min_size=n, max_size=n).map("".join)


coefs = st.floats(min_value=-5, max_value=5, allow_nan=False).filter(lambda c: abs(c) > 1e-6)


@st.composite
def exprs(draw, n=None):
    n = n or draw(st.integers(1, 3))
    terms = draw(st.lists(st.tuples(coefs, words(n)), min_size=1, max_size=5))
    return OperatorExpr(terms, n)


def test_single_word():
    e = parse_expr("XX")
    assert e.n_qubits == 2
    assert e.as_dict() == {"XX": 1.0}


def test_two_term_expression():
    e = parse_expr("0.70710678*ZY + -0.70710678*YI")
    assert e.n_qubits == 2
    assert e.as_dict() == {"YI": -0.70710678, "ZY": 0.70710678}


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("XX + ZYZ", "mixed word lengths"),
        ("", "empty"),
        ("   ", "empty"),
        ("XQ", "unexpected character"),
        ("0.5*", "end of input"),
        ("0.5 XX", "expected"),
        ("XX +", "end of input"),
        ("1/0*XX", "division by zero"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ExprError, match=fragment):
        parse_expr(text)


def test_error_reports_position():
    with pytest.raises(ExprError) as info:
        parse_expr("XX + ZYZ")
    assert info.value.position == 5


def test_sqrt2_and_fractions():
    e = parse_expr("1/sqrt2*XZ - sqrt2/2*ZX + 3/4*II")
    assert e.as_dict() == pytest.approx({"II": 0.75, "XZ": 1 / math.sqrt(2), "ZX": -1 / math.sqrt(2)})


def test_duplicates_merge_and_zeros_drop():
    e = parse_expr("XZ + 0.5*ZZ - XZ + 0.25*ZZ")
    assert e.as_dict() == {"ZZ": 0.75}
    assert parse_expr("XZ - XZ").terms == ()


@pytest.mark.parametrize(
    "text, expected",
    [
        ("Z", np.diag([1, -1])),
        ("XX", np.fliplr(np.eye(4))),
        ("0.5*II + 0.5*ZZ", np.diag([1, 0, 0, 1])),
    ],
)
def test_to_dense_examples(text, expected):
    np.testing.assert_allclose(to_dense(text), expected, atol=0)


def test_invalid_letter():
    with pytest.raises(ExprError):
        PauliWord("XA")


def test_non_hermitian_has_no_expression():
    with pytest.raises(ExprError):
        from_dense(np.array([[0, 1], [0, 0]]))


@given(words(3), words(3))
def test_words_commute_or_anticommute_by_clash_parity(a, b):
    wa, wb = PauliWord(a), PauliWord(b)
    ma, mb = wa.to_dense(), wb.to_dense()
    clash = sum(x != y and "I" not in (x, y) for x, y in zip(a, b))
    if clash % 2 == 0:
        assert wa.commutes_with(wb)
        assert np.abs(commutator(ma, mb)).max() == 0
    else:
        assert not wa.commutes_with(wb)
        assert np.abs(anticommutator(ma, mb)).max() == 0


@pytest.mark.parametrize("word", all_words(2) + all_words(3))
def test_word_is_hermitian_involution(word):
    m = word.to_dense()
    assert is_hermitian(m, 0) and is_involutory(m, 0)
    assert abs(np.trace(m)) == (2**word.n_qubits if word.is_identity else 0)


@given(exprs(n=2), exprs(n=2), coefs, coefs)
def test_to_dense_is_linear(e1, e2, a, b):
    lhs = to_dense(e1 * a + e2 * b)
    rhs = a * to_dense(e1) + b * to_dense(e2)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(rhs).max())


@given(exprs())
def test_print_parse_round_trip(e):
    assert parse_expr(format_expr(e)) == e


@given(exprs())
def test_dense_round_trip(e):
    back = from_dense(to_dense(e))
    assert np.abs(to_dense(back) - to_dense(e)).max() < 1e-12


def test_canonical_order_is_lexicographic():
    e = parse_expr("ZZ + XY + IX")
    assert [w.letters for _, w in e.terms] == ["IX", "XY", "ZZ"]
    assert hash(e) == hash(parse_expr("IX + ZZ + XY"))


def test_rotated_builds_cos_sin_combination():
    e = rotated("ZZ", "YZ", math.pi / 8, sign_p=-1)
    assert e.as_dict() == pytest.approx({"YZ": math.sin(math.pi / 8), "ZZ": -math.cos(math.pi / 8)})
    assert is_involutory(to_dense(e))
