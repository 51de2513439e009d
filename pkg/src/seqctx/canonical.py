"""Compiled-in two- and three-qubit scenarios.

Observables and states are the standard Pauli choices.  Two families of
auxiliary operators are kept per dimension:

``PRINTED_AUX_*``
    The reference auxiliary operators, exactly as listed.  They satisfy the
    reference sandwich values but are not all usable as refining families
    (at two qubits the A2 and A4 operators do not commute with their
    observables; at three qubits the third operator anticommutes with the
    other two).

``db_aux`` of :func:`canonical_scenario`
    Commuting refining families that do define rank-one partitions.  At two
    qubits they reach the fine-grained optimum; at three qubits they are the
    closure-completed group families (see README for the values reached).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .contextuality import Scenario, ScenarioError, build_state, state_generators
from .linalg import DensityMatrix
from .pauli import OperatorExpr, parse_expr, rotated, to_dense

C8 = math.cos(math.pi / 8)
S8 = math.sin(math.pi / 8)
_PI8 = math.pi / 8

OBSERVABLES = {
    2: ("XX", "ZY", "XZ", "YY"),
    3: ("XXX", "ZXZ", "YXX", "ZXY"),
}

# explicit reference states, scaled by 2^n
_STATE_TEXT = {
    2: "II + 1/sqrt2*ZZ + 1/sqrt2*YZ + 1/sqrt2*ZX - 1/sqrt2*YX - XY",
    3: (
        "III - 1/sqrt2*YIY - 1/sqrt2*YIZ + 1/sqrt2*XIY - 1/sqrt2*XIZ"
        " - 1/sqrt2*YXY - 1/sqrt2*YXZ + 1/sqrt2*XXY - 1/sqrt2*XXZ"
        " + ZIX + IXI + ZXX"
    ),
}

PRINTED_AUX_D4 = {
    "N": OperatorExpr([(-C8, "ZZ"), (S8, "YZ")]),
    "S": OperatorExpr([(S8, "YX"), (C8, "ZX")]),
    "F": OperatorExpr([(S8, "ZX"), (C8, "YX")]),
    "T": OperatorExpr([(C8, "YZ"), (-S8, "ZZ")]),
}

PRINTED_AUX_D8 = {
    "N2": OperatorExpr([(S8, "XZY"), (-C8, "XZZ")]),
    "N4": OperatorExpr([(S8, "IYZ"), (C8, "IYY")]),
    "N6": OperatorExpr([(C8, "IZY"), (S8, "IZZ")]),
}

# one generator per observable at two qubits; each gives <N o N> = +-1 with
# the sign that raises its term of the functional
_GENERATORS_D4 = (
    (rotated("YZ", "ZZ", _PI8),),
    (rotated("YX", "YZ", _PI8, sign_p=-1.0),),
    (rotated("ZX", "YX", _PI8, sign_q=-1.0),),
    (rotated("ZZ", "ZX", _PI8),),
)

# two commuting generators per observable at three qubits.  The listed N2
# and N4 multiply to A1, so they only split A1 into pairs; A1 keeps N2 (its
# family then contains N4 = A1 N2) and gains YYI to reach rank one.
_GENERATORS_D8 = (
    (PRINTED_AUX_D8["N2"], OperatorExpr.word("YYI")),
    (rotated("XXY", "YXY", _PI8, sign_p=-1.0), rotated("YXX", "XXX", _PI8)),
    (rotated("XIZ", "XXY", _PI8, sign_p=-1.0), rotated("XYI", "XZX", _PI8)),
    (rotated("ZZX", "IYX", _PI8), rotated("YYI", "XYI", _PI8)),
)


def observable_ops(n: int) -> list[np.ndarray]:
    _check_n(n)
    return [to_dense(w) for w in OBSERVABLES[n]]


def explicit_state(n: int) -> DensityMatrix:
    """The reference explicit state for ``n`` qubits."""
    _check_n(n)
    return DensityMatrix(to_dense(parse_expr(_STATE_TEXT[n])) / 2**n)


def state_c_set(n: int) -> list[np.ndarray]:
    """Extra commuting generators that make the built state pure.

    Two qubits: ``C1 = G1 G2``.  Three qubits: ``G1 G2`` together with ``IXI``
    and its products with ``G1``, ``G2`` and ``G1 G2``.
    """
    _check_n(n)
    g1, g2 = state_generators(observable_ops(n))
    if n == 2:
        return [g1 @ g2]
    k = to_dense("IXI")
    return [g1 @ g2, k, k @ g1, k @ g2, k @ g1 @ g2]


def refining_family(n: int, index: int) -> tuple[np.ndarray, ...]:
    """Full commuting family for observable ``index`` (0-based).

    Two qubits: ``(M, N)`` with ``M = A N``.  Three qubits:
    ``(N1, ..., N6)`` with ``N1 = A N2``, ``N3 = A N4``, ``N6 = N2 N4`` and
    ``N5 = A N6``.
    """
    _check_n(n)
    a = observable_ops(n)[index]
    if n == 2:
        (gen,) = _GENERATORS_D4[index]
        nn = to_dense(gen)
        return (a @ nn, nn)
    g_even, g_odd = (to_dense(g) for g in _GENERATORS_D8[index])
    n6 = g_even @ g_odd
    return (a @ g_even, g_even, a @ g_odd, g_odd, a @ n6, n6)


def canonical_scenario(n: int) -> Scenario:
    _check_n(n)
    ops = observable_ops(n)
    state = explicit_state(n)
    aux = [refining_family(n, i) for i in range(4)]
    return Scenario.from_operators(ops, state, aux, optimal=True, name=f"canonical-{n}q")


def built_state(n: int) -> DensityMatrix:
    """The same state assembled from commuting generators."""
    return build_state(n, observable_ops(n), state_c_set(n))


def _check_n(n: int) -> None:
    if n not in (2, 3):
        raise ScenarioError(f"canonical scenarios exist for n=2 and n=3 qubits, not n={n}")


def padded_scenario(n: int) -> Scenario:
    """Two-qubit observables padded with identities up to ``n`` qubits.

    The state comes from :func:`build_state`, with ``G1 G2`` and a ``Z`` on each
    extra qubit generating the ``C`` set, so it is the two-qubit optimum times
    ``|0..0>``.  The
    scenario has no refining families; it is the starting point for an
    auxiliary-operator search.
    """
    if n < 2:
        raise ScenarioError(f"n={n}: need at least two qubits")
    pad = n - 2
    ops = [to_dense(w + "I" * pad) for w in OBSERVABLES[2]]
    g1, g2 = state_generators(ops)
    zs = [to_dense("II" + "I" * q + "Z" + "I" * (pad - q - 1)) for q in range(pad)]
    # every group element other than I, G1, G2
    c_set = []
    for bits in itertools.product((0, 1), repeat=pad + 2):
        if sum(bits) == 0 or bits in ((1, 0) + (0,) * pad, (0, 1) + (0,) * pad):
            continue
        op = np.eye(2**n, dtype=complex)
        for bit, g in zip(bits, [g1, g2] + zs):
            if bit:
                op = op @ g
        c_set.append(op)
    state = build_state(n, ops, c_set)
    return Scenario.from_operators(ops, state, optimal=True, name=f"padded-{n}q")
