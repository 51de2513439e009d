"""Self-checks behind ``ctx verify``.

Each check returns a residual; it passes when the residual is within its
tolerance.  Checks are grouped by module so a single group can be run.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import canonical
from .contextuality import (
    ALGEBRAIC_MAX,
    SOS_BOUND,
    SQRT2,
    TERMS,
    db_optimal_formula,
    db_value_via_aux,
    delta_value,
    noncontextual_bound,
    optimality_residuals,
    sandwich_values,
    sos_certificate,
    sos_optimal_value,
    witness_min_dimension,
    witness_table,
)
from .linalg import (
    anticommutator,
    commutator,
    expectation,
    is_density,
    is_hermitian,
    is_involutory,
    max_dev,
    random_density_matrix,
)
from .measurement import (
    MeasurementScheme,
    coarse_partition,
    db_channel,
    db_dp_cross_term,
    dp_channel,
    sequential_correlation,
)
from .pauli import OperatorExpr, all_words, format_expr, parse_expr, to_dense

MODULES = ("core-algebra", "measurement", "contextuality", "optimizer", "cli")
CHECK_SEED = 20240611


@dataclass(frozen=True)
class Check:
    module: str
    name: str
    func: Callable[[], float]
    tol: float
    slow: bool = False


@dataclass(frozen=True)
class CheckResult:
    module: str
    name: str
    residual: float
    tol: float
    passed: bool
    seconds: float
    error: str = ""


_REGISTRY: list[Check] = []


def check(module: str, name: str, tol: float = 1e-10, slow: bool = False):
    def wrap(func):
        _REGISTRY.append(Check(module, name, func, tol, slow))
        return func

    return wrap


def _rng() -> np.random.Generator:
    return np.random.default_rng(CHECK_SEED)


def _flag(ok: bool) -> float:
    return 0.0 if ok else 1.0


# core-algebra ---------------------------------------------------------------


@check("core-algebra", "pauli words commute or anticommute by overlap parity", tol=0.0)
def _pauli_parity() -> float:
    worst = 0.0
    words = all_words(2)
    for a, b in itertools.product(words, repeat=2):
        clash = sum(x != y and "I" not in (x, y) for x, y in zip(a.letters, b.letters))
        ma, mb = a.to_dense(), b.to_dense()
        residual = commutator(ma, mb) if clash % 2 == 0 else anticommutator(ma, mb)
        worst = max(worst, max_dev(residual))
    return worst


@check("core-algebra", "pauli words are hermitian involutions, traceless unless identity", tol=0.0)
def _pauli_words() -> float:
    bad = 0
    for w in all_words(3):
        m = w.to_dense()
        traceless = abs(np.trace(m)) < 1e-12
        bad += not (is_hermitian(m, 0) and is_involutory(m, 0) and (traceless != w.is_identity))
    return float(bad)


@check("core-algebra", "to_dense is linear", tol=1e-12)
def _linearity() -> float:
    rng = _rng()
    e1, e2 = parse_expr("XZ - 0.5*YY + IZ"), parse_expr("ZZ + 1/sqrt2*XY")
    a, b = rng.normal(size=2)
    return max_dev(to_dense(e1 * a + e2 * b) - (a * to_dense(e1) + b * to_dense(e2)))


@check("core-algebra", "parse and print round-trip on canonical forms", tol=0.0)
def _round_trip() -> float:
    exprs = [
        canonical.PRINTED_AUX_D4["N"],
        canonical.PRINTED_AUX_D8["N6"],
        parse_expr(canonical._STATE_TEXT[3]),
        parse_expr("0.5*II - 0.5*ZZ"),
    ]
    return float(sum(parse_expr(format_expr(e)) != e for e in exprs))


@check("core-algebra", "two-qubit state gives <YZ> = 1/sqrt2")
def _yz_expectation() -> float:
    return abs(expectation(canonical.explicit_state(2), to_dense("YZ")) - 1 / SQRT2)


@check("core-algebra", "neighbours commute and A2, A4 anticommute at two qubits")
def _two_qubit_relations() -> float:
    xx, zy, yy = to_dense("XX"), to_dense("ZY"), to_dense("YY")
    return max(max_dev(commutator(xx, zy)), max_dev(anticommutator(zy, yy)))


@check("core-algebra", "three-qubit explicit state is a density matrix", tol=0.0)
def _d8_density() -> float:
    return _flag(is_density(canonical.explicit_state(3).op))


# measurement ----------------------------------------------------------------


def _random_states(dims=(4, 8, 16), count: int = 20):
    rng = _rng()
    for d in dims:
        for _ in range(count):
            yield random_density_matrix(d, rng)


def _random_partition(d: int, rng: np.random.Generator):
    from .measurement import eigen_partition, split_partition

    diag = np.diag([1.0] * (d // 2) + [-1.0] * (d // 2))
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    u, _ = np.linalg.qr(z)
    obs = eigen_partition(u @ diag @ u.conj().T)
    return obs, split_partition(obs, d, u)


@check("measurement", "channels preserve trace", tol=1e-12)
def _trace_preservation() -> float:
    rng = _rng()
    worst = 0.0
    for state in _random_states():
        obs, part = _random_partition(state.dim, rng)
        for out in (dp_channel(state, obs), db_channel(state, part)):
            worst = max(worst, abs(np.trace(out.op) - 1))
    return worst


@check("measurement", "channel outputs are density matrices", tol=0.0)
def _positivity() -> float:
    rng = _rng()
    bad = 0
    for state in _random_states(count=5):
        obs, part = _random_partition(state.dim, rng)
        bad += not is_density(dp_channel(state, obs).op)
        bad += not is_density(db_channel(state, part).op)
    return float(bad)


@check("measurement", "rank-one dephasing is idempotent", tol=1e-12)
def _idempotence() -> float:
    rng = _rng()
    worst = 0.0
    for state in _random_states(count=5):
        _, part = _random_partition(state.dim, rng)
        once = db_channel(state, part)
        worst = max(worst, max_dev(db_channel(once, part).op - once.op))
    return worst


@check("measurement", "two-block partition reproduces the coarse channel", tol=0.0)
def _db_to_dp() -> float:
    rng = _rng()
    worst = 0.0
    for state in _random_states(count=5):
        obs, _ = _random_partition(state.dim, rng)
        worst = max(worst, max_dev(db_channel(state, coarse_partition(obs)).op - dp_channel(state, obs).op))
    return worst


@check("measurement", "fine-grained correlation equals coarse minus cross term")
def _cross_term_identity() -> float:
    rng = _rng()
    worst = 0.0
    for n in (2, 3):
        sc = canonical.canonical_scenario(n)
        for _ in range(25):
            state = random_density_matrix(sc.dim, rng)
            for i, j, _ in TERMS:
                part = sc.partitions[i]
                b = sc.observables[j]
                db = sequential_correlation(state, MeasurementScheme.db(part), b)
                dp = sequential_correlation(state, sc.scheme(i, "dp"), b)
                worst = max(worst, abs(db - (dp - db_dp_cross_term(state, part, b))))
    return worst


@check("measurement", "coarse correlation of commuting pair equals <AB>")
def _commuting_correlation() -> float:
    sc = canonical.canonical_scenario(2)
    rng = _rng()
    worst = 0.0
    for _ in range(20):
        state = random_density_matrix(4, rng)
        for i, j, _ in TERMS:
            a, b = sc.observables[i], sc.observables[j]
            corr = sequential_correlation(state, MeasurementScheme.dp(a), b)
            worst = max(worst, abs(corr - expectation(state, a.op @ b.op)))
    return worst


@check("measurement", "canonical partitions are complete, orthogonal, rank-one", tol=1e-12)
def _canonical_partitions() -> float:
    worst = 0.0
    for n in (2, 3):
        sc = canonical.canonical_scenario(n)
        if not all(p.is_rank_one and p.k == sc.dim for p in sc.partitions):
            return 1.0
        for obs, part in zip(sc.observables, sc.partitions):
            d = sc.dim
            projs = [b.projector for b in part.blocks]
            worst = max(worst, max_dev(sum(projs) - np.eye(d)))
            worst = max(worst, max_dev(part.signed_sum() - obs.op))
            for p, q in itertools.combinations(projs, 2):
                worst = max(worst, max_dev(p @ q))
            for p in projs:
                worst = max(worst, max_dev(p @ p - p))
    return worst


@check("measurement", "two-qubit fine-grained <A1 A2> = 1/(2 sqrt2) + 1/2")
def _d4_term() -> float:
    sc = canonical.canonical_scenario(2)
    value = sequential_correlation(sc.state, sc.scheme(0, "db"), sc.observables[1])
    return abs(value - (1 / (2 * SQRT2) + 0.5))


@check("measurement", "two-qubit cross term = 1/(2 sqrt2) - 1/2")
def _d4_cross() -> float:
    sc = canonical.canonical_scenario(2)
    value = db_dp_cross_term(sc.state, sc.partitions[0], sc.observables[1])
    return abs(value - (1 / (2 * SQRT2) - 0.5))


# contextuality --------------------------------------------------------------


@check("contextuality", "non-contextual bound is 2 by enumeration", tol=0.0)
def _nc_bound() -> float:
    best, maximisers = noncontextual_bound()
    return float(abs(best - 2)) + _flag(len(maximisers) == 8)


@check("contextuality", "sum-of-squares optimum is 2 sqrt2", tol=1e-6)
def _sos_value() -> float:
    value, x = sos_optimal_value()
    return max(abs(value - SOS_BOUND), abs(x))


@check("contextuality", "coarse value is 2 sqrt2 at two and three qubits", tol=1e-9)
def _dp_values() -> float:
    return max(abs(delta_value(canonical.canonical_scenario(n), "dp").value - SOS_BOUND) for n in (2, 3))


@check("contextuality", "two-qubit fine-grained value is sqrt2 + 2", tol=1e-9)
def _d4_db() -> float:
    return abs(delta_value(canonical.canonical_scenario(2), "db").value - (SQRT2 + 2))


@check("contextuality", "fine-grained value matches the twirl recomputation")
def _twirl() -> float:
    worst = 0.0
    for n in (2, 3):
        sc = canonical.canonical_scenario(n)
        worst = max(worst, abs(delta_value(sc, "db").value - db_value_via_aux(sc)[0]))
    return worst


@check("contextuality", "printed two-qubit sandwich values are -1, -1, -1, +1")
def _d4_sandwich() -> float:
    sc = canonical.canonical_scenario(2)
    names = ("N", "S", "F", "T")
    expected = (-1, -1, -1, 1)
    return max(
        abs(sandwich_values(sc, t, [to_dense(canonical.PRINTED_AUX_D4[nm])])[0] - e)
        for t, (nm, e) in enumerate(zip(names, expected))
    )


@check("contextuality", "printed sandwich formula gives sqrt2 + 2")
def _d4_printed_formula() -> float:
    sc = canonical.canonical_scenario(2)
    names = ("N", "S", "F", "T")
    vals = [sandwich_values(sc, t, [to_dense(canonical.PRINTED_AUX_D4[nm])])[0] for t, nm in enumerate(names)]
    formula = delta_value(sc, "dp").value / 2 - 0.5 * (vals[0] + vals[1] + vals[2] - vals[3])
    return abs(formula - (SQRT2 + 2))


@check("contextuality", "printed three-qubit sandwich values are +1")
def _d8_sandwich() -> float:
    sc = canonical.canonical_scenario(3)
    ops = [to_dense(canonical.PRINTED_AUX_D8[k]) for k in ("N2", "N4", "N6")]
    return max(abs(v - 1) for v in sandwich_values(sc, 0, ops))


@check("contextuality", "three-qubit fine-grained value is 3 + 1/sqrt2", tol=1e-9)
def _d8_db() -> float:
    return abs(delta_value(canonical.canonical_scenario(3), "db").value - (3 + 1 / SQRT2))


@check("contextuality", "three-qubit fine-grained value is coarse/4 + 3")
def _d8_relation() -> float:
    sc = canonical.canonical_scenario(3)
    return abs(delta_value(sc, "db").value - (delta_value(sc, "dp").value / 4 + 3))


@check("contextuality", "sum-of-squares gap agrees both ways and is non-negative")
def _sos_identity() -> float:
    rng = _rng()
    worst = 0.0
    for n in (2, 3):
        sc = canonical.canonical_scenario(n)
        for _ in range(50):
            cert = sos_certificate(sc.with_state(random_density_matrix(sc.dim, rng)))
            worst = max(worst, abs(cert.gamma_expectation - cert.gamma_explicit))
            worst = max(worst, -cert.gamma_expectation)
    return worst


@check("contextuality", "built states equal the explicit states and are pure")
def _built_states() -> float:
    worst = 0.0
    for n in (2, 3):
        built = canonical.built_state(n)
        worst = max(worst, max_dev(built.op - canonical.explicit_state(n).op))
        worst = max(worst, abs(built.purity() - 1))
    return worst


@check("contextuality", "optimal states satisfy the eigenoperator relations")
def _eigen_relations() -> float:
    return max(max(optimality_residuals(canonical.canonical_scenario(n))) for n in (2, 3))


@check("contextuality", "closed form gives 3.414, 3.707, 3.854 and tends to 4", tol=5e-4)
def _formula() -> float:
    table = (3.414, 3.707, 3.854)
    worst = max(abs(db_optimal_formula(n) - v) for n, v in zip((2, 3, 4), table))
    values = [db_optimal_formula(n) for n in range(2, 21)]
    worst += _flag(all(b > a for a, b in zip(values, values[1:])))
    worst += _flag(abs(values[-1] - ALGEBRAIC_MAX) < 1e-4)
    worst += _flag([r[0] for r in witness_table(4)] == [4, 8, 16, math.inf])
    return worst


@check("contextuality", "witness gives 8 for 3.5, 4 for 2 sqrt2, none for 1.9", tol=0.0)
def _witness() -> float:
    got = (witness_min_dimension(3.5), witness_min_dimension(SOS_BOUND), witness_min_dimension(1.9))
    return _flag(got == (8, 4, None))


# optimizer ------------------------------------------------------------------


@check("optimizer", "parameterised observables: zero gives Z, a half-turn gives X", tol=1e-12)
def _param_examples() -> float:
    from .optimizer import parameterize_observable

    z = parameterize_observable(np.zeros(2), 2).op
    x = parameterize_observable(np.array([math.pi / 2, 0.0]), 2).op
    return max(max_dev(z - to_dense("Z")), min(max_dev(x - to_dense("X")), max_dev(x + to_dense("X"))))


@check("optimizer", "parameterised observables have a balanced +-1 spectrum", tol=1e-10)
def _param_spectrum() -> float:
    from .optimizer import n_params, parameterize_observable

    rng = _rng()
    worst = 0.0
    for d in (2, 4, 8):
        for full in (True, False):
            obs = parameterize_observable(rng.uniform(-3, 3, n_params(d, full)), d)
            spec = np.sort(np.linalg.eigvalsh(obs.op))
            worst = max(worst, max_dev(spec - np.repeat([-1.0, 1.0], d // 2)))
    return worst


@check("optimizer", "aux search with no budget reports the coarse value", tol=1e-12)
def _aux_zero() -> float:
    from .optimizer import SearchConfig, search_aux_observables

    sc = canonical.padded_scenario(2)
    res = search_aux_observables(sc, SearchConfig(dim=4, scheme="db", restarts=1, max_iters=0))
    return abs(res.best_value - res.dp_value) + _flag(not res.found and res.operators is None)


@check("optimizer", "aux search recovers sqrt2 + 2 at two qubits", tol=1e-9)
def _aux_d4() -> float:
    from .optimizer import SearchConfig, search_aux_observables

    sc = canonical.padded_scenario(2)
    res = search_aux_observables(sc, SearchConfig(dim=4, scheme="db", restarts=1, max_iters=100))
    return abs(res.best_value - (SQRT2 + 2)) + _flag(res.found)


@check("optimizer", "two-dimensional coarse search stays at 2", tol=1e-6, slow=True)
def _search_d2() -> float:
    from .optimizer import SearchConfig, search_optimal_delta

    res = search_optimal_delta(SearchConfig(dim=2, scheme="dp", restarts=2, seed=7))
    return max(res.best_value - 2, 0.0)


@check("optimizer", "four-dimensional coarse search reaches 2 sqrt2", tol=1e-3, slow=True)
def _search_d4() -> float:
    from .optimizer import SearchConfig, search_optimal_delta

    res = search_optimal_delta(SearchConfig(dim=4, scheme="dp", restarts=1, seed=7))
    if res.best_value > SOS_BOUND + 1e-6:
        return math.inf
    return SOS_BOUND - res.best_value


# cli ------------------------------------------------------------------------


@check("cli", "scenario JSON round-trips", tol=1e-9)
def _scenario_round_trip() -> float:
    import json

    from .scenario_io import scenario_from_dict, scenario_to_dict

    worst = 0.0
    for n in (2, 3):
        sc = canonical.canonical_scenario(n)
        back = scenario_from_dict(json.loads(json.dumps(scenario_to_dict(sc))))
        for kind in ("dp", "db"):
            worst = max(worst, abs(delta_value(back, kind).value - delta_value(sc, kind).value))
    return worst


@check("cli", "operator expressions print with explicit signs", tol=0.0)
def _printer() -> float:
    expr = OperatorExpr([(0.5, "II"), (-0.5, "ZZ")])
    return _flag(format_expr(expr) == "0.5*II - 0.5*ZZ")


def registered(module: str | None = None, with_optimizer: bool = False) -> list[Check]:
    if module is not None and module not in MODULES:
        raise ValueError(f"unknown module {module!r}; choose from {', '.join(MODULES)}")
    return [
        c
        for c in _REGISTRY
        if (module is None or c.module == module) and (with_optimizer or not c.slow)
    ]


def run_checks(module: str | None = None, with_optimizer: bool = False) -> list[CheckResult]:
    results = []
    for c in registered(module, with_optimizer):
        start = time.perf_counter()
        try:
            residual = float(c.func())
            error = ""
        except Exception as exc:  # a crashing check is a failing check
            residual, error = math.inf, f"{type(exc).__name__}: {exc}"
        passed = residual <= c.tol
        results.append(
            CheckResult(c.module, c.name, residual, c.tol, passed, time.perf_counter() - start, error)
        )
    return results
