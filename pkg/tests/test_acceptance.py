"""Acceptance criteria, one test each.

Every test prints a ``PASS``/``FAIL`` (or ``INCONCLUSIVE``) line with the
measured numbers.  Run ``python3 tests/test_acceptance.py`` for the lines
alone, or ``pytest tests/test_acceptance.py -s`` to see them under pytest.
"""

from __future__ import annotations

import math
import sys
import time

import numpy as np
import pytest

from seqctx import canonical
from seqctx.contextuality import (
    ALGEBRAIC_MAX,
    SOS_BOUND,
    TERMS,
    db_optimal_formula,
    delta_value,
    noncontextual_bound,
    sandwich_values,
    sos_certificate,
    sos_optimal_value,
    witness_min_dimension,
)
from seqctx.linalg import random_density_matrix
from seqctx.measurement import MeasurementScheme, db_dp_cross_term, sequential_correlation
from seqctx.optimizer import SearchConfig, search_aux_observables, search_optimal_delta
from seqctx.pauli import to_dense

SQRT2 = math.sqrt(2)
SEED = 20240611


def timed(fn, repeats=1):
    """Result of ``fn`` and its best wall time over ``repeats`` runs."""
    best, out = math.inf, None
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return out, best


def report(number, title, ok, detail, status=None):
    status = status or ("PASS" if ok else "FAIL")
    line = f"{status} [{number:2d}] {title}: {detail}"
    print(line, file=sys.__stdout__, flush=True)
    return ok


# --------------------------------------------------------------------------


def criterion_1():
    (best, maximisers), secs = timed(noncontextual_bound, repeats=5)
    ok = best == 2 and isinstance(best, int) and secs < 1e-3
    return report(1, "non-contextual bound", ok, f"value {best} from 16 assignments, {secs * 1e3:.3f} ms")


def criterion_2():
    def run():
        value, _ = sos_optimal_value()
        return value, delta_value(canonical.canonical_scenario(2), "dp").value

    (sos, dp), secs = timed(run, repeats=3)
    ok = (
        abs(sos - SOS_BOUND) <= 1e-9
        and abs(dp - SOS_BOUND) <= 1e-9
        and round(dp, 8) == 2.82842712
        and secs < 1e-2
    )
    return report(2, "sum-of-squares optimum", ok, f"sos {sos:.10f}, coarse d=4 {dp:.10f}, {secs * 1e3:.2f} ms")


def _printed_formula(sc):
    names = ("N", "S", "F", "T")
    vals = [sandwich_values(sc, t, [to_dense(canonical.PRINTED_AUX_D4[nm])])[0] for t, nm in enumerate(names)]
    return delta_value(sc, "dp").value / 2 - 0.5 * (vals[0] + vals[1] + vals[2] - vals[3])


def criterion_3():
    def run():
        sc = canonical.canonical_scenario(2)
        return delta_value(sc, "db").value, _printed_formula(sc)

    (db, formula), secs = timed(run, repeats=3)
    ok = (
        round(db, 8) == 3.41421356
        and abs(db - (SQRT2 + 2)) <= 1e-9
        and abs(db - formula) <= 1e-10
        and secs < 0.05
    )
    return report(3, "d=4 fine-grained value", ok, f"channel {db:.10f}, formula {formula:.10f}, {secs * 1e3:.1f} ms")


def criterion_4():
    def run():
        sc = canonical.canonical_scenario(3)
        return delta_value(sc, "db").value, delta_value(sc, "dp").value

    (db, dp), secs = timed(run, repeats=3)
    target = 3 + 1 / SQRT2
    ok = abs(db - target) <= 1e-9 and abs(db - (dp / 4 + 3)) <= 1e-10 and secs < 0.2
    return report(
        4,
        "d=8 fine-grained value",
        ok,
        f"channel {db:.10f} vs {target:.10f} (gap {target - db:.3e}), coarse/4 + 3 = {dp / 4 + 3:.10f}, "
        f"{secs * 1e3:.1f} ms",
    )


def criterion_5():
    def run():
        return [db_optimal_formula(n) for n in (2, 3, 4)], db_optimal_formula(20)

    (values, v20), secs = timed(run, repeats=5)
    printed = (3.414, 3.707, 3.854)
    expected = (3.41421356, 3.70710678, 3.85355339)
    ok = (
        all(round(v, 3) == p for v, p in zip(values, printed))
        and all(abs(v - e) < 5e-9 for v, e in zip(values, expected))
        and abs(v20 - ALGEBRAIC_MAX) <= 1e-4
        and secs < 1e-3
    )
    shown = ", ".join(f"{v:.8f}" for v in values)
    return report(5, "closed form and table", ok, f"{shown}; n=20 {v20:.8f}; {secs * 1e3:.3f} ms")


def criterion_6():
    rng = np.random.default_rng(SEED)
    scenarios = [canonical.canonical_scenario(n) for n in (2, 3)]

    def run():
        worst = 0.0
        for sc in scenarios:
            for _ in range(100):
                state = random_density_matrix(sc.dim, rng)
                for i, j, _ in TERMS:
                    part, b = sc.partitions[i], sc.observables[j]
                    db = sequential_correlation(state, MeasurementScheme.db(part), b)
                    dp = sequential_correlation(state, sc.scheme(i, "dp"), b)
                    worst = max(worst, abs(db - (dp - db_dp_cross_term(state, part, b))))
        return worst

    worst, secs = timed(run)
    ok = worst < 1e-10 and secs < 2
    return report(6, "cross-term identity", ok, f"max deviation {worst:.2e} over 2x100 states, {secs:.2f} s")


def criterion_7():
    rng = np.random.default_rng(SEED + 1)
    scenarios = [canonical.canonical_scenario(n) for n in (2, 3)]

    def run():
        worst_gap, lowest = 0.0, math.inf
        for sc in scenarios:
            for _ in range(200):
                cert = sos_certificate(sc.with_state(random_density_matrix(sc.dim, rng)))
                worst_gap = max(worst_gap, abs(cert.gamma_expectation - cert.gamma_explicit))
                lowest = min(lowest, cert.gamma_expectation)
        return worst_gap, lowest

    (gap, lowest), secs = timed(run)
    ok = gap < 1e-10 and lowest >= -1e-10 and secs < 2
    return report(7, "sum-of-squares identity", ok, f"max gap {gap:.2e}, min gamma {lowest:.3e}, {secs:.2f} s")


def criterion_8():
    sc4, sc8 = canonical.canonical_scenario(2), canonical.canonical_scenario(3)
    names = ("N", "S", "F", "T")
    d4 = [sandwich_values(sc4, t, [to_dense(canonical.PRINTED_AUX_D4[nm])])[0] for t, nm in enumerate(names)]
    d8 = sandwich_values(sc8, 0, [to_dense(canonical.PRINTED_AUX_D8[k]) for k in ("N2", "N4", "N6")])
    err = max(
        max(abs(v - e) for v, e in zip(d4, (-1, -1, -1, 1))),
        max(abs(v - 1) for v in d8),
    )
    ok = err <= 1e-10
    shown = ", ".join(f"{v:+.10f}" for v in d4 + d8)
    return report(8, "sandwich conditions", ok, f"{shown} (max error {err:.1e})")


def criterion_9():
    worst, rank_one = 0.0, True
    for n in (2, 3):
        sc = canonical.canonical_scenario(n)
        eye = np.eye(sc.dim)
        for obs, part in zip(sc.observables, sc.partitions):
            projs = [b.projector for b in part.blocks]
            rank_one &= part.is_rank_one and part.k == sc.dim
            rank_one &= all(abs(np.trace(p).real - 1) <= 1e-12 for p in projs)
            worst = max(worst, np.abs(sum(projs) - eye).max())
            worst = max(worst, np.abs(part.signed_sum() - obs.op).max())
            for p in projs:
                worst = max(worst, np.abs(p @ p - p).max(), np.abs(p - p.conj().T).max())
            for a in range(len(projs)):
                for b in range(a + 1, len(projs)):
                    worst = max(worst, np.abs(projs[a] @ projs[b]).max())
    ok = rank_one and worst <= 1e-12
    return report(9, "projector validity", ok, f"all rank-one: {rank_one}, max residual {worst:.2e}")


def criterion_10():
    got = (witness_min_dimension(3.5), witness_min_dimension(SOS_BOUND), witness_min_dimension(1.9))
    ok = got == (8, 4, None)
    return report(10, "witness logic", ok, f"3.5 -> {got[0]}, 2sqrt2 -> {got[1]}, 1.9 -> {got[2]}")


# The seeds and restart counts below were fixed once and then frozen; the
# searches are deterministic, so the outcome does not change between runs.
SEARCHES = {
    "d4-dp": SearchConfig(dim=4, scheme="dp", restarts=4, seed=7),
    "d4-db": SearchConfig(dim=4, scheme="db", restarts=2, seed=7),
    "d2-dp": SearchConfig(dim=2, scheme="dp", restarts=4, seed=7),
}


def criterion_11():
    start = time.perf_counter()
    res = {name: search_optimal_delta(cfg) for name, cfg in SEARCHES.items()}
    secs = time.perf_counter() - start
    dp4, db4, dp2 = res["d4-dp"].best_value, res["d4-db"].best_value, res["d2-dp"].best_value
    feasible = all(r.residual < 1e-6 for r in res.values())
    ok = (
        dp4 >= SOS_BOUND - 1e-3
        and dp4 <= SOS_BOUND + 1e-6
        and db4 >= 3.414 - 1e-2
        and db4 <= SQRT2 + 2 + 1e-6
        and dp2 <= 2 + 1e-6
        and feasible
        and secs < 300
    )
    return report(
        11,
        "optimizer cross-check",
        ok,
        f"d=4 coarse {dp4:.8f}, d=4 fine {db4:.8f}, d=2 coarse {dp2:.8f}, "
        f"constraints met: {feasible}, {secs:.0f} s",
    )


STRETCH = SearchConfig(dim=16, scheme="db", restarts=1, max_iters=60000, seed=0)


def criterion_12():
    target = db_optimal_formula(4)
    res, secs = timed(lambda: search_aux_observables(canonical.padded_scenario(4), STRETCH))
    ok = abs(res.best_value - target) <= 1e-2
    report(
        12,
        "d=16 auxiliary search (stretch)",
        ok,
        f"best {res.best_value:.8f} vs {target:.8f}, coarse {res.dp_value:.8f}, {secs:.0f} s",
        status="PASS" if ok else "INCONCLUSIVE",
    )
    return ok


# --------------------------------------------------------------------------


@pytest.mark.parametrize(
    "criterion",
    [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
     criterion_7, criterion_8, criterion_9, criterion_10, criterion_11],
)
def test_criterion(criterion):
    assert criterion()


def test_criterion_12_stretch():
    if not criterion_12():
        pytest.skip("inconclusive: search stayed short of the closed-form value")


if __name__ == "__main__":
    results = [c() for c in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
                             criterion_7, criterion_8, criterion_9, criterion_10, criterion_11)]
    criterion_12()
    sys.exit(0 if all(results) else 1)
