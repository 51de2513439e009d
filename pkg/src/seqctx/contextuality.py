"""The four-term sequential functional, its bounds, and the dimension witness.

    Delta = <A1 A2> + <A2 A3> + <A3 A4> - <A4 A1>

Each term is a sequential correlation: the left observable is measured first
(coarsely or with a finer partition), the right one second.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .linalg import (
    TOL,
    DensityMatrix,
    anticommutator,
    as_operator,
    commutator,
    is_hermitian,
    is_involutory,
    max_dev,
)
from .measurement import (
    DichotomicObservable,
    MeasurementError,
    MeasurementScheme,
    ProjectorPartition,
    eigen_partition,
    refine_partition,
    sequential_correlation,
)

SQRT2 = math.sqrt(2.0)
NONCONTEXTUAL_BOUND = 2
SOS_BOUND = 2 * SQRT2
ALGEBRAIC_MAX = 4.0

# (first, second, sign) for each term of the functional, 0-based
TERMS = ((0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 0, -1))


class ScenarioError(ValueError):
    pass


def delta_assignment(values: Sequence[int]) -> int:
    v1, v2, v3, v4 = values
    return v1 * v2 + v2 * v3 + v3 * v4 - v4 * v1


def noncontextual_bound() -> tuple[int, list[tuple[int, ...]]]:
    """Maximum over all 16 deterministic +-1 assignments, with every maximiser."""
    scored = [(delta_assignment(v), v) for v in itertools.product((1, -1), repeat=4)]
    best = max(s for s, _ in scored)
    return best, [v for s, v in scored if s == best]


@dataclass(frozen=True, eq=False)
class Scenario:
    """Four observables, a state, and optional refining families per observable.

    ``db_aux[i]`` holds commuting involutions refining ``observables[i]``; an
    empty tuple means that observable has no fine-grained partition.
    """

    observables: tuple[DichotomicObservable, ...]
    state: DensityMatrix
    db_aux: tuple[tuple[np.ndarray, ...], ...] = ((), (), (), ())
    optimal: bool = False
    tol: float = TOL
    name: str = ""

    def __post_init__(self):
        if len(self.observables) != 4:
            raise ScenarioError(f"need four observables, got {len(self.observables)}")
        if len(self.db_aux) != 4:
            raise ScenarioError("db_aux needs one entry per observable")
        d = self.state.dim
        for i, obs in enumerate(self.observables):
            if obs.dim != d:
                raise ScenarioError(f"A{i + 1} has dimension {obs.dim}, state has {d}")
        for i, j, _ in TERMS:
            res = max_dev(commutator(self.observables[i].op, self.observables[j].op))
            if res > self.tol:
                raise ScenarioError(f"[A{i + 1}, A{j + 1}] != 0 (residual {res:.3g})")
        if self.optimal:
            for i, j in ((1, 3), (0, 2)):
                res = max_dev(anticommutator(self.observables[i].op, self.observables[j].op))
                if res > self.tol:
                    raise ScenarioError(f"{{A{i + 1}, A{j + 1}}} != 0 (residual {res:.3g})")
        try:
            self.partitions  # validates every refining family up front
        except MeasurementError as exc:
            raise ScenarioError(f"invalid refining family: {exc}") from exc

    @classmethod
    def from_operators(
        cls,
        ops: Sequence,
        state: DensityMatrix,
        aux: Sequence[Sequence] | None = None,
        optimal: bool = False,
        tol: float = TOL,
        name: str = "",
    ) -> Scenario:
        observables = tuple(eigen_partition(op, tol) for op in ops)
        aux_t = tuple(tuple(as_operator(a) for a in group) for group in (aux or ((),) * 4))
        return cls(observables, state, aux_t, optimal, tol, name)

    @property
    def dim(self) -> int:
        return self.state.dim

    @property
    def ops(self) -> list[np.ndarray]:
        return [o.op for o in self.observables]

    @cached_property
    def partitions(self) -> tuple[ProjectorPartition | None, ...]:
        return tuple(
            refine_partition(obs, aux, self.tol) if len(aux) else None
            for obs, aux in zip(self.observables, self.db_aux)
        )

    def scheme(self, index: int, kind: str) -> MeasurementScheme:
        obs = self.observables[index]
        if kind == "dp":
            return MeasurementScheme.dp(obs)
        if kind == "db":
            part = self.partitions[index]
            if part is None:
                raise ScenarioError(f"A{index + 1} has no refining family for a DB measurement")
            return MeasurementScheme.db(part)
        raise ScenarioError(f"unknown scheme {kind!r}; use 'dp' or 'db'")

    def with_state(self, state: DensityMatrix) -> Scenario:
        return Scenario(self.observables, state, self.db_aux, self.optimal, self.tol, self.name)


@dataclass(frozen=True)
class ViolationReport:
    scheme: str
    dim: int
    value: float
    per_term: tuple[float, float, float, float]
    k: int = 2
    bound_nc: float = NONCONTEXTUAL_BOUND
    bound_sos: float = SOS_BOUND
    witness_min_dim: int | None = None

    def as_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "dim": self.dim,
            "k": self.k,
            "value": self.value,
            "per_term": list(self.per_term),
            "bound_nc": self.bound_nc,
            "bound_sos": self.bound_sos,
            "witness_min_dim": self.witness_min_dim,
        }


def delta_value(scenario: Scenario, scheme: str = "dp") -> ViolationReport:
    """Evaluate the functional by simulating each sequential measurement."""
    per_term = []
    k = 2
    for i, j, _ in TERMS:
        first = scenario.scheme(i, scheme)
        k = max(k, first.partition.k)
        per_term.append(
            sequential_correlation(
                scenario.state, first, scenario.observables[j], scenario.tol
            )
        )
    value = sum(s * t for (_, _, s), t in zip(TERMS, per_term))
    label = "DP" if scheme == "dp" else f"DB({k})"
    return ViolationReport(
        scheme=label,
        dim=scenario.dim,
        value=value,
        per_term=tuple(per_term),
        k=k,
        witness_min_dim=witness_min_dimension(min(value, ALGEBRAIC_MAX)),
    )


def correlation_operator(scenario: Scenario, i: int, j: int) -> np.ndarray:
    a, b = scenario.observables[i].op, scenario.observables[j].op
    return (a @ b + b @ a) / 2


def _same_up_to(x: np.ndarray, y: np.ndarray, a: np.ndarray, tol: float) -> bool:
    return any(max_dev(x - s * z) <= tol for s in (1, -1) for z in (y, a @ y))


def twirl_group(obs: DichotomicObservable, aux: Sequence[np.ndarray], tol: float = TOL) -> list[np.ndarray]:
    """Representatives of the group generated by ``aux``, modulo sign and the observable.

    Includes the identity.  Dephasing in the joint eigenbasis of ``obs`` and
    ``aux`` equals the uniform average of ``h rho h`` over these elements.
    """
    a = obs.op
    elements = [np.eye(obs.dim, dtype=complex)]
    frontier = list(elements)
    while frontier:
        fresh = []
        for e in frontier:
            for g in aux:
                cand = e @ g
                if not any(_same_up_to(cand, x, a, tol) for x in elements + fresh):
                    fresh.append(cand)
        elements.extend(fresh)
        frontier = fresh
    return elements


def db_value_via_aux(scenario: Scenario) -> tuple[float, tuple[float, ...]]:
    """Fine-grained value rebuilt from the refining families, not from channels.

    Each term equals ``(1/m) * (<A_i A_j>_dp + sum_h <h (A_i A_j) h>)`` where
    ``h`` runs over the ``m - 1`` non-trivial twirl elements of A_i's family.
    """
    dp = delta_value(scenario, "dp").per_term
    terms = []
    for (i, j, _), base in zip(TERMS, dp):
        obs = scenario.observables[i]
        group = twirl_group(obs, scenario.db_aux[i], scenario.tol)
        part = scenario.partitions[i]
        if part is None:
            raise ScenarioError(f"A{i + 1} has no refining family")
        if 2 * len(group) != part.k:
            raise ScenarioError(
                f"A{i + 1}: twirl group of order {len(group)} does not match {part.k} blocks"
            )
        o = correlation_operator(scenario, i, j)
        rho = scenario.state.op
        extra = sum(float(np.trace(rho @ h @ o @ h).real) for h in group[1:])
        terms.append((base + extra) / len(group))
    return sum(s * t for (_, _, s), t in zip(TERMS, terms)), tuple(terms)


def sandwich_values(scenario: Scenario, index: int, ops: Sequence) -> list[float]:
    """``<N (A_i A_{i+1}) N>`` for each supplied N, with A_i the first of term ``index``."""
    i, j, _ = TERMS[index]
    o = correlation_operator(scenario, i, j)
    rho = scenario.state.op
    return [float(np.trace(rho @ n @ o @ n).real) for n in map(as_operator, ops)]


@dataclass(frozen=True)
class SosCertificate:
    omega1: float
    omega2: float
    gamma_expectation: float
    gamma_explicit: float
    delta_dp: float
    l1_residual: float
    l2_residual: float


def sos_certificate(scenario: Scenario) -> SosCertificate:
    """Sum-of-squares decomposition of the functional for the coarse scheme.

    The gap ``omega1 + omega2 - Delta`` is computed both directly and as
    ``(omega1 <L1^dag L1> + omega2 <L2^dag L2>) / 2``.
    """
    a1, a2, a3, a4 = scenario.ops
    rho = scenario.state.op
    tol = scenario.tol
    anti = float(np.trace(rho @ anticommutator(a2, a4)).real)
    omega1 = math.sqrt(max(2 - anti, 0.0))
    omega2 = math.sqrt(max(2 + anti, 0.0))
    if omega1 <= tol or omega2 <= tol:
        raise ScenarioError(
            f"degenerate norm: omega1={omega1:.3g}, omega2={omega2:.3g}"
        )
    delta_dp = delta_value(scenario, "dp").value
    l1 = (a2 - a4) / omega1 - a1
    l2 = (a2 + a4) / omega2 - a3
    q1 = float(np.trace(rho @ l1.conj().T @ l1).real)
    q2 = float(np.trace(rho @ l2.conj().T @ l2).real)
    return SosCertificate(
        omega1=omega1,
        omega2=omega2,
        gamma_expectation=omega1 + omega2 - delta_dp,
        gamma_explicit=0.5 * (omega1 * q1 + omega2 * q2),
        delta_dp=delta_dp,
        l1_residual=float(np.linalg.norm(l1 @ rho)),
        l2_residual=float(np.linalg.norm(l2 @ rho)),
    )


def sos_optimal_value() -> tuple[float, float]:
    """Maximise ``sqrt(2 - x) + sqrt(2 + x)`` over the anticommutator range."""
    res = minimize_scalar(
        lambda x: -(math.sqrt(2 - x) + math.sqrt(2 + x)),
        bounds=(-2.0, 2.0),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return -float(res.fun), float(res.x)


def optimality_residuals(scenario: Scenario) -> tuple[float, float]:
    """Deviation from ``A1 rho = (A2-A4)/sqrt2 rho`` and ``A3 rho = (A2+A4)/sqrt2 rho``."""
    a1, a2, a3, a4 = scenario.ops
    rho = scenario.state.op
    return (
        max_dev(a1 @ rho - (a2 - a4) @ rho / SQRT2),
        max_dev(a3 @ rho - (a2 + a4) @ rho / SQRT2),
    )


def state_generators(observables: Sequence) -> tuple[np.ndarray, np.ndarray]:
    a1, a2, a3, a4 = map(as_operator, observables)
    return a1 @ (a2 - a4) / SQRT2, a3 @ (a2 + a4) / SQRT2


def build_state(
    n: int,
    observables: Sequence,
    c_set: Sequence = (),
    signs: Sequence[int] | None = None,
    tol: float = TOL,
) -> DensityMatrix:
    """``(I + G1 + G2 + sum_k eta_k C_k) / 2^n`` from commuting involutions.

    ``G1 = A1 (A2 - A4)/sqrt2`` and ``G2 = A3 (A2 + A4)/sqrt2``.  The result
    is pure only when the generators fix a one-dimensional joint eigenspace;
    check ``DensityMatrix.is_pure``.
    """
    dim = 2**n
    g1, g2 = state_generators(observables)
    if g1.shape != (dim, dim):
        raise ScenarioError(f"observables have dimension {g1.shape[0]}, expected {dim}")
    signs = [1] * len(c_set) if signs is None else list(signs)
    if len(signs) != len(c_set) or any(s not in (1, -1) for s in signs):
        raise ScenarioError("signs must be +-1, one per C_k")
    gens = [("G1", g1), ("G2", g2)] + [
        (f"C{k + 1}", s * as_operator(c)) for k, (s, c) in enumerate(zip(signs, c_set))
    ]
    for name, g in gens:
        if not is_hermitian(g, tol) or not is_involutory(g, tol):
            raise ScenarioError(f"{name} is not a Hermitian involution")
    for (na, ga), (nb, gb) in itertools.combinations(gens, 2):
        if max_dev(commutator(ga, gb)) > tol:
            raise ScenarioError(f"{na} and {nb} do not commute")
    rho = (np.eye(dim) + sum(g for _, g in gens)) / dim
    try:
        return DensityMatrix(rho, tol)
    except ValueError as exc:
        raise ScenarioError(f"generators do not define a state: {exc}") from exc


def db_optimal_formula(n: int) -> float:
    """Closed-form fine-grained optimum claimed for dimension ``2^n``."""
    if n < 2:
        raise ValueError(f"n={n}: the formula needs n >= 2")
    return SOS_BOUND / 2 ** (n - 1) + (2 ** (n - 1) - 1) / 2 ** (n - 3)


def witness_min_dimension(observed_value: float, tol: float = TOL, max_n: int = 64) -> int | None:
    """Smallest ``d = 2^n`` whose optimum reaches ``observed_value``.

    Returns ``None`` for values within the non-contextual bound, which certify
    nothing.  A value at an optimum counts as attained at that dimension.
    """
    if observed_value > ALGEBRAIC_MAX + tol:
        raise ValueError(
            f"value {observed_value} exceeds the algebraic maximum {ALGEBRAIC_MAX}"
        )
    if observed_value <= NONCONTEXTUAL_BOUND + tol:
        return None
    for n in range(2, max_n + 1):
        if db_optimal_formula(n) >= observed_value - tol:
            return 2**n
    return 2**max_n


def witness_table(max_n: int) -> list[tuple[int | float, float]]:
    """Rows ``(d, optimum)`` for ``n = 2..max_n`` plus the ``(inf, 4)`` limit row."""
    if max_n < 2:
        raise ValueError("max_n must be >= 2")
    rows: list[tuple[int | float, float]] = [(2**n, db_optimal_formula(n)) for n in range(2, max_n + 1)]
    rows.append((math.inf, ALGEBRAIC_MAX))
    return rows
