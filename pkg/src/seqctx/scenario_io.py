"""Scenario files: JSON with Pauli-expression operators.

::

    {
      "n_qubits": 2,
      "observables": ["XX", "ZY", "XZ", "YY"],
      "state": "canonical" | "<expr>",
      "aux": {"1": ["<expr>", ...], ...},
      "optimal": false,
      "tolerance": 1e-9,
      "optimizer": {...}
    }

``aux`` keys are 1-based observable indices.  A ``"canonical"`` state means
the built state for the compiled-in observables at that size, or the
two-qubit ``C1 = G1 G2`` construction for other two-qubit observables.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .contextuality import Scenario, ScenarioError, build_state, state_generators
from .linalg import TOL, DensityMatrix
from .pauli import ExprError, format_expr, from_dense, parse_expr, to_dense


class ScenarioFileError(ValueError):
    """Unreadable or schema-violating scenario file."""


def _expr_op(text, n: int, where: str) -> np.ndarray:
    if not isinstance(text, str):
        raise ScenarioFileError(f"{where}: expected an expression string, got {type(text).__name__}")
    try:
        expr = parse_expr(text)
    except ExprError as exc:
        raise ScenarioFileError(f"{where}: {exc}") from exc
    if expr.n_qubits != n:
        raise ScenarioFileError(f"{where}: {expr.n_qubits} qubits, expected {n}")
    return to_dense(expr)


def _canonical_state(n: int, ops: list[np.ndarray]) -> DensityMatrix:
    from . import canonical

    if n in canonical.OBSERVABLES and all(
        np.allclose(a, b) for a, b in zip(ops, canonical.observable_ops(n))
    ):
        return canonical.built_state(n)
    if n == 2:
        g1, g2 = state_generators(ops)
        return build_state(2, ops, [g1 @ g2])
    raise ScenarioFileError(
        f"no canonical state for these {n}-qubit observables; give the state explicitly"
    )


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioFileError("scenario must be a JSON object")
    try:
        n = data["n_qubits"]
        obs_text = data["observables"]
    except KeyError as exc:
        raise ScenarioFileError(f"missing field {exc.args[0]!r}") from exc
    if not isinstance(n, int) or n < 1:
        raise ScenarioFileError(f"n_qubits must be a positive integer, got {n!r}")
    if not isinstance(obs_text, list) or len(obs_text) != 4:
        raise ScenarioFileError("observables must be a list of four expressions")
    ops = [_expr_op(t, n, f"observables[{i}]") for i, t in enumerate(obs_text)]

    aux_data = data.get("aux", {}) or {}
    if not isinstance(aux_data, dict):
        raise ScenarioFileError("aux must be an object keyed by observable index 1..4")
    aux: list[list[np.ndarray]] = [[], [], [], []]
    for key, items in aux_data.items():
        if str(key) not in {"1", "2", "3", "4"}:
            raise ScenarioFileError(f"aux key {key!r} is not an observable index 1..4")
        if not isinstance(items, list):
            raise ScenarioFileError(f"aux[{key}] must be a list of expressions")
        aux[int(key) - 1] = [_expr_op(t, n, f"aux[{key}][{j}]") for j, t in enumerate(items)]

    state_text = data.get("state", "canonical")
    try:
        if state_text == "canonical":
            state = _canonical_state(n, ops)
        else:
            state = DensityMatrix(_expr_op(state_text, n, "state"), float(data.get("tolerance", TOL)))
        tol = float(data.get("tolerance", TOL))
        return Scenario.from_operators(
            ops,
            state,
            aux,
            optimal=bool(data.get("optimal", False)),
            tol=tol,
            name=data.get("name", ""),
        )
    except ScenarioFileError:
        raise
    except ValueError as exc:
        raise ScenarioFileError(str(exc)) from exc


def load_scenario(path: str | Path) -> tuple[Scenario, dict]:
    """Read a scenario file; also returns the raw JSON (for optimizer stanzas)."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ScenarioFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return scenario_from_dict(data), data


def scenario_to_dict(scenario: Scenario) -> dict:
    n = int(round(np.log2(scenario.dim)))
    out = {
        "n_qubits": n,
        "observables": [format_expr(from_dense(a)) for a in scenario.ops],
        "state": format_expr(from_dense(scenario.state.op)),
        "aux": {
            str(i + 1): [format_expr(from_dense(a)) for a in group]
            for i, group in enumerate(scenario.db_aux)
            if len(group)
        },
        "optimal": scenario.optimal,
    }
    if scenario.tol != TOL:
        out["tolerance"] = scenario.tol
    if scenario.name:
        out["name"] = scenario.name
    return out
