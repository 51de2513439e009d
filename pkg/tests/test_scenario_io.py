import json

import numpy as np
import pytest

from seqctx import canonical
from seqctx.contextuality import delta_value
from seqctx.scenario_io import ScenarioFileError, load_scenario, scenario_from_dict, scenario_to_dict

TWO_QUBIT = {"n_qubits": 2, "observables": ["XX", "ZY", "XZ", "YY"]}


@pytest.mark.parametrize("n", [2, 3])
def test_round_trip_preserves_values(n):
    sc = canonical.canonical_scenario(n)
    data = json.loads(json.dumps(scenario_to_dict(sc)))
    back = scenario_from_dict(data)
    np.testing.assert_allclose(back.state.op, sc.state.op, atol=1e-12)
    for kind in ("dp", "db"):
        assert delta_value(back, kind).value == pytest.approx(delta_value(sc, kind).value, abs=1e-12)
    assert scenario_to_dict(back) == data


def test_canonical_state_keyword():
    sc = scenario_from_dict(dict(TWO_QUBIT, state="canonical"))
    np.testing.assert_allclose(sc.state.op, canonical.explicit_state(2).op, atol=1e-12)


def test_aux_keys_are_one_based():
    n = "-0.9238795325112867*ZZ + 0.3826834323650898*YZ"
    sc = scenario_from_dict(dict(TWO_QUBIT, aux={"1": [n]}))
    assert sc.partitions[0].k == 4 and sc.partitions[1] is None


def test_tolerance_field_is_kept():
    sc = scenario_from_dict(dict(TWO_QUBIT, tolerance=1e-6))
    assert sc.tol == 1e-6
    assert scenario_to_dict(sc)["tolerance"] == 1e-6


@pytest.mark.parametrize(
    "data, fragment",
    [
        ([], "JSON object"),
        ({"observables": ["XX"] * 4}, "n_qubits"),
        ({"n_qubits": 2, "observables": ["XX", "ZY"]}, "four"),
        (dict(TWO_QUBIT, observables=["XX", "ZY", "XZ", "YYY"]), "3 qubits"),
        (dict(TWO_QUBIT, observables=["XX", "ZY", "XZ", "Y?"]), "unexpected character"),
        (dict(TWO_QUBIT, aux={"0": ["ZZ"]}), "1..4"),
        (dict(TWO_QUBIT, aux={"1": ["ZI"]}), "commute"),
        (dict(TWO_QUBIT, state="0.5*II"), "trace"),
        ({"n_qubits": 3, "observables": ["XXX", "ZZZ", "XXX", "ZZZ"]}, "canonical state"),
    ],
)
def test_schema_errors(data, fragment):
    with pytest.raises(ScenarioFileError, match=fragment):
        scenario_from_dict(data)


def test_load_reports_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"n_qubits": 2,\n "observables": [')
    with pytest.raises(ScenarioFileError, match="line 2"):
        load_scenario(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(ScenarioFileError, match="cannot read"):
        load_scenario(tmp_path / "absent.json")


def test_load_returns_raw_stanzas(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(dict(TWO_QUBIT, optimizer={"dim": 4, "restarts": 2})))
    sc, raw = load_scenario(path)
    assert sc.dim == 4 and raw["optimizer"] == {"dim": 4, "restarts": 2}
