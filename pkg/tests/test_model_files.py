import json

import numpy as np
import pytest

from nfcocomo import ConfigurationError, DependencyRule, default_rules, load_params, load_table, save_params
from nfcocomo.model import dumps_params, load_rules, params_from_doc, params_to_doc
from nfcocomo.synthetic import perturb_levels

from oracles import raw_table


@pytest.mark.parametrize("family,name,n_drivers", [("cocomo-ii", "cocomo2000.json", 22),
                                                   ("cocomo-81", "cocomo81.json", 15)])
def test_bundled_tables_load_verbatim(family, name, n_drivers):
    params = load_table(family)
    raw = raw_table(name)
    assert len(params.drivers) == n_drivers
    assert params.rules == ()
    for d in raw["drivers"]:
        calib = params.calibrations[d["id"]]
        for abbrev, value in d["levels"].items():
            assert calib.value_at(abbrev) == value
        assert calib.is_monotone()
    assert params.calibrations["ACAP"].value_at("VH") == 0.71


def test_cocomo2_table_structure():
    params = load_table("cocomo-ii")
    assert (params.coeffs.A, params.coeffs.B) == (2.94, 0.91)
    assert sum(d.is_scale_factor for d in params.drivers) == 5
    assert all(v == 0.0 for v in params.calibrations["PREC"].level_values[-1:])


def test_default_rule():
    (rule,) = default_rules()
    assert rule.target == "ACAP" and rule.delta == -0.5
    assert [(d, k.abbrev) for d, k in rule.antecedent] == [("CPLX", "XH")]


def test_round_trip_is_exact(tmp_path, cocomo81):
    changed = perturb_levels(cocomo81, np.random.default_rng(0), 0.07)
    path = tmp_path / "m.json"
    save_params(changed, path)
    again = load_params(path)
    assert again == changed
    assert dumps_params(again) == path.read_text()


def test_env_var_selects_table(tmp_path, monkeypatch):
    doc = params_to_doc(load_table("cocomo-81"))
    doc["modes"]["organic"]["a"] = 4.0
    path = tmp_path / "t.json"
    path.write_text(json.dumps(doc))
    monkeypatch.setenv("NFCOCOMO_TABLE", str(path))
    assert load_table().coeffs.modes["organic"] == (4.0, 1.05)
    with pytest.raises(ConfigurationError, match="expected cocomo-ii"):
        load_table("cocomo-ii")


@pytest.mark.parametrize("mutate,needle", [
    (lambda d: d.update(schema_version=9), "schema_version"),
    (lambda d: d.pop("drivers"), "malformed"),
    (lambda d: d["drivers"][0]["levels"].update(VL=-1.0), "RELY"),
    (lambda d: d["drivers"][1].update(id="RELY"), "duplicate"),
    (lambda d: d.update(rules=[{"if": [["CPLX", "XH"]], "then": "ACAP", "delta": 3.0}]), "delta"),
    (lambda d: d.update(rules=[{"if": [["NOPE", "XH"]], "then": "ACAP", "delta": 0.3}]), "NOPE"),
])
def test_bad_parameter_files(tmp_path, mutate, needle):
    doc = params_to_doc(load_table("cocomo-81"))
    mutate(doc)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigurationError, match=needle):
        load_params(path)


def test_invalid_json(tmp_path):
    path = tmp_path / "x.json"
    path.write_text("{not json")
    with pytest.raises(ConfigurationError, match="invalid JSON"):
        load_params(path)


def test_rule_file(tmp_path):
    path = tmp_path / "r.json"
    path.write_text(json.dumps({"rules": [{"if": [["CPLX", "VH"], ["DATA", "H"]], "then": "PCAP", "delta": 0.25}]}))
    (rule,) = load_rules(path)
    assert rule == DependencyRule((("CPLX", "VH"), ("DATA", "H")), "PCAP", 0.25)
    path.write_text("{}")
    with pytest.raises(ConfigurationError, match="rules"):
        load_rules(path)


def test_doc_round_trip_keeps_rules(cocomo2):
    assert params_from_doc(params_to_doc(cocomo2)) == cocomo2
