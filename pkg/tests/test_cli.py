import json

import pytest

from flatwalk.cli import RunConfig, ValidationFailure, main, make_config
from flatwalk.complex_core import dump_complex
from flatwalk.generate import fan


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_file(tmp_path, capsys):
    path = tmp_path / "fan.json"
    path.write_text(dump_complex(fan(3)))
    code, out, _ = run(["validate", str(path)], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["report"]["counts"] == [5, 7, 3]
    assert doc["report"]["admissible"] is True
    assert set(doc) == {"report", "seed", "version", "config"}


def test_missing_file_exits_2(tmp_path, capsys):
    code, _, err = run(["validate", str(tmp_path / "nope.json")], capsys)
    assert code == 2 and "error" in err


def test_invalid_config_exits_1(capsys):
    assert run(["fdd", "--generate", "fan:3", "--eta", "-1"], capsys)[0] == 1
    assert run(["sweep", "--generate", "fan:3", "--etas", "0.1,0.2"], capsys)[0] == 1
    assert run(["validate"], capsys)[0] == 1


def test_malformed_complex_exits_1(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run(["validate", str(path)], capsys)[0] == 1


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"eta": 0.3, "paths": 50, "seed": 4}))
    cfg = make_config(["fdd", "--generate", "fan:3", "--config", str(cfg_file), "--eta", "0.2"])
    assert (cfg.eta, cfg.paths, cfg.seed) == (0.2, 50, 4)
    assert cfg.t == RunConfig.t
    cfg_file.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ValidationFailure):
        make_config(["fdd", "--generate", "fan:3", "--config", str(cfg_file)])


def test_classify_output(capsys):
    code, out, err = run(["classify", "--generate", "tree:3:6"], capsys)
    assert code == 0 and json.loads(out)["report"]["verdict"] == "transient"
    assert err.strip().startswith("transient")
    code, out, err = run(["classify", "--generate", "book:3"], capsys)
    assert code == 0 and err.strip().startswith("not_covered:")


def test_csv_outputs_carry_header(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code, stdout, _ = run(["resistance", "--generate", "tree:3:6", "--radius", "4", "--out", str(out)], capsys)
    assert code == 0 and "R_eff(4)" in stdout
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# flatwalk") and lines[1].startswith("# config=")
    assert lines[2] == "r,R_eff,increment" and len(lines) == 7


def test_json_reports_are_seeded(capsys):
    code, out, _ = run(["walk", "--generate", "tree:3:6", "--walks", "200", "--horizon", "50", "--seed", "9"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["seed"] == 9 and doc["config"]["walks"] == 200
    assert 0.0 <= doc["report"]["return_probability"]["value"] <= 1.0
