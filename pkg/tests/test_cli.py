import io
import json
from pathlib import Path

import pytest

from appi.cli import main, run_query
from appi.lts import ExplorationConfig
from appi.specfile import parse_spec
from appi.syntax import ParseError

FIXTURE = Path(__file__).parent / "fixtures" / "probes.appi"


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


def write(tmp_path, text, fname="spec.appi"):
    p = tmp_path / fname
    p.write_text(text)
    return str(p)


def test_minimal_file():
    spec = parse_spec("process P = 0. query barbs P.")
    assert len(spec.queries) == 1 and spec.queries[0].kind == "barbs"


def test_duplicate_substitution_cites_bullet():
    with pytest.raises(ParseError, match="more than one substitution"):
        parse_spec("name c. const d. var x.\nprocess Q = {c/x} | {d/x}.")


def test_undeclared_and_arity_errors():
    with pytest.raises(ParseError) as e:
        parse_spec("name c.\nprocess Q = out(c, zz).")
    assert (e.value.line, e.value.col) == (2, 20)
    with pytest.raises(ParseError, match="expects 1 arguments"):
        parse_spec("fun h/1. name c.\nprocess Q = out(c, h(c, c)).")


def test_fixture_parses():
    spec = parse_spec(FIXTURE.read_text())
    assert set(spec.processes) >= {"Zero", "One", "P", "Q"}
    assert len(spec.theory.rules) == 2
    assert [q.kind for q in spec.queries][:3] == ["normalize", "normalize", "static"]


def test_bisim_query_exit_code(tmp_path):
    path = write(tmp_path, "name c.\nprocess P = out(c, 0).\nprocess Q = out(c, 1).\nquery bisim P Q.\n")
    code, text = run(["run", path])
    assert code == 1
    assert "~c<0>" in text


def test_normalize_query_prints_normal_form(tmp_path):
    path = write(tmp_path, "name c, n. var x.\nprocess P = new n.({n/x} | out(c, x)).\nquery normalize P.\n")
    code, text = run(["run", path])
    assert code == 0 and "new n.({n/x} | out(c, n).0)" in text


def test_lts_query_writes_dot(tmp_path):
    path = write(tmp_path, "name c.\nprocess P = out(c, 0).\nquery lts P > p.dot.\n")
    code, _ = run(["run", path])
    dot = (tmp_path / "p.dot").read_text()
    assert code == 0 and dot.startswith("digraph lts {")
    code, text = run(["run", path, "--format", "dot"])
    assert text.startswith("digraph lts {")


def test_json_report_and_max_exit(tmp_path):
    path = write(tmp_path, "name c.\nprocess P = out(c, 0).\nprocess R = !out(c, 0).\nprocess S = !out(c, 0) | !out(c, 0).\n"
                           "query bisim P P.\nquery bisim R S.\n")
    code, text = run(["run", path, "--format", "json"])
    data = json.loads(text)
    assert code == 2 == data["exit"]
    assert [q["verdict"] for q in data["queries"]] == ["equivalent", "inconclusive"]
    assert "wall_time" in data["queries"][0]


def test_query_errors_exit_3(tmp_path):
    path = write(tmp_path, "name c. var x.\nprocess P = {0/x}.\nprocess Q = 0.\nquery bisim P Q.\n")
    code, text = run(["run", path])
    assert code == 3 and "domains differ" in text


def test_missing_file_exit_3(tmp_path):
    assert run(["run", str(tmp_path / "nope.appi")])[0] == 3


def test_config_env(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"format": "json"}))
    monkeypatch.setenv("APPI_CONFIG", str(cfg))
    path = write(tmp_path, "process P = 0. query barbs P.")
    code, text = run(["run", path])
    assert code == 0 and json.loads(text)["queries"][0]["barbs"] == []
    code, text = run(["run", path, "--format", "text"])
    assert text.startswith("== barbs P")
    cfg.write_text(json.dumps({"colour": "red"}))
    assert run(["run", path])[0] == 3


def test_jobs_keep_query_order(tmp_path):
    body = "name c.\nprocess P = out(c, 0).\n" + "query barbs P.\nquery normalize P.\n" * 3
    path = write(tmp_path, body)
    _, serial = run(["run", path])
    _, parallel = run(["run", path, "--jobs", "4"])
    assert serial == parallel


def test_probe_query():
    spec = parse_spec(FIXTURE.read_text())
    q = next(q for q in spec.queries if q.kind == "probe")
    r = run_query(spec, q, ExplorationConfig())
    assert r.code == 1 and r.data["left"]["barb"] and not r.data["right"]["barb"]


def test_parse_command():
    code, text = run(["parse", str(FIXTURE), "--format", "json"])
    data = json.loads(text)
    assert code == 0 and data["functions"]["fst"] == 1


def test_selftest():
    code, text = run(["selftest", "--count", "50", "--seed", "3"])
    assert code == 0 and text.count("ok") == 4
