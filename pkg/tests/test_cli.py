"""Model-file frontend and command-line behavior."""

from __future__ import annotations

import io
import json

import jsonschema
import pytest

from topacity.cli import RESULT_SCHEMA, ResultDocument, run_command
from topacity.modelfile import (
    ParseError,
    bundled_models_dir,
    load_bundled,
    parse_model,
    print_model,
)

BUNDLED = ["fig1", "fig2", "fig4", "fig7", "fig8", "fig9", "fig11", "privdead"]


def model_path(stem: str) -> str:
    return str(bundled_models_dir() / f"{stem}.pta")


def run(argv):
    out = io.StringIO()
    code = run_command(argv, out=out)
    return code, out.getvalue()


def run_json(argv):
    code, text = run(argv + ["--json"])
    return code, json.loads(text) if text.strip() else None


# ---------------------------------------------------------------------------
# parsing


def test_parse_two_branch_model_structure():
    mf = load_bundled("fig1")
    m = mf.analysis_model()
    assert len(m.locations) == 3
    assert len(m.edges) == 3
    assert m.space.params == ("p1", "p2")
    assert mf.private == ("l2",)
    assert (m.init, m.final) == ("l0", "l1")


def test_parse_error_unknown_identifier():
    text = """
clock x
automaton m
  loc l0
    when y <= 1 goto lf
  loc lf
  init l0
  final lf
end
"""
    with pytest.raises(ParseError) as err:
        parse_model(text)
    assert "y" in str(err.value)
    assert err.value.line == 5


def test_parse_error_duplicate_location():
    text = """
clock x
automaton m
  loc l0
  loc l0
  init l0
  final l0
end
"""
    with pytest.raises(ParseError) as err:
        parse_model(text)
    assert "duplicate" in str(err.value)


def test_parse_error_disjunctive_guard_rejected():
    text = """
clock x
automaton m
  loc l0
    when x <= 1 | x >= 2 goto lf
  loc lf
  init l0
  final lf
end
"""
    with pytest.raises(ParseError):
        parse_model(text)


def test_parse_error_malformed_rational():
    text = """
clock x
automaton m
  loc l0
    when x <= 1.2.3 goto lf
  loc lf
  init l0
  final lf
end
"""
    with pytest.raises(ParseError):
        parse_model(text)


@pytest.mark.parametrize("stem", BUNDLED)
def test_print_parse_round_trip_is_fixed_point(stem):
    mf = load_bundled(stem)
    once = print_model(mf)
    twice = print_model(parse_model(once))
    assert once == twice


def test_round_trip_preserves_analysis():
    for stem in ("fig7", "fig11"):
        mf = load_bundled(stem)
        again = parse_model(print_model(mf))
        m1, m2 = mf.analysis_model(), again.analysis_model()
        assert list(m1.locations) == list(m2.locations)
        assert len(m1.edges) == len(m2.edges)
        for e1, e2 in zip(m1.edges, m2.edges):
            assert (e1.source, e1.target, e1.action, e1.resets, e1.updates) == (
                e2.source, e2.target, e2.action, e2.resets, e2.updates
            )
            assert e1.guard == e2.guard
        assert mf.private == again.private


# ---------------------------------------------------------------------------
# commands


def test_durations_command_two_branch():
    code, doc = run_json(
        ["durations", "--model", model_path("fig1"), "--private", "l2",
         "--final", "l1", "--pval", "p1=1,p2=2"]
    )
    assert code == 0
    assert doc["verdict"] == "NotOpaqueFixable"
    assert doc["duration_set"] == [
        {"lo": "2", "lo_closed": True, "hi": "3", "hi_closed": True}
    ]
    assert doc["details"]["priv_times"][0]["lo"] == "1"


def test_full_opacity_command_exit_codes():
    code, doc = run_json(
        ["full-opacity", "--model", model_path("fig1"), "--pval", "p1=1.5,p2=1.5"]
    )
    assert code == 0 and doc["verdict"] == "Opaque"
    code2, doc2 = run_json(
        ["full-opacity", "--model", model_path("fig1"), "--pval", "p1=1,p2=2"]
    )
    assert code2 == 0 and doc2["verdict"] != "Opaque"


def test_synth_command_server_model():
    code, doc = run_json(["synth", "--model", model_path("fig7")])
    assert code == 0
    assert doc["verdict"] == "Constraint"
    assert doc["details"]["parameters"] == ["eps", "p", "p_abs"]
    assert doc["constraint"]


def test_lu_empty_command():
    code, doc = run_json(["lu-empty", "--model", model_path("fig9")])
    assert code == 0 and doc["verdict"] == "NonEmpty"
    code2, doc2 = run_json(["lu-empty", "--model", model_path("privdead")])
    assert code2 == 0 and doc2["verdict"] == "Empty"
    code3, _ = run(["lu-empty", "--model", model_path("fig7")])
    assert code3 == 1  # not an L/U model


def test_oracle_sample_command():
    code, doc = run_json(
        ["oracle-sample", "--model", model_path("fig1"), "--pval", "p1=1,p2=2",
         "--horizon", "4", "--polarity", "priv"]
    )
    assert code == 0
    reachable = [s["duration"] for s in doc["details"]["samples"] if s["verdict"] == "reachable"]
    assert reachable == ["1", "1.5", "2", "2.5", "3"]


def test_inconclusive_exits_2():
    code, doc = run_json(["durations", "--model", model_path("fig4"), "--budget", "500"])
    assert code == 2
    assert doc["verdict"] == "Inconclusive" and not doc["complete"]


def test_exit_code_matches_verdict_across_corpus_small_budget():
    from topacity.cli import BENCH_PLAN

    for stem in BUNDLED:
        plan = BENCH_PLAN.get(stem, {})
        argv = ["durations", "--model", model_path(stem), "--budget", "10"]
        if "pval" in plan:
            argv += ["--pval", plan["pval"]]
        model = load_bundled(stem).analysis_model()
        if any(p not in plan.get("pval", "") for p in model.timing_params):
            argv = ["synth", "--model", model_path(stem), "--budget", "10"]
        code, doc = run_json(argv)
        assert code in (0, 2)
        assert (code == 2) == (doc["verdict"] == "Inconclusive")


def test_bad_flags_and_unknown_names_exit_1():
    assert run(["durations"])[0] == 1  # no --model
    assert run(["durations", "--model", "/nonexistent.pta"])[0] == 1
    assert run(["durations", "--model", model_path("fig1"), "--private", "ghost",
                "--pval", "p1=1,p2=2"])[0] == 1
    assert run(["durations", "--model", model_path("fig1"), "--final", "ghost",
                "--pval", "p1=1,p2=2"])[0] == 1
    assert run(["durations", "--model", model_path("fig1"), "--pval", "bogus"])[0] == 1
    assert run(["durations", "--model", model_path("fig1")])[0] == 1  # missing pval
    assert run(["nonsense"])[0] == 1


# ---------------------------------------------------------------------------
# result documents


def bundled_runs():
    yield ["durations", "--model", model_path("fig1"), "--pval", "p1=1,p2=2"]
    yield ["durations", "--model", model_path("fig11")]
    yield ["full-opacity", "--model", model_path("fig8"), "--pval", "p=1"]
    yield ["synth", "--model", model_path("fig9")]
    yield ["lu-empty", "--model", model_path("fig1")]
    yield ["durations", "--model", model_path("fig4"), "--budget", "300"]
    yield ["oracle-sample", "--model", model_path("fig2"), "--horizon", "3"]


@pytest.mark.parametrize("argv", list(bundled_runs()), ids=lambda a: " ".join(a[:2]))
def test_json_schema_valid_and_round_trips(argv):
    code, doc = run_json(argv)
    assert doc is not None
    jsonschema.validate(doc, RESULT_SCHEMA)
    again = ResultDocument.from_json(doc)
    assert again.to_json() == doc


@pytest.mark.parametrize("argv", list(bundled_runs()), ids=lambda a: " ".join(a[:2]))
def test_commands_deterministic_up_to_wall_time(argv):
    code1, doc1 = run_json(argv)
    code2, doc2 = run_json(argv)
    assert code1 == code2
    doc1.pop("wall_time")
    doc2.pop("wall_time")
    assert doc1 == doc2


# ---------------------------------------------------------------------------
# bench


def test_bench_bundled_corpus(tmp_path):
    code, rows = run_json(["bench", "--budget", "3000"])
    assert code == 0
    by_model = {r["model"]: r for r in rows}
    assert by_model["fig7.pta"]["verdict"] == "NotOpaqueVulnerable"
    assert by_model["fig4.pta"]["verdict"] == "Inconclusive"
    assert by_model["fig8.pta"]["verdict"] == "Opaque"
    assert by_model["fig2.pta"]["verdict"] == "NotOpaqueVulnerable"
    assert [r["model"] for r in rows] == sorted(r["model"] for r in rows)


def test_bench_deterministic_modulo_time():
    code1, rows1 = run_json(["bench", "--budget", "1000"])
    code2, rows2 = run_json(["bench", "--budget", "1000"])
    for r in rows1 + rows2:
        r.pop("time")
    assert rows1 == rows2


def test_bench_empty_corpus(tmp_path):
    code, text = run(["bench", "--corpus", str(tmp_path)])
    assert code == 0
    code_json, rows = run_json(["bench", "--corpus", str(tmp_path)])
    assert rows == []
    assert run(["bench", "--corpus", str(tmp_path / "missing")])[0] == 1


def test_bench_human_table():
    code, text = run(["bench", "--budget", "1000"])
    assert code == 0
    lines = text.splitlines()
    assert lines[0].startswith("model")
    assert any("fig1.pta" in line for line in lines)
