"""Command-line surface and result serialization.

Commands map one-to-one onto the analyses: `durations` and `full-opacity`
answer the fixed-valuation questions, `synth` synthesizes timing parameters
and execution times, `lu-empty` decides opacity emptiness for lower/upper
models, `oracle-sample` probes duration sets on the half-integer grid, and
`bench` runs the bundled corpus into a table.

Exit codes: 0 for definitive verdicts, 2 for budget-limited (inconclusive)
answers, 1 for usage or model errors.  `--json` switches the output to a
stable ResultDocument rendering of the same content.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .durations import DurationSet, to_duration_set
from .model import ModelError, is_lu, NotLU, rescale_to_integers, valuate_pta
from .modelfile import ModelFile, ParseError, bundled_models_dir, load_model_path
from .opacity import (
    OpacitySpec,
    VerdictKind,
    is_fully_opaque,
    lu_opacity_emptiness,
    opaque_times,
    synth_op,
)
from .oracle import sample_durations
from .rationals import format_rational, parse_rational
from .symsem import DEFAULT_BUDGET

RESULT_SCHEMA = {
    "type": "object",
    "required": [
        "query", "model", "verdict", "constraint", "duration_set",
        "complete", "states_explored", "wall_time", "details",
    ],
    "additionalProperties": False,
    "properties": {
        "query": {"type": "string"},
        "model": {"type": "string"},
        "verdict": {"type": "string"},
        "constraint": {
            "type": ["array", "null"],
            "items": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["coeffs", "const", "relation"],
                    "additionalProperties": False,
                    "properties": {
                        "coeffs": {"type": "object", "additionalProperties": {"type": "string"}},
                        "const": {"type": "string"},
                        "relation": {"enum": ["<", "<=", "="]},
                    },
                },
            },
        },
        "duration_set": {
            "type": ["array", "null"],
            "items": {
                "type": "object",
                "required": ["lo", "lo_closed", "hi", "hi_closed"],
                "additionalProperties": False,
                "properties": {
                    "lo": {"type": "string"},
                    "lo_closed": {"type": "boolean"},
                    "hi": {"type": "string"},
                    "hi_closed": {"type": "boolean"},
                },
            },
        },
        "complete": {"type": "boolean"},
        "states_explored": {"type": "integer"},
        "wall_time": {"type": "number"},
        "details": {"type": "object"},
    },
}


@dataclass
class ResultDocument:
    """Stable, JSON-serializable analysis outcome."""

    query: str
    model: str
    verdict: str
    constraint: Optional[list]
    duration_set: Optional[list]
    complete: bool
    states_explored: int
    wall_time: float
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "ResultDocument":
        return cls(**data)


class CliError(Exception):
    pass


def _parse_pval(text: Optional[str]) -> dict[str, Fraction]:
    out: dict[str, Fraction] = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise CliError(f"bad valuation entry {item!r}; expected name=value")
        name, _, value = item.partition("=")
        try:
            out[name.strip()] = parse_rational(value)
        except ValueError as exc:
            raise CliError(str(exc))
    return out


def _load(args) -> tuple[ModelFile, "object", frozenset[str], str]:
    if not args.model:
        raise CliError("--model is required")
    path = Path(args.model)
    if not path.exists():
        raise CliError(f"model file not found: {path}")
    mf = load_model_path(path)
    model = mf.analysis_model()
    if args.private:
        names = [n.strip() for n in args.private.split(",") if n.strip()]
        for n in names:
            if n not in model.locations:
                raise CliError(f"unknown location {n!r}")
        priv = frozenset(names)
    else:
        priv = mf.private_locations(model)
    final = args.final or model.final
    if final not in model.locations:
        raise CliError(f"unknown location {final!r}")
    return mf, model, priv, final


def _check_pval(model, pval):
    for name in pval:
        if name not in model.space.params:
            raise CliError(f"unknown parameter {name!r}")


def _ds_or_none(ds: Optional[DurationSet]):
    return None if ds is None else ds.as_json()


def _emit(doc: ResultDocument, as_json: bool, out) -> None:
    if as_json:
        json.dump(doc.to_json(), out, indent=2)
        out.write("\n")
        return
    print(f"query:   {doc.query}", file=out)
    print(f"model:   {doc.model}", file=out)
    for key in ("priv_times", "pub_times"):
        if key in doc.details:
            ds = DurationSet.from_json(doc.details[key])
            print(f"{key.replace('_times', ''):7s} {ds.render()}", file=out)
    if doc.duration_set is not None:
        print(f"opaque  {DurationSet.from_json(doc.duration_set).render()}", file=out)
    if doc.constraint is not None:
        if doc.constraint:
            print("constraint:", file=out)
            for disjunct in doc.constraint:
                atoms = " & ".join(_atom_str(a) for a in disjunct)
                print(f"  | {atoms}", file=out)
        else:
            print("constraint: false", file=out)
    if "witness_valuation" in doc.details and doc.details["witness_valuation"]:
        pairs = ", ".join(f"{k}={v}" for k, v in doc.details["witness_valuation"].items())
        print(f"witness: {pairs}", file=out)
    if "samples" in doc.details:
        print("duration\tverdict", file=out)
        for row in doc.details["samples"]:
            print(f"{row['duration']}\t{row['verdict']}", file=out)
    for w in doc.details.get("warnings", ()):
        print(f"warning: {w}", file=out)
    print(f"verdict: {doc.verdict}", file=out)
    print(f"states:  {doc.states_explored} ({'complete' if doc.complete else 'truncated'})", file=out)
    print(f"time:    {doc.wall_time:.3f}s", file=out)


def _atom_str(a: dict) -> str:
    parts = []
    for d, c in a["coeffs"].items():
        parts.append(f"{c}*{d}" if c not in ("1", "-1") else (d if c == "1" else f"-{d}"))
    lhs = " + ".join(parts) if parts else "0"
    const = a["const"]
    if const != "0":
        lhs += f" + {const}" if not const.startswith("-") else f" - {const[1:]}"
    return f"{lhs} {a['relation']} 0"


def _exit_code(verdict_kind: str) -> int:
    return 2 if verdict_kind == "Inconclusive" else 0


def _cmd_durations(args, out, full: bool) -> int:
    mf, model, priv, final = _load(args)
    pval = _parse_pval(args.pval)
    _check_pval(model, pval)
    spec = OpacitySpec(model=model, priv=priv, final=final, fixed_valuation=pval or None)
    t0 = time.monotonic()
    verdict = (is_fully_opaque if full else opaque_times)(spec, args.budget)
    dt = time.monotonic() - t0
    doc = ResultDocument(
        query="full-opacity" if full else "durations",
        model=Path(args.model).name,
        verdict=verdict.kind.value,
        constraint=None,
        duration_set=verdict.opaque_times.as_json(),
        complete=verdict.complete,
        states_explored=verdict.states_explored,
        wall_time=dt,
        details={
            "priv_times": verdict.priv_times.as_json(),
            "pub_times": verdict.pub_times.as_json(),
            "warnings": list(verdict.warnings),
        },
    )
    _emit(doc, args.json, out)
    return _exit_code(verdict.kind.value)


def _cmd_synth(args, out) -> int:
    mf, model, priv, final = _load(args)
    pval = _parse_pval(args.pval)
    _check_pval(model, pval)
    if pval:
        model = valuate_pta(model, pval)
    spec = OpacitySpec(model=model, priv=priv, final=final)
    t0 = time.monotonic()
    result = synth_op(spec, args.budget)
    dt = time.monotonic() - t0
    if not result.complete:
        verdict = "Inconclusive"
    elif result.constraint.is_false:
        verdict = "Empty"
    else:
        verdict = "Constraint"
    duration_set = None
    abs_param = result.constraint.space.params[-1]
    if not model.timing_params:
        duration_set = to_duration_set(result.constraint, abs_param).as_json()
    doc = ResultDocument(
        query="synth",
        model=Path(args.model).name,
        verdict=verdict,
        constraint=result.constraint.as_json(),
        duration_set=duration_set,
        complete=result.complete,
        states_explored=result.states_explored,
        wall_time=dt,
        details={"parameters": list(result.constraint.space.params)},
    )
    _emit(doc, args.json, out)
    return _exit_code(verdict)


def _cmd_lu_empty(args, out) -> int:
    mf, model, priv, final = _load(args)
    partition = is_lu(model)
    if isinstance(partition, NotLU):
        raise CliError(
            f"model is not lower/upper partitionable: parameter {partition.witness!r} "
            "occurs with both polarities"
        )
    spec = OpacitySpec(model=model, priv=priv, final=final)
    t0 = time.monotonic()
    result = lu_opacity_emptiness(spec, partition, args.budget)
    dt = time.monotonic() - t0
    doc = ResultDocument(
        query="lu-empty",
        model=Path(args.model).name,
        verdict=result.status,
        constraint=None,
        duration_set=result.opaque_times.as_json(),
        complete=result.verdict.complete,
        states_explored=result.verdict.states_explored,
        wall_time=dt,
        details={
            "lower": sorted(partition.lower),
            "upper": sorted(partition.upper),
            "witness_valuation": {
                k: format_rational(v) for k, v in (result.witness_valuation or {}).items()
            },
        },
    )
    _emit(doc, args.json, out)
    return _exit_code("Inconclusive" if result.status == "Inconclusive" else result.status)


def _cmd_oracle_sample(args, out) -> int:
    mf, model, priv, final = _load(args)
    pval = _parse_pval(args.pval)
    _check_pval(model, pval)
    if pval:
        model = valuate_pta(model, pval)
    if model.space.params:
        raise CliError(
            f"oracle sampling needs a fully valuated model; missing {list(model.space.params)}"
        )
    model, factor = rescale_to_integers(model)
    if args.horizon is None:
        raise CliError("--horizon is required for oracle-sample")
    horizon = parse_rational(args.horizon) * factor
    if horizon.denominator != 1:
        raise CliError(f"horizon must be integral after rescaling by {factor}")
    t0 = time.monotonic()
    report = sample_durations(model, priv, args.polarity, final, int(horizon), args.budget)
    dt = time.monotonic() - t0
    inconclusive = any(v == "inconclusive" for v in report.samples.values())
    doc = ResultDocument(
        query="oracle-sample",
        model=Path(args.model).name,
        verdict="Inconclusive" if inconclusive else "Sampled",
        constraint=None,
        duration_set=None,
        complete=not inconclusive,
        states_explored=0,
        wall_time=dt,
        details={
            "polarity": args.polarity,
            "rescale_factor": factor,
            "samples": report.as_json()["samples"],
        },
    )
    _emit(doc, args.json, out)
    return 2 if inconclusive else 0


BENCH_PLAN = {
    "fig1": {"pval": "p1=1,p2=2"},
    "fig4": {"budget": 10000},
    "fig7": {"pval": "eps=1,p=2"},
    "fig8": {"pval": "p=1"},
    "fig9": {"pval": "p=1"},
    "privdead": {"pval": "pmin=1"},
}


def _cmd_bench(args, out) -> int:
    corpus = Path(args.corpus) if args.corpus else bundled_models_dir()
    if not corpus.is_dir():
        raise CliError(f"corpus directory not found: {corpus}")
    rows = []
    for path in sorted(corpus.glob("*.pta")):
        plan = BENCH_PLAN.get(path.stem, {})
        budget = plan.get("budget", args.budget)
        try:
            mf = load_model_path(path)
            model = mf.analysis_model()
            priv = mf.private_locations(model)
            pval = _parse_pval(plan.get("pval"))
            covered = set(pval)
            if [p for p in model.timing_params if p not in covered]:
                query = "synth"
                t0 = time.monotonic()
                result = synth_op(OpacitySpec(model, priv, model.final), budget)
                dt = time.monotonic() - t0
                verdict = (
                    "Inconclusive" if not result.complete
                    else "Empty" if result.constraint.is_false
                    else "Constraint"
                )
                states = result.states_explored
            else:
                query = "durations"
                spec = OpacitySpec(model, priv, model.final, fixed_valuation=pval or None)
                t0 = time.monotonic()
                verdict_obj = opaque_times(spec, budget)
                dt = time.monotonic() - t0
                verdict = verdict_obj.kind.value
                states = verdict_obj.states_explored
        except (ModelError, ParseError) as exc:
            rows.append({"model": path.name, "query": "-", "verdict": f"error: {exc}",
                         "states": 0, "time": 0.0})
            continue
        rows.append({"model": path.name, "query": query, "verdict": verdict,
                     "states": states, "time": round(dt, 3)})
    if args.json:
        json.dump(rows, out, indent=2)
        out.write("\n")
    else:
        header = f"{'model':<16} {'query':<10} {'verdict':<22} {'states':>7} {'time':>8}"
        print(header, file=out)
        print("-" * len(header), file=out)
        for r in rows:
            print(
                f"{r['model']:<16} {r['query']:<10} {r['verdict']:<22} "
                f"{r['states']:>7} {r['time']:>7.3f}s",
                file=out,
            )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topacity",
        description="Timed-opacity checking and timing-parameter synthesis for timed automata",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, pval=True, horizon=False):
        p.add_argument("--model", help="model file (.pta)")
        p.add_argument("--private", help="comma-separated private locations (default: model file)")
        p.add_argument("--final", help="final location (default: model file)")
        if pval:
            p.add_argument("--pval", help='parameter valuation, e.g. "p1=1,p2=2"')
        p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                       help="symbolic-state budget per exploration")
        if horizon:
            p.add_argument("--horizon", help="sampling horizon (rational)")
        p.add_argument("--json", action="store_true", help="emit a JSON ResultDocument")

    common(sub.add_parser("durations", help="opaque execution times at a fixed valuation"))
    common(sub.add_parser("full-opacity", help="decide equality of the two duration sets"))
    common(sub.add_parser("synth", help="synthesize timing parameters and execution times"))
    common(sub.add_parser("lu-empty", help="opacity emptiness for lower/upper models"), pval=False)
    p = sub.add_parser("oracle-sample", help="half-integer grid probe of a duration set")
    common(p, horizon=True)
    p.add_argument("--polarity", choices=["priv", "pub", "any"], default="priv")
    b = sub.add_parser("bench", help="run the bundled corpus")
    b.add_argument("--corpus", help="directory of .pta files (default: bundled)")
    b.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    b.add_argument("--json", action="store_true")
    return parser


def run_command(argv: list[str], out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        if args.command == "durations":
            return _cmd_durations(args, out, full=False)
        if args.command == "full-opacity":
            return _cmd_durations(args, out, full=True)
        if args.command == "synth":
            return _cmd_synth(args, out)
        if args.command == "lu-empty":
            return _cmd_lu_empty(args, out)
        if args.command == "oracle-sample":
            return _cmd_oracle_sample(args, out)
        if args.command == "bench":
            return _cmd_bench(args, out)
        raise CliError(f"unknown command {args.command!r}")
    except (CliError, ModelError, ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
