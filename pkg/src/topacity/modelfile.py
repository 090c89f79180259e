"""Model file parsing and printing.

The concrete syntax is line-oriented:

    # declarations
    clock x y
    param p1 p2              # timing parameters
    dataparam secret         # rational-valued inputs/secrets
    discrete m in {0, 1} init 0
    discrete b in bool init false
    action tick
    sync tick                # network-wide synchronization set

    automaton main
      loc l0 invariant x <= 3
        when x >= p1 goto l2
        when true sync tick do x := 0, m := 1 goto l1
      urgent loc l2
        when true goto l1
      loc l1
      init l0
      final l1
      private l2
    end

Guards are conjunctions (``&``) of atoms: a single clock compared against a
linear parameter expression, a parameter-only linear comparison, or a
discrete-variable comparison.  Edges appear under their source location.
Printing emits the same syntax, so parse - print - parse is a fixed point.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional

from .model import PTA, DiscreteVar, Edge, Location, synchronized_product
from .poly import Inequality, LinearTerm, Polyhedron, Rel, Space
from .rationals import format_rational, parse_rational


class ParseError(Exception):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col
        self.message = message


KEYWORDS = {
    "clock", "param", "dataparam", "action", "sync", "discrete", "automaton",
    "loc", "urgent", "invariant", "when", "do", "goto", "init", "final",
    "private", "end", "in", "true", "false",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>\d+(\.\d+)?(/\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<symbol>:=|<=|>=|==|!=|[<>=&*+\-,{}])
  | (?P<newline>\n)
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str  # ident | number | symbol | newline | eof
    value: str
    line: int
    col: int


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(line, col, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        value = m.group()
        if kind == "newline":
            tokens.append(Token("newline", "\n", line, col))
            line += 1
            col = 1
        else:
            if kind not in ("ws", "comment"):
                tokens.append(Token(kind, value, line, col))
            col += len(value)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Cursor:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def skip_newlines(self):
        while self.peek().kind == "newline":
            self.next()

    def expect_ident(self, what="identifier") -> Token:
        t = self.next()
        if t.kind != "ident" or t.value in KEYWORDS:
            raise ParseError(t.line, t.col, f"expected {what}, got {t.value!r}")
        return t

    def expect_keyword(self, word: str):
        t = self.next()
        if not (t.kind == "ident" and t.value == word):
            raise ParseError(t.line, t.col, f"expected {word!r}, got {t.value!r}")
        return t

    def expect_symbol(self, sym: str):
        t = self.next()
        if not (t.kind == "symbol" and t.value == sym):
            raise ParseError(t.line, t.col, f"expected {sym!r}, got {t.value!r}")
        return t

    def at_keyword(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.value == word

    def at_symbol(self, sym: str) -> bool:
        t = self.peek()
        return t.kind == "symbol" and t.value == sym

    def end_of_line(self):
        t = self.next()
        if t.kind not in ("newline", "eof"):
            raise ParseError(t.line, t.col, f"unexpected {t.value!r} at end of statement")


@dataclass
class ModelFile:
    """Parsed model: declarations plus one automaton per block."""

    clocks: tuple[str, ...]
    timing_params: tuple[str, ...]
    data_params: tuple[str, ...]
    actions: tuple[str, ...]
    sync_actions: tuple[str, ...]
    discretes: dict[str, DiscreteVar]
    automata: list[PTA]
    private: tuple[str, ...]
    name: str = "model"

    @property
    def space(self) -> Space:
        return Space(self.clocks, self.timing_params + self.data_params)

    def analysis_model(self) -> PTA:
        if len(self.automata) == 1:
            return self.automata[0]
        return synchronized_product(self.automata, set(self.sync_actions))

    def private_locations(self, model: Optional[PTA] = None) -> frozenset[str]:
        """Private location names of the analysis model: any product location
        containing a declared private component location."""
        model = model or self.analysis_model()
        declared = set(self.private)
        return frozenset(
            name for name, loc in model.locations.items() if set(loc.vector) & declared
        )


@dataclass
class _Decls:
    clocks: list = field(default_factory=list)
    timing: list = field(default_factory=list)
    data: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    sync: list = field(default_factory=list)
    discretes: dict = field(default_factory=dict)

    def kind_of(self, name: str) -> Optional[str]:
        if name in self.clocks:
            return "clock"
        if name in self.timing or name in self.data:
            return "param"
        if name in self.discretes:
            return "discrete"
        if name in self.actions:
            return "action"
        return None


def _parse_value(cur: _Cursor):
    t = cur.next()
    if t.kind == "ident" and t.value in ("true", "false"):
        return t.value == "true"
    if t.kind == "number":
        if "." in t.value or "/" in t.value:
            raise ParseError(t.line, t.col, "discrete values are integers or booleans")
        return int(t.value)
    if t.kind == "symbol" and t.value == "-":
        t2 = cur.next()
        if t2.kind == "number" and "." not in t2.value and "/" not in t2.value:
            return -int(t2.value)
        raise ParseError(t2.line, t2.col, "expected integer after '-'")
    raise ParseError(t.line, t.col, f"expected value, got {t.value!r}")


def _parse_linear(cur: _Cursor, decls: _Decls) -> LinearTerm:
    """TERM ((+|-) TERM)* with TERM = rational ['*' ident] | ident ['*' rational]."""
    term = LinearTerm()
    sign = Fraction(1)
    first = True
    while True:
        if cur.at_symbol("-"):
            cur.next()
            sign = -sign
            continue
        if cur.at_symbol("+"):
            cur.next()
            continue
        t = cur.peek()
        if t.kind == "number":
            cur.next()
            try:
                coeff = parse_rational(t.value)
            except ValueError as exc:
                raise ParseError(t.line, t.col, str(exc))
            if cur.at_symbol("*"):
                cur.next()
                name = cur.expect_ident("dimension name")
                _check_dim(decls, name)
                term = term + LinearTerm({name.value: sign * coeff})
            else:
                term = term + LinearTerm({}, sign * coeff)
        elif t.kind == "ident" and t.value not in KEYWORDS:
            cur.next()
            _check_dim(decls, t)
            coeff = sign * Fraction(1)
            if cur.at_symbol("*"):
                cur.next()
                num = cur.next()
                if num.kind != "number":
                    raise ParseError(num.line, num.col, "expected rational after '*'")
                coeff = sign * parse_rational(num.value)
            term = term + LinearTerm({t.value: coeff})
        else:
            raise ParseError(t.line, t.col, f"expected term, got {t.value!r}")
        sign = Fraction(1)
        first = False
        if cur.at_symbol("+") or cur.at_symbol("-"):
            continue
        break
    assert not first
    return term


def _check_dim(decls: _Decls, token: Token):
    kind = decls.kind_of(token.value)
    if kind is None:
        raise ParseError(token.line, token.col, f"unknown identifier {token.value!r}")
    if kind == "discrete":
        raise ParseError(
            token.line, token.col, f"discrete variable {token.value!r} in a linear expression"
        )
    if kind == "action":
        raise ParseError(token.line, token.col, f"action {token.value!r} used as a dimension")


_REL_SYMBOLS = ("<=", ">=", "==", "!=", "<", ">", "=")


def _parse_guard(cur: _Cursor, decls: _Decls, space: Space):
    """Conjunction of atoms; returns (clock/param inequalities, discrete atoms)."""
    ineqs: list[Inequality] = []
    disc: list[tuple[str, str, object]] = []
    if cur.at_keyword("true"):
        cur.next()
        return ineqs, tuple(disc)
    while True:
        start = cur.peek()
        if start.kind == "ident" and decls.kind_of(start.value) == "discrete":
            var = cur.next().value
            op_t = cur.next()
            if op_t.kind != "symbol" or op_t.value not in _REL_SYMBOLS:
                raise ParseError(op_t.line, op_t.col, f"expected comparison, got {op_t.value!r}")
            op = "=" if op_t.value in ("=", "==") else op_t.value
            value = _parse_value(cur)
            disc.append((var, op, value))
        else:
            lhs = _parse_linear(cur, decls)
            op_t = cur.next()
            if op_t.kind != "symbol" or op_t.value not in _REL_SYMBOLS:
                raise ParseError(op_t.line, op_t.col, f"expected comparison, got {op_t.value!r}")
            if op_t.value == "!=":
                raise ParseError(op_t.line, op_t.col, "disequality is not convex; split the model")
            rhs = _parse_linear(cur, decls)
            diff = lhs - rhs
            if op_t.value in (">", ">="):
                diff = -diff
            rel = {"<": Rel.LT, ">": Rel.LT, "<=": Rel.LE, ">=": Rel.LE, "=": Rel.EQ, "==": Rel.EQ}[
                op_t.value
            ]
            clocks_in = [d for d in diff.coeffs if space.is_clock(d)]
            if len(clocks_in) > 1:
                raise ParseError(
                    start.line, start.col, "a guard atom compares at most one clock"
                )
            if clocks_in and abs(diff.coeffs[clocks_in[0]]) != 1:
                raise ParseError(
                    start.line, start.col, "clock coefficients in guards must be 1"
                )
            ineqs.append(Inequality(diff.coeffs, diff.const, rel))
        if cur.at_symbol("&"):
            cur.next()
            continue
        break
    return ineqs, tuple(disc)


def _parse_do(cur: _Cursor, decls: _Decls):
    resets: list[str] = []
    updates: list[tuple[str, object]] = []
    while True:
        name = cur.expect_ident("assignment target")
        cur.expect_symbol(":=")
        kind = decls.kind_of(name.value)
        if kind == "clock":
            t = cur.next()
            if not (t.kind == "number" and parse_rational(t.value) == 0):
                raise ParseError(t.line, t.col, "clocks can only be reset to 0")
            resets.append(name.value)
        elif kind == "discrete":
            value = _parse_value(cur)
            if value not in decls.discretes[name.value].domain:
                raise ParseError(name.line, name.col, f"value outside domain of {name.value!r}")
            updates.append((name.value, value))
        else:
            raise ParseError(name.line, name.col, f"cannot assign to {name.value!r}")
        if cur.at_symbol(","):
            cur.next()
            continue
        break
    return frozenset(resets), tuple(updates)


def _parse_automaton(cur: _Cursor, decls: _Decls, space: Space):
    name = cur.expect_ident("automaton name")
    cur.end_of_line()
    locations: dict[str, Location] = {}
    edges: list[Edge] = []
    used_actions: list[str] = []
    init = final = None
    private: list[str] = []
    current_loc: Optional[str] = None

    while True:
        cur.skip_newlines()
        t = cur.peek()
        if t.kind == "eof":
            raise ParseError(t.line, t.col, "automaton block not closed with 'end'")
        if cur.at_keyword("end"):
            cur.next()
            cur.end_of_line()
            break
        if cur.at_keyword("urgent") or cur.at_keyword("loc"):
            urgent = False
            if cur.at_keyword("urgent"):
                cur.next()
                urgent = True
            cur.expect_keyword("loc")
            lname = cur.expect_ident("location name")
            if lname.value in locations:
                raise ParseError(lname.line, lname.col, f"duplicate location {lname.value!r}")
            invariant = Polyhedron.universe(space)
            if cur.at_keyword("invariant"):
                cur.next()
                ineqs, disc = _parse_guard(cur, decls, space)
                if disc:
                    raise ParseError(lname.line, lname.col, "invariants cannot test discrete variables")
                invariant = Polyhedron(space, ineqs)
            cur.end_of_line()
            locations[lname.value] = Location(
                name=lname.value, vector=(lname.value,), invariant=invariant, urgent=urgent
            )
            current_loc = lname.value
        elif cur.at_keyword("when"):
            t = cur.next()
            if current_loc is None:
                raise ParseError(t.line, t.col, "edge before any location")
            ineqs, disc = _parse_guard(cur, decls, space)
            action = None
            resets: frozenset[str] = frozenset()
            updates: tuple = ()
            if cur.at_keyword("sync"):
                cur.next()
                a = cur.expect_ident("action name")
                if a.value not in decls.actions:
                    raise ParseError(a.line, a.col, f"unknown identifier {a.value!r}")
                action = a.value
            if cur.at_keyword("do"):
                cur.next()
                resets, updates = _parse_do(cur, decls)
            cur.expect_keyword("goto")
            target = cur.expect_ident("target location")
            cur.end_of_line()
            if action is not None and action not in used_actions:
                used_actions.append(action)
            edges.append(
                Edge(
                    source=current_loc,
                    guard=Polyhedron(space, ineqs),
                    disc_guard=disc,
                    action=action,
                    resets=resets,
                    updates=updates,
                    target=target.value,
                )
            )
        elif cur.at_keyword("init"):
            cur.next()
            init = cur.expect_ident("location name")
            cur.end_of_line()
        elif cur.at_keyword("final"):
            cur.next()
            if final is not None:
                raise ParseError(t.line, t.col, "one final location per automaton")
            final = cur.expect_ident("location name")
            cur.end_of_line()
        elif cur.at_keyword("private"):
            cur.next()
            while True:
                private.append(cur.expect_ident("location name").value)
                if cur.at_symbol(","):
                    cur.next()
                    continue
                break
            cur.end_of_line()
        else:
            raise ParseError(t.line, t.col, f"unexpected {t.value!r} in automaton block")

    if init is None:
        raise ParseError(t.line, t.col, f"automaton {name.value!r} lacks an init declaration")
    if final is None:
        raise ParseError(t.line, t.col, f"automaton {name.value!r} lacks a final declaration")
    for ref, where in [(init, "init"), (final, "final")]:
        if ref.value not in locations:
            raise ParseError(ref.line, ref.col, f"{where} references unknown location {ref.value!r}")
    for e in edges:
        if e.target not in locations:
            raise ParseError(1, 1, f"edge target {e.target!r} undeclared in {name.value!r}")
    for p in private:
        if p not in locations:
            raise ParseError(1, 1, f"private location {p!r} undeclared in {name.value!r}")

    pta = PTA(
        name=name.value,
        space=space,
        timing_params=tuple(decls.timing),
        data_params=tuple(decls.data),
        actions=tuple(used_actions),
        discretes=dict(decls.discretes),
        locations=locations,
        edges=tuple(edges),
        init=init.value,
        final=final.value,
    )
    return pta, private


def parse_model(text: str, name: str = "model") -> ModelFile:
    """Parse a model file; raises ParseError with line and column on errors."""
    cur = _Cursor(_tokenize(text))
    decls = _Decls()
    automata: list[tuple[PTA, list[str]]] = []

    def declare(names: list[Token], bucket: list, what: str):
        for t in names:
            if decls.kind_of(t.value) is not None:
                raise ParseError(t.line, t.col, f"duplicate declaration of {t.value!r}")
            bucket.append(t.value)

    def ident_list() -> list[Token]:
        names = [cur.expect_ident()]
        while cur.peek().kind == "ident" and cur.peek().value not in KEYWORDS:
            names.append(cur.expect_ident())
        cur.end_of_line()
        return names

    while True:
        cur.skip_newlines()
        t = cur.peek()
        if t.kind == "eof":
            break
        if cur.at_keyword("clock"):
            cur.next()
            declare(ident_list(), decls.clocks, "clock")
        elif cur.at_keyword("param"):
            cur.next()
            declare(ident_list(), decls.timing, "parameter")
        elif cur.at_keyword("dataparam"):
            cur.next()
            declare(ident_list(), decls.data, "parameter")
        elif cur.at_keyword("action"):
            cur.next()
            declare(ident_list(), decls.actions, "action")
        elif cur.at_keyword("sync"):
            cur.next()
            for tok in ident_list():
                if tok.value not in decls.actions:
                    raise ParseError(tok.line, tok.col, f"unknown identifier {tok.value!r}")
                if tok.value not in decls.sync:
                    decls.sync.append(tok.value)
        elif cur.at_keyword("discrete"):
            cur.next()
            vname = cur.expect_ident("variable name")
            if decls.kind_of(vname.value) is not None:
                raise ParseError(vname.line, vname.col, f"duplicate declaration of {vname.value!r}")
            cur.expect_keyword("in")
            if cur.at_keyword("bool"):
                cur.next()
                domain: tuple = (False, True)
            else:
                cur.expect_symbol("{")
                values = [_parse_value(cur)]
                while cur.at_symbol(","):
                    cur.next()
                    values.append(_parse_value(cur))
                cur.expect_symbol("}")
                domain = tuple(values)
            cur.expect_keyword("init")
            init_val = _parse_value(cur)
            cur.end_of_line()
            if init_val not in domain:
                raise ParseError(vname.line, vname.col, "initial value outside domain")
            decls.discretes[vname.value] = DiscreteVar(vname.value, domain, init_val)
        elif cur.at_keyword("automaton"):
            cur.next()
            space = Space(tuple(decls.clocks), tuple(decls.timing) + tuple(decls.data))
            automata.append(_parse_automaton(cur, decls, space))
        else:
            raise ParseError(t.line, t.col, f"unexpected {t.value!r}")

    if not automata:
        raise ParseError(1, 1, "no automaton block")
    private: list[str] = []
    for _, priv in automata:
        for p in priv:
            if p not in private:
                private.append(p)
    return ModelFile(
        clocks=tuple(decls.clocks),
        timing_params=tuple(decls.timing),
        data_params=tuple(decls.data),
        actions=tuple(decls.actions),
        sync_actions=tuple(decls.sync),
        discretes=dict(decls.discretes),
        automata=[a for a, _ in automata],
        private=tuple(private),
        name=name,
    )


def load_model_path(path) -> ModelFile:
    path = Path(path)
    return parse_model(path.read_text(encoding="utf-8"), name=path.stem)


def bundled_models_dir() -> Path:
    return Path(resources.files("topacity") / "models")


def load_bundled(stem: str) -> ModelFile:
    return load_model_path(bundled_models_dir() / f"{stem}.pta")


# ---------------------------------------------------------------------------
# printing


def _is_implicit_nonneg(iq: Inequality, space: Space) -> bool:
    return (
        iq.rel is Rel.LE
        and iq.const == 0
        and len(iq.coeffs) == 1
        and not space.is_clock(iq.coeffs[0][0])
        and iq.coeffs[0][1] < 0
    )


def _value_str(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _guard_str(poly: Polyhedron, disc, space: Space) -> str:
    atoms = [iq.render() for iq in poly.constraints if not _is_implicit_nonneg(iq, space)]
    atoms += [f"{var} {op} {_value_str(val)}" for var, op, val in disc]
    return " & ".join(atoms) if atoms else "true"


def print_model(mf: ModelFile) -> str:
    """Canonical concrete syntax; stable under parse - print - parse."""
    out: list[str] = []
    if mf.clocks:
        out.append("clock " + " ".join(mf.clocks))
    if mf.timing_params:
        out.append("param " + " ".join(mf.timing_params))
    if mf.data_params:
        out.append("dataparam " + " ".join(mf.data_params))
    for v in mf.discretes.values():
        domain = "bool" if v.domain == (False, True) else (
            "{" + ", ".join(_value_str(x) for x in v.domain) + "}"
        )
        out.append(f"discrete {v.name} in {domain} init {_value_str(v.init)}")
    if mf.actions:
        out.append("action " + " ".join(mf.actions))
    if mf.sync_actions:
        out.append("sync " + " ".join(mf.sync_actions))
    private = set(mf.private)
    for pta in mf.automata:
        out.append("")
        out.append(f"automaton {pta.name}")
        for loc in pta.locations.values():
            head = "  urgent loc " if loc.urgent else "  loc "
            head += loc.name
            inv_atoms = [
                iq.render()
                for iq in loc.invariant.constraints
                if not _is_implicit_nonneg(iq, pta.space)
            ]
            if inv_atoms:
                head += " invariant " + " & ".join(inv_atoms)
            out.append(head)
            for e in pta.edges_from(loc.name):
                line = f"    when {_guard_str(e.guard, e.disc_guard, pta.space)}"
                if e.action is not None:
                    line += f" sync {e.action}"
                assigns = [f"{c} := 0" for c in sorted(e.resets)]
                assigns += [f"{v} := {_value_str(val)}" for v, val in e.updates]
                if assigns:
                    line += " do " + ", ".join(assigns)
                line += f" goto {e.target}"
                out.append(line)
        out.append(f"  init {pta.init}")
        out.append(f"  final {pta.final}")
        mine = [p for p in mf.private if p in pta.locations and p in private]
        if mine:
            out.append("  private " + ", ".join(mine))
        out.append("end")
    return "\n".join(out) + "\n"
