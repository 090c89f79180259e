"""Automaton data model and structural transformations.

A PTA here is a single automaton over clocks, timing parameters, data
parameters (rational-valued stand-ins for program inputs and secrets) and
finite-domain discrete variables.  Networks are reduced to single automata by
:func:`synchronized_product`.  The opacity pipeline is built from the
transformations in this module: parameter valuation, lower/upper
classification, the lower-to-zero / upper-to-infinity reduction, enrichment
with the visited-private flag and the absolute-time clock/parameter pair,
and self-composition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import gcd
from typing import Iterable, Mapping, Optional, Sequence

from .poly import Inequality, Polyhedron, Rel, Space


class ModelError(ValueError):
    """Structural problem in an automaton or transformation input."""


DiscValue = object  # bool or int


@dataclass(frozen=True)
class DiscreteVar:
    name: str
    domain: tuple
    init: DiscValue

    def __post_init__(self):
        if self.init not in self.domain:
            raise ModelError(f"initial value {self.init!r} outside domain of {self.name}")


@dataclass(frozen=True)
class Location:
    name: str
    vector: tuple[str, ...]
    invariant: Polyhedron
    urgent: bool = False


@dataclass(frozen=True)
class Edge:
    source: str
    guard: Polyhedron
    disc_guard: tuple[tuple[str, str, DiscValue], ...]  # (var, op, value)
    action: Optional[str]  # None = silent, never synchronizes
    resets: frozenset[str]
    updates: tuple[tuple[str, DiscValue], ...]
    target: str


def _eval_disc_atom(value: DiscValue, op: str, ref: DiscValue) -> bool:
    if op == "=":
        return value == ref
    if op == "!=":
        return value != ref
    if op == "<":
        return value < ref
    if op == "<=":
        return value <= ref
    if op == ">":
        return value > ref
    if op == ">=":
        return value >= ref
    raise ModelError(f"unknown discrete operator {op!r}")


def disc_guard_holds(guard: tuple[tuple[str, str, DiscValue], ...], valuation: Mapping[str, DiscValue]) -> bool:
    return all(_eval_disc_atom(valuation[var], op, ref) for var, op, ref in guard)


@dataclass
class PTA:
    """One (possibly product) parametric timed automaton."""

    name: str
    space: Space
    timing_params: tuple[str, ...]
    data_params: tuple[str, ...]
    actions: tuple[str, ...]
    discretes: dict[str, DiscreteVar]
    locations: dict[str, Location]
    edges: tuple[Edge, ...]
    init: str
    final: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if tuple(self.timing_params) + tuple(self.data_params) != self.space.params:
            raise ModelError("parameter lists disagree with the dimension universe")
        for key in (self.init, self.final):
            if key not in self.locations:
                raise ModelError(f"undeclared location {key!r}")
        for e in self.edges:
            if e.source not in self.locations or e.target not in self.locations:
                raise ModelError(f"edge endpoint undeclared: {e.source} -> {e.target}")
            for c in e.resets:
                if not self.space.is_clock(c):
                    raise ModelError(f"reset of non-clock {c!r}")
            for var, val in e.updates:
                if var not in self.discretes:
                    raise ModelError(f"update of undeclared variable {var!r}")
                if val not in self.discretes[var].domain:
                    raise ModelError(f"value {val!r} outside domain of {var!r}")

    @property
    def clocks(self) -> tuple[str, ...]:
        return self.space.clocks

    def edges_from(self, source: str) -> list[Edge]:
        return [e for e in self.edges if e.source == source]

    def initial_discrete(self) -> tuple[tuple[str, DiscValue], ...]:
        return tuple((v.name, v.init) for v in self.discretes.values())

    def map_polys(self, fn) -> "PTA":
        locs = {
            n: replace(l, invariant=fn(l.invariant)) for n, l in self.locations.items()
        }
        edges = tuple(replace(e, guard=fn(e.guard)) for e in self.edges)
        return replace(self, locations=locs, edges=edges)

    def constraint_polys(self) -> list[Polyhedron]:
        return [l.invariant for l in self.locations.values()] + [e.guard for e in self.edges]


def fresh_name(base: str, taken: Iterable[str]) -> str:
    taken = set(taken)
    if base not in taken:
        return base
    i = 1
    while f"{base}_{i}" in taken:
        i += 1
    return f"{base}_{i}"


# ---------------------------------------------------------------------------
# synchronized product


def synchronized_product(components: Sequence[PTA], sync_actions: Iterable[str]) -> PTA:
    """Strong-broadcast product: sync actions fire jointly in every owning
    component with conjoined guards and unioned resets; everything else
    interleaves.  Shared clock and parameter names denote shared dimensions."""
    if not components:
        raise ModelError("empty product")
    sync = set(sync_actions)
    owners = {a: [i for i, c in enumerate(components) if a in c.actions] for a in sync}
    for a, who in owners.items():
        if not who:
            raise ModelError(f"sync action {a!r} owned by no component")

    clocks: list[str] = []
    timing: list[str] = []
    data: list[str] = []
    for c in components:
        for x in c.clocks:
            if x not in clocks:
                clocks.append(x)
        for p in c.timing_params:
            if p in data:
                raise ModelError(f"parameter {p!r} tagged both timing and data")
            if p not in timing:
                timing.append(p)
        for p in c.data_params:
            if p in timing:
                raise ModelError(f"parameter {p!r} tagged both timing and data")
            if p not in data:
                data.append(p)
    space = Space(tuple(clocks), tuple(timing) + tuple(data))

    discretes: dict[str, DiscreteVar] = {}
    for c in components:
        for v in c.discretes.values():
            if v.name in discretes and discretes[v.name] != v:
                raise ModelError(f"conflicting discrete variable {v.name!r} in product")
            discretes.setdefault(v.name, v)

    actions: list[str] = []
    for c in components:
        for a in c.actions:
            if a not in actions:
                actions.append(a)

    def respace(poly: Polyhedron) -> Polyhedron:
        return Polyhedron(space, poly.constraints)

    def loc_name(vector: tuple[str, ...]) -> str:
        return "|".join(vector)

    locations: dict[str, Location] = {}
    for combo in itertools.product(*(list(c.locations.values()) for c in components)):
        vector = tuple(itertools.chain.from_iterable(l.vector for l in combo))
        inv = Polyhedron.universe(space)
        for l in combo:
            inv = inv.intersect(respace(l.invariant))
        locations[loc_name(vector)] = Location(
            name=loc_name(vector),
            vector=vector,
            invariant=inv,
            urgent=any(l.urgent for l in combo),
        )

    names = [list(c.locations) for c in components]

    def product_edges() -> list[Edge]:
        out: list[Edge] = []
        # interleaved: silent edges and non-sync actions move one component
        for i, c in enumerate(components):
            for e in c.edges:
                if e.action is not None and e.action in sync:
                    continue
                others = [names[j] for j in range(len(components)) if j != i]
                for combo in itertools.product(*others):
                    frame = list(combo)
                    src = frame[:i] + [e.source] + frame[i:]
                    dst = frame[:i] + [e.target] + frame[i:]
                    out.append(
                        Edge(
                            source=loc_name(_flatten(components, src)),
                            guard=respace(e.guard),
                            disc_guard=e.disc_guard,
                            action=e.action,
                            resets=e.resets,
                            updates=e.updates,
                            target=loc_name(_flatten(components, dst)),
                        )
                    )
        # joint: one edge per owning component, others stand still
        for a in [x for x in actions if x in sync]:
            who = owners[a]
            choices = [[e for e in components[i].edges if e.action == a] for i in who]
            others = [j for j in range(len(components)) if j not in who]
            for picked in itertools.product(*choices):
                for still in itertools.product(*(names[j] for j in others)):
                    src = [None] * len(components)
                    dst = [None] * len(components)
                    for i, e in zip(who, picked):
                        src[i], dst[i] = e.source, e.target
                    for j, loc in zip(others, still):
                        src[j] = dst[j] = loc
                    guard = Polyhedron.universe(space)
                    disc_guard: tuple = ()
                    resets: frozenset[str] = frozenset()
                    updates: tuple = ()
                    for e in picked:
                        guard = guard.intersect(respace(e.guard))
                        disc_guard += e.disc_guard
                        resets |= e.resets
                        updates += e.updates
                    out.append(
                        Edge(
                            source=loc_name(_flatten(components, src)),
                            guard=guard,
                            disc_guard=disc_guard,
                            action=a,
                            resets=resets,
                            updates=updates,
                            target=loc_name(_flatten(components, dst)),
                        )
                    )
        return out

    return PTA(
        name="||".join(c.name for c in components),
        space=space,
        timing_params=tuple(timing),
        data_params=tuple(data),
        actions=tuple(actions),
        discretes=discretes,
        locations=locations,
        edges=tuple(product_edges()),
        init=loc_name(_flatten(components, [c.init for c in components])),
        final=loc_name(_flatten(components, [c.final for c in components])),
        meta={"components": [c.name for c in components], "sync": sorted(sync)},
    )


def _flatten(components: Sequence[PTA], names: Sequence[str]) -> tuple[str, ...]:
    vector: list[str] = []
    for c, n in zip(components, names):
        vector.extend(c.locations[n].vector)
    return tuple(vector)


# ---------------------------------------------------------------------------
# valuation


def valuate_pta(a: PTA, valuation: Mapping[str, Fraction]) -> PTA:
    """Substitute parameter values; valuated parameters leave the universe.

    The valuation may be partial (e.g. data parameters deliberately left
    symbolic); values must be nonnegative rationals.
    """
    vals = {p: Fraction(v) for p, v in valuation.items()}
    for p, v in vals.items():
        if p not in a.space.params:
            raise ModelError(f"valuation of unknown parameter {p!r}")
        if v < 0:
            raise ModelError(f"parameter valuations are nonnegative, got {p}={v}")
    new_space = a.space.without(vals)

    def sub(poly: Polyhedron) -> Polyhedron:
        return poly.substitute(vals).on_space(new_space)

    out = a.map_polys(sub)
    return replace(
        out,
        space=new_space,
        timing_params=tuple(p for p in a.timing_params if p not in vals),
        data_params=tuple(p for p in a.data_params if p not in vals),
    )


# ---------------------------------------------------------------------------
# lower/upper classification and the 0/infinity reduction


@dataclass(frozen=True)
class LuPartition:
    lower: frozenset[str]
    upper: frozenset[str]


@dataclass(frozen=True)
class NotLU:
    witness: str


def _is_implicit_nonneg(iq: Inequality, params: set[str]) -> bool:
    return (
        iq.rel is Rel.LE
        and iq.const == 0
        and len(iq.coeffs) == 1
        and iq.coeffs[0][0] in params
        and iq.coeffs[0][1] < 0
    )


def parameter_polarities(a: PTA) -> dict[str, set[str]]:
    """Occurrence polarities per parameter from every guard and invariant.

    In a clock comparison, a positive parameter coefficient on the
    less-or-equal side means the parameter acts as a lower bound for the
    clock and a negative one as an upper bound.  A parameter compared under
    an equality, or occurring in a parameter-only constraint, acts as both.
    Background nonnegativity constraints do not count as occurrences.
    """
    params = set(a.space.params)
    pol: dict[str, set[str]] = {p: set() for p in a.space.params}
    for poly in a.constraint_polys():
        for iq in poly.constraints:
            pdims = [(d, c) for d, c in iq.coeffs if d in params]
            if not pdims:
                continue
            if _is_implicit_nonneg(iq, params):
                continue
            has_clock = any(a.space.is_clock(d) for d, _ in iq.coeffs)
            for d, c in pdims:
                if iq.rel is Rel.EQ or not has_clock:
                    pol[d] |= {"lower", "upper"}
                elif c > 0:
                    pol[d].add("lower")
                else:
                    pol[d].add("upper")
    return pol


def is_lu(a: PTA):
    """Partition parameters into lower-bound and upper-bound sets, or report
    the first parameter (declaration order) used with both polarities."""
    pol = parameter_polarities(a)
    for p in a.space.params:
        if pol[p] == {"lower", "upper"}:
            return NotLU(witness=p)
    lower = frozenset(p for p in a.space.params if pol[p] != {"upper"})
    upper = frozenset(p for p in a.space.params if pol[p] == {"upper"})
    return LuPartition(lower=lower, upper=upper)


def a0inf(a: PTA, part: LuPartition) -> PTA:
    """Valuate lower-bound parameters at 0 and erase upper-bound comparisons.

    Upper-bound parameters only appear relaxing their constraints as they
    grow, so every inequality still mentioning one after the lower-bound
    substitution is dropped (it holds for sufficiently large values).  The
    result is parameter-free.
    """
    declared = part.lower | part.upper
    if part.lower & part.upper or not declared >= set(a.space.params):
        raise ModelError("partition does not cover the parameters")
    pol = parameter_polarities(a)
    for p in a.space.params:
        if "lower" in pol[p] and p in part.upper:
            raise ModelError(f"parameter {p!r} occurs as a lower bound but is tagged upper")
        if "upper" in pol[p] and p in part.lower:
            raise ModelError(f"parameter {p!r} occurs as an upper bound but is tagged lower")
    zeros = {p: Fraction(0) for p in part.lower if p in a.space.params}
    uppers = set(part.upper)
    new_space = Space(a.space.clocks, ())

    def transform(poly: Polyhedron) -> Polyhedron:
        kept = []
        for iq in poly.constraints:
            iq = iq.substitute(zeros)
            remaining = [d for d, _ in iq.coeffs if d in uppers]
            if remaining:
                if iq.rel is Rel.EQ:
                    raise ModelError("equality on an upper-bound parameter")
                # valid L/U form guarantees negative coefficients here
                continue
            kept.append(iq)
        return Polyhedron(new_space, kept)

    out = a.map_polys(transform)
    return replace(out, space=new_space, timing_params=(), data_params=())


# ---------------------------------------------------------------------------
# enrichment, copy and self-composition


def enrich(a: PTA, priv: Iterable[str], final: str) -> PTA:
    """Add the visited-private flag, the finish action, and the absolute-time
    clock/parameter pair pinning the duration of every run into `final`.

    The flag becomes true on any edge whose target is private (initially true
    when the initial location itself is private); every edge into `final` is
    relabeled with the finish action and guarded so the absolute clock equals
    the duration parameter.
    """
    priv = set(priv)
    if not priv:
        raise ModelError("empty private location set")
    for name in priv | {final}:
        if name not in a.locations:
            raise ModelError(f"undeclared location {name!r}")
    if final in priv:
        raise ModelError("final location cannot be private")

    taken = set(a.space.dims) | set(a.discretes) | set(a.actions)
    abs_clock = fresh_name("x_abs", taken)
    abs_param = fresh_name("p_abs", taken | {abs_clock})
    flag = fresh_name("b", set(a.discretes) | {abs_clock, abs_param})
    finish = fresh_name("finish", set(a.actions))

    space = Space(
        a.space.clocks + (abs_clock,),
        a.timing_params + (abs_param,) + a.data_params,
    )

    def respace(poly: Polyhedron) -> Polyhedron:
        return Polyhedron(space, poly.constraints)

    warnings = []
    if not any(e.target == final for e in a.edges):
        warnings.append(f"final location {final!r} has no incoming edges; the analysis is vacuous")

    arrival = Inequality({abs_clock: 1, abs_param: -1}, 0, Rel.EQ)
    edges = []
    for e in a.edges:
        guard = respace(e.guard)
        action = e.action
        updates = e.updates
        if e.target in priv:
            updates = updates + ((flag, True),)
        if e.target == final:
            guard = guard.conjoin([arrival])
            action = finish
        edges.append(replace(e, guard=guard, action=action, updates=updates))

    locations = {
        n: replace(l, invariant=respace(l.invariant)) for n, l in a.locations.items()
    }
    discretes = dict(a.discretes)
    discretes[flag] = DiscreteVar(flag, (False, True), a.init in priv)

    meta = dict(a.meta)
    meta["enrich"] = {
        "flag": flag,
        "finish": finish,
        "abs_clock": abs_clock,
        "abs_param": abs_param,
        "priv": tuple(sorted(priv)),
        "final": final,
    }
    meta["warnings"] = list(meta.get("warnings", ())) + warnings

    return PTA(
        name=a.name,
        space=space,
        timing_params=a.timing_params + (abs_param,),
        data_params=a.data_params,
        actions=a.actions + (finish,),
        discretes=discretes,
        locations=locations,
        edges=tuple(edges),
        init=a.init,
        final=a.final,
        meta=meta,
    )


def copy_rename(a: PTA) -> PTA:
    """Primed copy of an enriched automaton.

    Locations, clocks, discrete variables and data parameters get a prime
    suffix; timing parameters (including the duration parameter) and the
    absolute clock are shared with the original, as are all action names.
    """
    info = a.meta.get("enrich")
    if info is None:
        raise ModelError("copy_rename expects an enriched automaton")
    shared = {info["abs_clock"]}
    clock_map = {c: c if c in shared else c + "'" for c in a.space.clocks}
    data_map = {p: p + "'" for p in a.data_params}
    dim_map = {**clock_map, **data_map}
    space = Space(
        tuple(clock_map[c] for c in a.space.clocks),
        a.timing_params + tuple(data_map[p] for p in a.data_params),
    )

    def remap(poly: Polyhedron) -> Polyhedron:
        return poly.rename_dims(dim_map, space)

    locations = {}
    for l in a.locations.values():
        name = l.name + "'"
        locations[name] = Location(
            name=name,
            vector=tuple(v + "'" for v in l.vector),
            invariant=remap(l.invariant),
            urgent=l.urgent,
        )
    var_map = {v: v + "'" for v in a.discretes}
    discretes = {
        var_map[v.name]: DiscreteVar(var_map[v.name], v.domain, v.init)
        for v in a.discretes.values()
    }
    edges = tuple(
        Edge(
            source=e.source + "'",
            guard=remap(e.guard),
            disc_guard=tuple((var_map[v], op, val) for v, op, val in e.disc_guard),
            action=e.action,
            resets=frozenset(clock_map[c] for c in e.resets),
            updates=tuple((var_map[v], val) for v, val in e.updates),
            target=e.target + "'",
        )
        for e in a.edges
    )
    meta = dict(a.meta)
    meta["enrich"] = {**info, "flag": var_map[info["flag"]], "final": info["final"] + "'",
                      "priv": tuple(p + "'" for p in info["priv"])}
    return PTA(
        name=a.name + "'",
        space=space,
        timing_params=a.timing_params,
        data_params=tuple(data_map[p] for p in a.data_params),
        actions=a.actions,
        discretes=discretes,
        locations=locations,
        edges=edges,
        init=a.init + "'",
        final=a.final + "'",
        meta=meta,
    )


def self_compose(a_enriched: PTA) -> PTA:
    """Product of an enriched automaton with its primed copy, synchronizing
    only on the finish action so both runs end at the same instant."""
    info = a_enriched.meta.get("enrich")
    if info is None:
        raise ModelError("self_compose expects an enriched automaton")
    twin = copy_rename(a_enriched)
    product = synchronized_product([a_enriched, twin], {info["finish"]})
    product.meta["self_compose"] = {
        "flag1": info["flag"],
        "flag2": twin.meta["enrich"]["flag"],
        "finish": info["finish"],
        "abs_param": info["abs_param"],
        "data_params": a_enriched.data_params + twin.data_params,
    }
    return product


# ---------------------------------------------------------------------------
# integer rescaling and largest constants (region machinery support)


def _clock_bounds(a: PTA):
    for poly in a.constraint_polys():
        for iq in poly.constraints:
            clock_coeffs = [(d, c) for d, c in iq.coeffs if a.space.is_clock(d)]
            if len(clock_coeffs) == 1 and len(iq.coeffs) == 1:
                _, coeff = clock_coeffs[0]
                yield clock_coeffs[0][0], Fraction(-iq.const, coeff)


def rescale_to_integers(a: PTA) -> tuple[PTA, int]:
    """Multiply all constants of a parameter-free automaton by the least
    common multiple of their denominators; durations scale by that factor."""
    if a.space.params:
        raise ModelError("rescaling applies to parameter-free automata")
    factor = 1
    for _, bound in _clock_bounds(a):
        factor = factor * bound.denominator // gcd(factor, bound.denominator)
    if factor == 1:
        return a, 1

    def scale(poly: Polyhedron) -> Polyhedron:
        return Polyhedron(
            a.space,
            (Inequality(dict(iq.coeffs), iq.const * factor, iq.rel) for iq in poly.constraints),
            _raw=True,
        )

    return a.map_polys(scale), factor


def largest_clock_constants(a: PTA) -> dict[str, int]:
    """Per-clock maximum compared constant, at least 0; constants must be
    integral (rescale first otherwise)."""
    if a.space.params:
        raise ModelError("largest constants are defined for parameter-free automata")
    out = {c: 0 for c in a.space.clocks}
    for clock, bound in _clock_bounds(a):
        if bound.denominator != 1:
            raise ModelError(f"non-integer constant {bound} compared to {clock}; rescale first")
        out[clock] = max(out[clock], max(0, int(bound)))
    return out
