"""Parametric zone graph construction and reachability synthesis.

A symbolic state pairs a location (vector) and a concrete discrete valuation
with a zone: a polyhedron over clocks and parameters.  `efsynth` explores the
zone graph breadth-first with inclusion subsumption and a state-count budget,
and returns the parameter constraint under which the goal is reachable.  When
the frontier is exhausted the result is exact; when the budget truncates it,
the result is an under-approximation and is flagged as incomplete.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Callable, Mapping, Optional

from .model import PTA, Edge, ModelError, disc_guard_holds
from .poly import ConstraintUnion, Inequality, Polyhedron, Rel

DiscItems = tuple[tuple[str, object], ...]
GoalPredicate = Callable[[tuple[str, ...], Mapping[str, object]], bool]

DEFAULT_BUDGET = 100000


class SymbolicState:
    """Location vector + discrete valuation + zone; identity ignores the
    cached witness point."""

    __slots__ = ("loc", "vector", "disc", "zone", "witness")

    def __init__(self, loc: str, vector: tuple[str, ...], disc: DiscItems, zone: Polyhedron,
                 witness: Optional[dict[str, Fraction]] = None):
        self.loc = loc
        self.vector = vector
        self.disc = tuple(sorted(disc))
        self.zone = zone
        self.witness = witness

    @property
    def key(self):
        return (self.loc, self.disc)

    def disc_map(self) -> dict[str, object]:
        return dict(self.disc)

    def __eq__(self, other):
        return (
            isinstance(other, SymbolicState)
            and self.loc == other.loc
            and self.disc == other.disc
            and self.zone == other.zone
        )

    def __hash__(self):
        return hash((self.loc, self.disc, self.zone))

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"<State {self.loc} {dict(self.disc)} {self.zone.render()}>"


@dataclass
class ExplorationResult:
    constraint: ConstraintUnion
    complete: bool
    states_explored: int
    frontier_truncated: bool

    def __post_init__(self):
        assert not (self.complete and self.frontier_truncated)

    @property
    def goal_reached(self) -> bool:
        return not self.constraint.is_false


def initial_state(a: PTA) -> SymbolicState:
    """Origin zone, time-elapsed unless the initial location is urgent, under
    the initial invariant."""
    origin = Polyhedron(a.space, [Inequality({c: 1}, 0, Rel.EQ) for c in a.space.clocks])
    l0 = a.locations[a.init]
    if not origin.intersect(l0.invariant).is_satisfiable():
        raise ModelError(f"invariant of initial location {a.init!r} excludes the origin")
    zone = origin if l0.urgent else origin.time_elapse()
    zone = zone.intersect(l0.invariant)
    return SymbolicState(a.init, l0.vector, a.initial_discrete(), zone, zone.sample_point())


def succ(a: PTA, s: SymbolicState, e: Edge) -> Optional[SymbolicState]:
    """Symbolic successor: guard, reset, target invariant, time elapse
    (skipped for urgent targets), target invariant again.  None when the
    discrete guard fails or the zone empties."""
    if e.source != s.loc:
        raise ModelError(f"edge from {e.source!r} applied in {s.loc!r}")
    if not disc_guard_holds(e.disc_guard, s.disc_map()):
        return None
    zone = s.zone.intersect(e.guard)
    if e.resets:
        zone = zone.reset(e.resets)
    target = a.locations[e.target]
    zone = zone.intersect(target.invariant)
    if not target.urgent:
        zone = zone.time_elapse()
    zone = zone.intersect(target.invariant)
    witness = zone.sample_point()
    if witness is None:
        return None
    disc = dict(s.disc)
    for var, val in e.updates:
        disc[var] = val
    return SymbolicState(e.target, target.vector, tuple(disc.items()), zone, witness)


def _scale_witness(witness: dict[str, Fraction]) -> tuple[dict[str, int], int]:
    denom = 1
    for v in witness.values():
        denom = denom * v.denominator // gcd(denom, v.denominator)
    return {d: int(v * denom) for d, v in witness.items()}, denom


def _witness_inside(constraints, scaled: dict[str, int], denom: int) -> bool:
    for iq in constraints:
        v = iq.const * denom
        for d, c in iq.coeffs:
            v += c * scaled[d]
        if iq.rel is Rel.LE:
            if v > 0:
                return False
        elif iq.rel is Rel.LT:
            if v >= 0:
                return False
        elif v != 0:
            return False
    return True


class _KeyStore:
    """Kept zones at one (location, discrete) key, indexed for fast
    subsumption queries.

    A zone can only include a candidate state if every one of its equality
    constraints holds at the candidate's witness point.  Zones are therefore
    bucketed by the coefficient vectors of their equality constraints (a
    prefix of the canonical form); given a witness, each coefficient vector
    pins the only possible constant, so one dictionary lookup per distinct
    signature retrieves every zone the full scan could have accepted.
    Equality-free zones sit in a plain list filtered by witness membership."""

    __slots__ = ("eq_index", "plain", "hashes")

    def __init__(self):
        self.eq_index: dict[tuple, dict[tuple, list[Polyhedron]]] = {}
        self.plain: list[Polyhedron] = []
        self.hashes: set[Polyhedron] = set()

    @staticmethod
    def _eq_prefix(zone: Polyhedron):
        sig = []
        consts = []
        for iq in zone.constraints:
            if iq.rel is not Rel.EQ:
                break
            sig.append(iq.coeffs)
            consts.append(iq.const)
        return tuple(sig), tuple(consts)

    def insert(self, zone: Polyhedron):
        self.hashes.add(zone)
        sig, consts = self._eq_prefix(zone)
        if sig:
            self.eq_index.setdefault(sig, {}).setdefault(consts, []).append(zone)
        else:
            self.plain.append(zone)

    def candidates(self, scaled: dict[str, int], denom: int):
        for sig, by_consts in self.eq_index.items():
            consts = []
            for coeffvec in sig:
                v = 0
                for d, c in coeffvec:
                    v += c * scaled[d]
                if v % denom:
                    break
                consts.append(-(v // denom))
            else:
                bucket = by_consts.get(tuple(consts))
                if bucket:
                    yield from bucket
        yield from self.plain

    def holds_subsuming(self, state: "SymbolicState") -> bool:
        if state.zone in self.hashes:
            return True
        scaled, denom = _scale_witness(state.witness)
        for p in self.candidates(scaled, denom):
            if _witness_inside(p.constraints, scaled, denom) and p.includes(state.zone):
                return True
        return False


def efsynth(
    a: PTA,
    goal: GoalPredicate,
    budget: int = DEFAULT_BUDGET,
    *,
    subsumption: bool = True,
    bound: Optional[Polyhedron] = None,
    stop_at_first_goal: bool = False,
) -> ExplorationResult:
    """Breadth-first reachability synthesis over the parametric zone graph.

    The returned constraint is the union, over goal states, of their zones
    projected onto the parameters.  A new state is discarded exactly when a
    kept state with the same location and discrete part has an including
    zone; goal states are collected but not expanded.  The budget counts
    symbolic states created; exceeding it truncates the frontier and flags
    the result incomplete (the constraint is then an under-approximation).

    `bound` is an optional extra zone conjoined to every state (used for
    duration-bounded queries); `subsumption=False` disables inclusion checks
    (exact but slower, for cross-validation).
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")

    edges_by_source: dict[str, list[Edge]] = {}
    for e in a.edges:
        edges_by_source.setdefault(e.source, []).append(e)

    def constrain(state: SymbolicState) -> Optional[SymbolicState]:
        if bound is None:
            return state
        zone = state.zone.intersect(bound)
        witness = zone.sample_point()
        if witness is None:
            return None
        return SymbolicState(state.loc, state.vector, state.disc, zone, witness)

    clock_dims = a.space.clocks
    goal_zones: list[Polyhedron] = []
    seen_goal_zones: set = set()
    store: dict[tuple, _KeyStore] = {}
    queue: deque[SymbolicState] = deque()
    created = 0
    truncated = False
    goal_found = False

    def record_goal(state: SymbolicState):
        nonlocal goal_found
        goal_found = True
        proj = state.zone.eliminate(clock_dims)
        if proj not in seen_goal_zones:
            seen_goal_zones.add(proj)
            goal_zones.append(proj)

    def subsumed(state: SymbolicState) -> bool:
        ks = store.get(state.key)
        if ks is None:
            return False
        if not subsumption:
            return state.zone in ks.hashes
        return ks.holds_subsuming(state)

    def keep(state: SymbolicState):
        store.setdefault(state.key, _KeyStore()).insert(state.zone)
        queue.append(state)

    init = constrain(initial_state(a))
    if init is not None:
        created = 1
        if goal(init.vector, init.disc_map()):
            record_goal(init)
        else:
            keep(init)

    while queue and not truncated and not (stop_at_first_goal and goal_found):
        s = queue.popleft()
        for e in edges_by_source.get(s.loc, ()):
            t = succ(a, s, e)
            if t is None:
                continue
            t = constrain(t)
            if t is None:
                continue
            created += 1
            if created > budget:
                truncated = True
                break
            if goal(t.vector, t.disc_map()):
                record_goal(t)
                if stop_at_first_goal:
                    break
                continue
            if subsumed(t):
                continue
            keep(t)

    complete = not truncated and not queue
    if stop_at_first_goal and goal_found:
        complete = False  # exploration intentionally cut short
    return ExplorationResult(
        constraint=ConstraintUnion(a.space, goal_zones),
        complete=complete and not truncated,
        states_explored=created,
        frontier_truncated=truncated,
    )
