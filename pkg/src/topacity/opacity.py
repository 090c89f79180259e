"""Opacity analyses over the total execution time.

The questions answered here all compare two duration sets: the times at
which the final location is reachable by runs that visited the private
location, and by runs that avoided it.  Both are computed with one
parametric trick: enrich the model with a visited-private flag and an
absolute-time clock/parameter pair, then synthesize the duration parameter
by reachability.  A system is opaque for exactly the durations realized
both ways; it is fully opaque when the two sets are equal.

Budgets make non-termination a first-class outcome: a truncated exploration
yields an under-approximated duration set and an `Inconclusive` verdict
instead of an exception.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from .durations import DurationSet, to_duration_set
from .model import (
    PTA,
    LuPartition,
    ModelError,
    a0inf,
    enrich,
    self_compose,
    valuate_pta,
)
from .poly import Space
from .symsem import DEFAULT_BUDGET, ExplorationResult, efsynth


class Inconclusive:
    """Sentinel for budget-limited answers."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Inconclusive"

    def __bool__(self):
        raise TypeError("inconclusive answer used as a boolean")


INCONCLUSIVE = Inconclusive()


@dataclass(frozen=True)
class OpacitySpec:
    """Model, private location set, final location, optional valuation."""

    model: PTA
    priv: frozenset[str]
    final: str
    fixed_valuation: Optional[Mapping[str, Fraction]] = None

    def __post_init__(self):
        object.__setattr__(self, "priv", frozenset(self.priv))
        if not self.priv:
            raise ModelError("empty private location set")
        for name in set(self.priv) | {self.final}:
            if name not in self.model.locations:
                raise ModelError(f"undeclared location {name!r}")
        if self.final in self.priv:
            raise ModelError("final location cannot be private")


class VerdictKind(enum.Enum):
    OPAQUE = "Opaque"
    NOT_OPAQUE_FIXABLE = "NotOpaqueFixable"
    NOT_OPAQUE_VULNERABLE = "NotOpaqueVulnerable"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class OpacityVerdict:
    kind: VerdictKind
    opaque_times: DurationSet
    priv_times: DurationSet
    pub_times: DurationSet
    complete: bool
    states_explored: int
    warnings: tuple[str, ...] = ()


def _enrich_for(spec: OpacitySpec):
    enriched = enrich(spec.model, spec.priv, spec.final)
    if spec.fixed_valuation is not None:
        enriched = valuate_pta(enriched, spec.fixed_valuation)
    return enriched


def _dreach_run(spec: OpacitySpec, polarity: str, budget: int):
    """Shared core of `dreach`: returns (result, enriched automaton)."""
    if polarity not in ("priv", "pub"):
        raise ValueError(f"polarity must be 'priv' or 'pub', got {polarity!r}")
    enriched = _enrich_for(spec)
    info = enriched.meta["enrich"]
    flag = info["flag"]
    final_vector = enriched.locations[spec.final].vector
    want = polarity == "priv"

    def goal(vector, disc):
        return vector == final_vector and disc[flag] is want

    result = efsynth(enriched, goal, budget)
    constraint = result.constraint.eliminate(enriched.data_params + enriched.space.clocks)
    constraint = constraint.on_space(Space((), enriched.timing_params))
    result = ExplorationResult(
        constraint=constraint,
        complete=result.complete,
        states_explored=result.states_explored,
        frontier_truncated=result.frontier_truncated,
    )
    return result, enriched


def dreach(spec: OpacitySpec, polarity: str, budget: int = DEFAULT_BUDGET) -> ExplorationResult:
    """Durations (and remaining timing parameters) of runs reaching the final
    location while visiting (`priv`) or avoiding (`pub`) the private set.

    Data parameters are existentially eliminated; with a fixed valuation the
    constraint ranges over the duration parameter only.
    """
    result, _ = _dreach_run(spec, polarity, budget)
    return result


def _require_valuated(spec: OpacitySpec):
    covered = set(spec.fixed_valuation or ())
    missing = [p for p in spec.model.timing_params if p not in covered]
    if missing:
        raise ModelError(
            f"timing parameters {missing} must be valuated for duration-set questions"
        )


def opaque_times(spec: OpacitySpec, budget: int = DEFAULT_BUDGET) -> OpacityVerdict:
    """Compute the opaque execution times of a valuated model.

    The opaque set is the intersection of the private and public duration
    sets; the verdict distinguishes equality (opaque), overlap (fixable by
    constraining execution times) and disjointness (vulnerable).  Incomplete
    explorations yield Inconclusive with under-approximated sets.
    """
    _require_valuated(spec)
    r_priv, enriched = _dreach_run(spec, "priv", budget)
    r_pub, _ = _dreach_run(spec, "pub", budget)
    abs_param = enriched.meta["enrich"]["abs_param"]
    priv_times = to_duration_set(r_priv.constraint, abs_param)
    pub_times = to_duration_set(r_pub.constraint, abs_param)
    opaque = priv_times.intersect(pub_times)
    complete = r_priv.complete and r_pub.complete
    warnings = tuple(enriched.meta.get("warnings", ()))
    if not complete:
        kind = VerdictKind.INCONCLUSIVE
    elif priv_times == pub_times:
        kind = VerdictKind.OPAQUE
        if priv_times.is_empty():
            warnings = warnings + (
                "final location unreachable both ways; opacity holds vacuously",
            )
    elif not opaque.is_empty():
        kind = VerdictKind.NOT_OPAQUE_FIXABLE
    else:
        kind = VerdictKind.NOT_OPAQUE_VULNERABLE
    return OpacityVerdict(
        kind=kind,
        opaque_times=opaque,
        priv_times=priv_times,
        pub_times=pub_times,
        complete=complete,
        states_explored=r_priv.states_explored + r_pub.states_explored,
        warnings=warnings,
    )


def is_fully_opaque(spec: OpacitySpec, budget: int = DEFAULT_BUDGET) -> OpacityVerdict:
    """Decide whether the private and public duration sets are exactly equal.

    Same computation as `opaque_times`; the verdict kind is OPAQUE precisely
    when the canonical 1-D comparison succeeds."""
    return opaque_times(spec, budget)


def synth_op(spec: OpacitySpec, budget: int = DEFAULT_BUDGET) -> ExplorationResult:
    """Synthesize timing parameters and execution times guaranteeing opacity.

    Self-composes the enriched model and synthesizes the valuations reaching
    the paired final location with contradictory flags: one run visited the
    private set, the other did not, and both took the synthesized duration.
    Data parameters of both copies are eliminated, so the constraint ranges
    over the original timing parameters plus the duration parameter.
    """
    if spec.fixed_valuation is not None:
        raise ModelError("synth_op takes an unvaluated specification; valuate the model instead")
    enriched = enrich(spec.model, spec.priv, spec.final)
    composed = self_compose(enriched)
    sc = composed.meta["self_compose"]
    flag1, flag2 = sc["flag1"], sc["flag2"]
    final_vector = composed.locations[composed.final].vector

    def goal(vector, disc):
        return vector == final_vector and disc[flag1] is True and disc[flag2] is False

    result = efsynth(composed, goal, budget)
    constraint = result.constraint.eliminate(sc["data_params"] + composed.space.clocks)
    constraint = constraint.on_space(Space((), composed.timing_params))
    return ExplorationResult(
        constraint=constraint,
        complete=result.complete,
        states_explored=result.states_explored,
        frontier_truncated=result.frontier_truncated,
    )


@dataclass
class LuEmptinessResult:
    status: str  # "Empty" | "NonEmpty" | "Inconclusive"
    opaque_times: DurationSet
    witness_valuation: Optional[dict[str, Fraction]]
    verdict: OpacityVerdict


def lu_opacity_emptiness(
    spec: OpacitySpec, partition: LuPartition, budget: int = DEFAULT_BUDGET
) -> LuEmptinessResult:
    """Decide emptiness of the opaque (valuation, duration) set of an L/U model.

    Works on the transform that sends lower-bound parameters to 0 and erases
    upper-bound comparisons: some valuation admits an opaque duration exactly
    when the transformed automaton has a nonempty opaque-times set.  The
    witness valuation returned alongside (lower bounds 0, upper bounds one
    more than an opaque duration) is a diagnostic, not part of the decision.
    """
    ta = a0inf(spec.model, partition)
    verdict = opaque_times(
        OpacitySpec(model=ta, priv=spec.priv, final=spec.final, fixed_valuation=None),
        budget,
    )
    witness = None
    if not verdict.opaque_times.is_empty():
        status = "NonEmpty"
        d = verdict.opaque_times.sample_points()[0]
        witness = {p: Fraction(0) for p in partition.lower if p in spec.model.space.params}
        witness.update({p: d + 1 for p in partition.upper if p in spec.model.space.params})
    elif verdict.kind is not VerdictKind.INCONCLUSIVE:
        status = "Empty"
    else:
        status = "Inconclusive"
    return LuEmptinessResult(
        status=status,
        opaque_times=verdict.opaque_times,
        witness_valuation=witness,
        verdict=verdict,
    )


def check_opaque_for(spec: OpacitySpec, d_set: DurationSet, budget: int = DEFAULT_BUDGET):
    """Is the model opaque for every duration in `d_set`?

    True when `d_set` is included in the opaque-times set (a nonempty
    under-approximation suffices); False when the exploration was complete
    and inclusion fails; Inconclusive otherwise.
    """
    verdict = opaque_times(spec, budget)
    if d_set.is_subset_of(verdict.opaque_times):
        return True
    if verdict.kind is not VerdictKind.INCONCLUSIVE:
        return False
    return INCONCLUSIVE
