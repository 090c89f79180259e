"""Independent cross-validation of the polyhedral pipeline.

Fixed-duration reachability is answered by a duration-bounded zone
exploration of the valuated automaton (the absolute clock can never exceed
the queried duration, which prunes unbounded loops), and duration sets are
probed on a half-integer grid.  For integer-constant automata every boundary
of a duration set lies on an integer, so the half-integer grid is dense
enough to catch any endpoint or interior discrepancy; models with rational
constants are rescaled to integers first.

Region equivalence of clock valuations is included as a second, zone-free
sanity check of the timing abstraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Iterable, Mapping

from .model import PTA, ModelError, enrich, largest_clock_constants, valuate_pta
from .opacity import INCONCLUSIVE
from .poly import Inequality, Polyhedron, Rel
from .rationals import format_rational
from .symsem import DEFAULT_BUDGET, efsynth


@dataclass(frozen=True)
class RegionContext:
    """Per-clock maximal compared constants of a valuated automaton."""

    constants: Mapping[str, int]

    @classmethod
    def from_ta(cls, a: PTA) -> "RegionContext":
        return cls(constants=largest_clock_constants(a))


def _frac(v: Fraction) -> Fraction:
    return v - floor(v)


def region_equivalent(
    w: Mapping[str, Fraction], w2: Mapping[str, Fraction], ctx: RegionContext
) -> bool:
    """Clock-valuation equivalence: integral parts agree (or both exceed the
    clock's max constant), fractional parts are ordered the same way, and
    zero fractions coincide."""
    clocks = set(ctx.constants)
    if set(w) != clocks or set(w2) != clocks:
        raise ModelError("valuations must range over the context's clocks")
    w = {c: Fraction(v) for c, v in w.items()}
    w2 = {c: Fraction(v) for c, v in w2.items()}
    for c in clocks:
        ci = ctx.constants[c]
        same_int = floor(w[c]) == floor(w2[c])
        both_beyond = w[c] > ci and w2[c] > ci
        if not (same_int or both_beyond):
            return False
        if (_frac(w[c]) == 0) != (_frac(w2[c]) == 0):
            return False
    for ci in clocks:
        for cj in clocks:
            if (_frac(w[ci]) <= _frac(w[cj])) != (_frac(w2[ci]) <= _frac(w2[cj])):
                return False
    return True


def reachable_at_time(
    ta: PTA,
    priv: Iterable[str],
    polarity: str,
    final: str,
    d: Fraction,
    budget: int = DEFAULT_BUDGET,
):
    """Is the final location reachable in exactly `d` time units by a run of
    the requested polarity (priv = visiting, pub = avoiding, any = either)?

    The automaton must be parameter-free.  Exploration is pruned with the
    absolute-clock bound, so loops that outrun `d` terminate; a budget
    overrun returns Inconclusive.
    """
    d = Fraction(d)
    if d < 0:
        raise ValueError("durations are nonnegative")
    if polarity not in ("priv", "pub", "any"):
        raise ValueError(f"polarity must be priv, pub or any, got {polarity!r}")
    if ta.space.params:
        raise ModelError("the oracle takes a fully valuated automaton")
    enriched = enrich(ta, priv, final)
    info = enriched.meta["enrich"]
    m = valuate_pta(enriched, {info["abs_param"]: d})
    flag = info["flag"]
    final_vector = m.locations[final].vector
    bound = Polyhedron(m.space, [Inequality({info["abs_clock"]: 1}, -d, Rel.LE)])

    def goal(vector, disc):
        if vector != final_vector:
            return False
        if polarity == "any":
            return True
        return disc[flag] is (polarity == "priv")

    result = efsynth(m, goal, budget, bound=bound, stop_at_first_goal=True)
    if result.goal_reached:
        return True
    if result.frontier_truncated:
        return INCONCLUSIVE
    return False


@dataclass
class SampleReport:
    """Verdict per half-integer duration up to the horizon."""

    horizon: Fraction
    samples: dict[Fraction, str]  # reachable | unreachable | inconclusive

    def grid(self) -> list[Fraction]:
        return sorted(self.samples)

    def reachable_durations(self) -> list[Fraction]:
        return [d for d in self.grid() if self.samples[d] == "reachable"]

    def render(self) -> str:
        lines = ["duration\tverdict"]
        for d in self.grid():
            lines.append(f"{format_rational(d)}\t{self.samples[d]}")
        return "\n".join(lines)

    def as_json(self) -> dict:
        return {
            "horizon": format_rational(self.horizon),
            "samples": [
                {"duration": format_rational(d), "verdict": self.samples[d]} for d in self.grid()
            ],
        }


def sample_durations(
    ta: PTA,
    priv: Iterable[str],
    polarity: str,
    final: str,
    horizon: int,
    budget: int = DEFAULT_BUDGET,
) -> SampleReport:
    """Membership probe of the duration set at every half-integer up to the
    horizon.  Requires integral constants (rescale first) and an integral
    horizon; per-sample budget overruns are marked inconclusive."""
    largest_clock_constants(ta)  # raises on rational constants or parameters
    horizon = Fraction(horizon)
    if horizon.denominator != 1 or horizon < 0:
        raise ModelError("the sampling horizon must be a nonnegative integer")
    samples: dict[Fraction, str] = {}
    for k in range(2 * int(horizon) + 1):
        d = Fraction(k, 2)
        verdict = reachable_at_time(ta, priv, polarity, final, d, budget)
        if verdict is INCONCLUSIVE:
            samples[d] = "inconclusive"
        else:
            samples[d] = "reachable" if verdict else "unreachable"
    return SampleReport(horizon=horizon, samples=samples)
