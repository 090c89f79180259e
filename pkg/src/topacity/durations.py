"""Canonical unions of rational intervals with open/closed endpoints.

A :class:`DurationSet` is the canonical form for sets of run durations: a
sorted list of nonempty, pairwise disjoint, maximally merged intervals over
the nonnegative rationals, possibly unbounded on the right.  Canonicity makes
point-set equality coincide with structural equality, which is what the
exact 1-D comparisons of the opacity checks rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from .poly import ConstraintUnion, Polyhedron, Rel
from .rationals import format_rational, parse_rational


class ResidualDimensions(ValueError):
    """A union handed to the 1-D algebra still constrains other dimensions."""


@dataclass(frozen=True)
class Interval:
    """One interval; ``hi is None`` means unbounded above (always open)."""

    lo: Fraction
    lo_closed: bool
    hi: Optional[Fraction]
    hi_closed: bool

    def __post_init__(self):
        if self.hi is None and self.hi_closed:
            object.__setattr__(self, "hi_closed", False)

    def is_empty(self) -> bool:
        if self.hi is None:
            return False
        if self.lo > self.hi:
            return True
        return self.lo == self.hi and not (self.lo_closed and self.hi_closed)

    def contains(self, d: Fraction) -> bool:
        if d < self.lo or (d == self.lo and not self.lo_closed):
            return False
        if self.hi is None:
            return True
        return d < self.hi or (d == self.hi and self.hi_closed)

    def intersect(self, other: "Interval") -> Optional["Interval"]:
        if self.lo > other.lo or (self.lo == other.lo and not self.lo_closed):
            lo, lo_closed = self.lo, self.lo_closed
        else:
            lo, lo_closed = other.lo, other.lo_closed
        if self.lo == other.lo:
            lo_closed = self.lo_closed and other.lo_closed
        if other.hi is None:
            hi, hi_closed = self.hi, self.hi_closed
        elif self.hi is None:
            hi, hi_closed = other.hi, other.hi_closed
        elif self.hi < other.hi:
            hi, hi_closed = self.hi, self.hi_closed
        elif other.hi < self.hi:
            hi, hi_closed = other.hi, other.hi_closed
        else:
            hi, hi_closed = self.hi, self.hi_closed and other.hi_closed
        out = Interval(lo, lo_closed, hi, hi_closed)
        return None if out.is_empty() else out

    def covers(self, other: "Interval") -> bool:
        if other.lo < self.lo or (other.lo == self.lo and other.lo_closed and not self.lo_closed):
            return False
        if self.hi is None:
            return True
        if other.hi is None:
            return False
        return other.hi < self.hi or (other.hi == self.hi and (self.hi_closed or not other.hi_closed))

    def touches_or_overlaps(self, other: "Interval") -> bool:
        """With other.lo >= self.lo: can the two merge into one interval?"""
        if self.hi is None:
            return True
        if other.lo < self.hi:
            return True
        return other.lo == self.hi and (self.hi_closed or other.lo_closed)

    def as_json(self) -> dict:
        return {
            "lo": format_rational(self.lo),
            "lo_closed": self.lo_closed,
            "hi": "inf" if self.hi is None else format_rational(self.hi),
            "hi_closed": self.hi_closed,
        }

    def render(self) -> str:
        lo = "[" if self.lo_closed else "("
        hi = "]" if self.hi_closed else ")"
        top = "inf" if self.hi is None else format_rational(self.hi)
        return f"{lo}{format_rational(self.lo)}, {top}{hi}"


class DurationSet:
    """Sorted, disjoint, maximally merged union of intervals with lo >= 0."""

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[Interval] = ()):
        items = [iv for iv in intervals if not iv.is_empty()]
        for iv in items:
            if iv.lo < 0:
                raise ValueError("durations are nonnegative")
        items.sort(key=lambda iv: (iv.lo, not iv.lo_closed))
        merged: list[Interval] = []
        for iv in items:
            if merged and merged[-1].touches_or_overlaps(iv):
                last = merged[-1]
                if last.hi is None or (iv.hi is not None and iv.hi < last.hi):
                    hi, hi_closed = last.hi, last.hi_closed
                elif iv.hi is None or (last.hi is not None and last.hi < iv.hi):
                    hi, hi_closed = iv.hi, iv.hi_closed
                else:
                    hi, hi_closed = last.hi, last.hi_closed or iv.hi_closed
                merged[-1] = Interval(last.lo, last.lo_closed, hi, hi_closed)
            else:
                merged.append(iv)
        object.__setattr__(self, "intervals", tuple(merged))

    def __setattr__(self, *a):
        raise AttributeError("DurationSet is immutable")

    def __eq__(self, other):
        return isinstance(other, DurationSet) and self.intervals == other.intervals

    def __hash__(self):
        return hash(self.intervals)

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"<DurationSet {self.render()}>"

    @classmethod
    def empty(cls) -> "DurationSet":
        return cls(())

    @classmethod
    def point(cls, d: Fraction) -> "DurationSet":
        d = Fraction(d)
        return cls((Interval(d, True, d, True),))

    @classmethod
    def closed(cls, lo, hi) -> "DurationSet":
        return cls((Interval(Fraction(lo), True, Fraction(hi), True),))

    @classmethod
    def from_json(cls, data: list[dict]) -> "DurationSet":
        out = []
        for item in data:
            hi = None if item["hi"] == "inf" else parse_rational(item["hi"])
            out.append(Interval(parse_rational(item["lo"]), bool(item["lo_closed"]), hi, bool(item["hi_closed"])))
        return cls(out)

    def is_empty(self) -> bool:
        return not self.intervals

    def contains(self, d: Fraction) -> bool:
        d = Fraction(d)
        return any(iv.contains(d) for iv in self.intervals)

    def intersect(self, other: "DurationSet") -> "DurationSet":
        out = []
        for a in self.intervals:
            for b in other.intervals:
                c = a.intersect(b)
                if c is not None:
                    out.append(c)
        return DurationSet(out)

    def union(self, other: "DurationSet") -> "DurationSet":
        return DurationSet(self.intervals + other.intervals)

    def is_subset_of(self, other: "DurationSet") -> bool:
        # both canonical, so every interval must sit inside a single interval
        return all(any(b.covers(a) for b in other.intervals) for a in self.intervals)

    def sample_points(self) -> list[Fraction]:
        """One interior-ish witness per interval (used by diagnostics)."""
        out = []
        for iv in self.intervals:
            if iv.lo_closed:
                out.append(iv.lo)
            elif iv.hi is None:
                out.append(iv.lo + 1)
            else:
                out.append((iv.lo + iv.hi) / 2)
        return out

    def as_json(self) -> list[dict]:
        return [iv.as_json() for iv in self.intervals]

    def render(self) -> str:
        if not self.intervals:
            return "{}"
        return " u ".join(iv.render() for iv in self.intervals)


def _interval_of_1d(poly: Polyhedron, dim: str) -> Optional[Interval]:
    """Bounds of a 1-D polyhedron on `dim`; None when empty."""
    lo, lo_closed = Fraction(0), True
    hi: Optional[Fraction] = None
    hi_closed = True

    def tighten_lower(bound: Fraction, closed: bool):
        nonlocal lo, lo_closed
        if bound > lo:
            lo, lo_closed = bound, closed
        elif bound == lo:
            lo_closed = lo_closed and closed

    def tighten_upper(bound: Fraction, closed: bool):
        nonlocal hi, hi_closed
        if hi is None or bound < hi:
            hi, hi_closed = bound, closed
        elif bound == hi:
            hi_closed = hi_closed and closed

    for iq in poly.constraints:
        a = iq.coeff(dim)
        if a == 0:
            if iq.is_ground and not iq.ground_truth():
                return None
            continue
        bound = Fraction(-iq.const, a)
        if iq.rel is Rel.EQ:
            tighten_lower(bound, True)
            tighten_upper(bound, True)
        elif a > 0:
            tighten_upper(bound, iq.rel is Rel.LE)
        else:
            tighten_lower(bound, iq.rel is Rel.LE)
    out = Interval(lo, lo_closed, hi, hi_closed)
    return None if out.is_empty() else out


def to_duration_set(union: ConstraintUnion, dim: str) -> DurationSet:
    """Canonicalize a union constraining only `dim` into a DurationSet."""
    if dim not in union.space:
        raise ResidualDimensions(f"dimension {dim!r} not in universe")
    out = []
    for poly in union.disjuncts:
        residual = poly.dims_referenced() - {dim}
        if residual:
            raise ResidualDimensions(
                f"union constrains residual dimensions {sorted(residual)} besides {dim!r}"
            )
        iv = _interval_of_1d(poly, dim)
        if iv is not None:
            out.append(iv)
    return DurationSet(out)


def union_equal_1d(a: ConstraintUnion, b: ConstraintUnion, dim: str) -> bool:
    """Exact point-set equality of two single-dimension unions."""
    return to_duration_set(a, dim) == to_duration_set(b, dim)
