"""Exact geometry kernel: not-necessarily-closed convex polyhedra.

A polyhedron is a finite conjunction of linear inequalities (strict,
non-strict, or equalities) over a fixed dimension universe of clocks and
parameters.  Everything is exact rational arithmetic; there is no floating
point anywhere.  Strict bounds are first-class: projection combines a strict
bound with anything into a strict bound, and no operation ever widens a
strict bound into a non-strict one.

Satisfiability, projection, time elapse and reset are all built on
Fourier-Motzkin elimination with equality back-substitution.  The kernel
applies pairwise redundancy pruning (an inequality implied by a single other
inequality is dropped) but performs no full minimization; canonical
comparison of result sets is only needed in one dimension, where
:mod:`topacity.durations` provides it.

Parameter dimensions are implicitly nonnegative: constructing a polyhedron
conjoins ``p >= 0`` for every parameter of its space.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterable, Mapping, Optional, Sequence

from .rationals import format_rational


class DimensionMismatch(ValueError):
    """Raised when two polyhedra over different dimension universes meet."""


class Rel(enum.Enum):
    """Stored relation of an inequality ``term REL 0``."""

    LT = "<"
    LE = "<="
    EQ = "="

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"Rel({self.value!r})"


@dataclass(frozen=True)
class Space:
    """Dimension universe: named clock dimensions plus parameter dimensions."""

    clocks: tuple[str, ...]
    params: tuple[str, ...]

    def __post_init__(self):
        seen = set(self.clocks) | set(self.params)
        if len(seen) != len(self.clocks) + len(self.params):
            raise ValueError("duplicate dimension names in space")

    @property
    def dims(self) -> tuple[str, ...]:
        return self.clocks + self.params

    def is_clock(self, dim: str) -> bool:
        return dim in self.clocks

    def __contains__(self, dim: str) -> bool:
        return dim in self.clocks or dim in self.params

    def without(self, names: Iterable[str]) -> "Space":
        drop = set(names)
        return Space(
            tuple(c for c in self.clocks if c not in drop),
            tuple(p for p in self.params if p not in drop),
        )

    def extended(self, clocks: Sequence[str] = (), params: Sequence[str] = ()) -> "Space":
        return Space(self.clocks + tuple(clocks), self.params + tuple(params))


@dataclass
class LinearTerm:
    """Linear expression sum(coeff * dim) + const with exact coefficients."""

    coeffs: dict[str, Fraction] = field(default_factory=dict)
    const: Fraction = Fraction(0)

    def __post_init__(self):
        self.coeffs = {d: Fraction(c) for d, c in self.coeffs.items() if c != 0}
        self.const = Fraction(self.const)

    def __add__(self, other: "LinearTerm") -> "LinearTerm":
        coeffs = dict(self.coeffs)
        for d, c in other.coeffs.items():
            coeffs[d] = coeffs.get(d, Fraction(0)) + c
        return LinearTerm(coeffs, self.const + other.const)

    def __neg__(self) -> "LinearTerm":
        return self.scaled(Fraction(-1))

    def __sub__(self, other: "LinearTerm") -> "LinearTerm":
        return self + (-other)

    def scaled(self, factor: Fraction) -> "LinearTerm":
        return LinearTerm({d: c * factor for d, c in self.coeffs.items()}, self.const * factor)


class Inequality:
    """Canonical integer form of ``term REL 0``.

    Coefficients are scaled to coprime integers; equality constraints get a
    deterministic sign (first nonzero coefficient positive).  Relations >=
    and > never appear: they are normalized away by negating the term.
    """

    __slots__ = ("coeffs", "const", "rel", "_hash")

    def __init__(self, coeffs: Mapping[str, Fraction | int], const: Fraction | int, rel: Rel):
        if type(const) is int and all(type(c) is int for c in coeffs.values()):
            ints = [(d, c) for d, c in coeffs.items() if c != 0]
            iconst = const
        else:
            items = [(d, Fraction(c)) for d, c in coeffs.items() if c != 0]
            const = Fraction(const)
            denom = 1
            for _, c in items:
                denom = denom * c.denominator // gcd(denom, c.denominator)
            denom = denom * const.denominator // gcd(denom, const.denominator)
            ints = [(d, int(c * denom)) for d, c in items]
            iconst = int(const * denom)
        g = 0
        for _, c in ints:
            g = gcd(g, c)
        g = gcd(g, iconst)
        if g > 1:
            ints = [(d, c // g) for d, c in ints]
            iconst //= g
        ints.sort()
        if rel is Rel.EQ and ints and ints[0][1] < 0:
            ints = [(d, -c) for d, c in ints]
            iconst = -iconst
        object.__setattr__(self, "coeffs", tuple(ints))
        object.__setattr__(self, "const", iconst)
        object.__setattr__(self, "rel", rel)
        object.__setattr__(self, "_hash", hash((self.coeffs, iconst, rel)))

    def __setattr__(self, *a):  # immutable
        raise AttributeError("Inequality is immutable")

    def __eq__(self, other):
        return (
            isinstance(other, Inequality)
            and self._hash == other._hash
            and self.coeffs == other.coeffs
            and self.const == other.const
            and self.rel == other.rel
        )

    def __hash__(self):
        return self._hash

    @property
    def is_ground(self) -> bool:
        return not self.coeffs

    def ground_truth(self) -> bool:
        """Truth value of a coefficient-free constraint."""
        if self.rel is Rel.LT:
            return self.const < 0
        if self.rel is Rel.LE:
            return self.const <= 0
        return self.const == 0

    def coeff(self, dim: str) -> int:
        for d, c in self.coeffs:
            if d == dim:
                return c
        return 0

    def dims(self) -> set[str]:
        return {d for d, _ in self.coeffs}

    def evaluate(self, point: Mapping[str, Fraction]) -> Fraction:
        return sum((c * point[d] for d, c in self.coeffs), Fraction(self.const))

    def holds_at(self, point: Mapping[str, Fraction]) -> bool:
        v = self.evaluate(point)
        if self.rel is Rel.LT:
            return v < 0
        if self.rel is Rel.LE:
            return v <= 0
        return v == 0

    def negations(self) -> tuple["Inequality", ...]:
        """Inequalities whose disjunction is the complement of this one."""
        neg = {d: -c for d, c in self.coeffs}
        if self.rel is Rel.LE:
            return (Inequality(neg, -self.const, Rel.LT),)
        if self.rel is Rel.LT:
            return (Inequality(neg, -self.const, Rel.LE),)
        return (
            Inequality(dict(self.coeffs), self.const, Rel.LT),
            Inequality(neg, -self.const, Rel.LT),
        )

    def substitute(self, values: Mapping[str, Fraction]) -> "Inequality":
        coeffs = {}
        const = Fraction(self.const)
        for d, c in self.coeffs:
            if d in values:
                const += c * values[d]
            else:
                coeffs[d] = Fraction(c)
        return Inequality(coeffs, const, self.rel)

    def rename(self, mapping: Mapping[str, str]) -> "Inequality":
        return Inequality({mapping.get(d, d): c for d, c in self.coeffs}, self.const, self.rel)

    def sort_key(self):
        # equalities first: they discriminate fastest in subsumption scans
        order = {Rel.EQ: 0, Rel.LT: 1, Rel.LE: 2}
        return (order[self.rel], self.coeffs, self.const)

    def implied_by(self, other: "Inequality") -> bool:
        """True when `other` alone entails this inequality (single-premise test).

        Works on the canonical integer tuples with cross-multiplication, so
        no rational arithmetic is needed: self = lam * other requires
        proportional coefficient vectors, with lam > 0 unless `other` is an
        equality, and a nonpositive constant slack."""
        sc, oc = self.coeffs, other.coeffs
        if len(sc) != len(oc) or not sc:
            return False
        s0 = sc[0][1]
        o0 = oc[0][1]
        for (ds, cs), (do, co) in zip(sc, oc):
            if ds != do or cs * o0 != co * s0:
                return False
        # lam = s0/o0; slack mu = const_s - lam*const_o; sign(mu) via mu*o0*o0
        mu_scaled = self.const * o0 * o0 - s0 * o0 * other.const
        if other.rel is Rel.EQ:
            if self.rel is Rel.EQ:
                return mu_scaled == 0
            if self.rel is Rel.LE:
                return mu_scaled <= 0
            return mu_scaled < 0
        if self.rel is Rel.EQ:
            return False
        if s0 * o0 <= 0:  # lam must be positive
            return False
        if self.rel is Rel.LT and other.rel is Rel.LE:
            return mu_scaled < 0
        return mu_scaled <= 0

    def as_json(self) -> dict:
        return {
            "coeffs": {d: str(c) for d, c in self.coeffs},
            "const": str(self.const),
            "relation": self.rel.value,
        }

    def render(self) -> str:
        """Human-readable ``lhs REL rhs`` with positive terms on each side."""
        left, right = [], []
        for d, c in self.coeffs:
            if c > 0:
                left.append(f"{c}*{d}" if c != 1 else d)
            else:
                right.append(f"{-c}*{d}" if c != -1 else d)
        if self.const > 0:
            left.append(str(self.const))
        elif self.const < 0:
            right.append(str(-self.const))
        lhs = " + ".join(left) or "0"
        rhs = " + ".join(right) or "0"
        return f"{lhs} {self.rel.value} {rhs}"

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"<{self.render()}>"


FALSE_INEQ = Inequality({}, 1, Rel.LE)


def _combine(lower: Inequality, upper: Inequality, dim: str) -> Inequality:
    """Eliminate `dim` between a lower bound (negative coeff) and an upper one."""
    a1 = lower.coeff(dim)
    a2 = upper.coeff(dim)
    coeffs: dict[str, int] = {}
    for d, c in lower.coeffs:
        if d != dim:
            coeffs[d] = c * a2
    for d, c in upper.coeffs:
        if d != dim:
            coeffs[d] = coeffs.get(d, 0) + c * -a1
    const = lower.const * a2 + upper.const * -a1
    rel = Rel.LT if (lower.rel is Rel.LT or upper.rel is Rel.LT) else Rel.LE
    return Inequality(coeffs, const, rel)


def _prune(ineqs: Iterable[Inequality]) -> tuple[Inequality, ...] | None:
    """Deduplicate, drop ground truths and singly-implied members.

    Returns None when a ground-false constraint makes the system trivially
    unsatisfiable.
    """
    kept: list[Inequality] = []
    seen = set()
    for iq in ineqs:
        if iq.is_ground:
            if not iq.ground_truth():
                return None
            continue
        if iq not in seen:
            seen.add(iq)
            kept.append(iq)
    dropped = [False] * len(kept)
    for i, a in enumerate(kept):
        if dropped[i]:
            continue
        for j, b in enumerate(kept):
            if i == j or dropped[j]:
                continue
            if b.implied_by(a):
                dropped[j] = True
    return tuple(iq for i, iq in enumerate(kept) if not dropped[i])


def _eliminate_one(ineqs: Sequence[Inequality], dim: str):
    """One Fourier-Motzkin / Gauss step.

    Returns (remaining inequalities, trace entry) where the trace entry
    records how to reconstruct a value for `dim` from a point over the
    remaining dimensions, or None if the system became trivially false.
    """
    for iq in ineqs:
        if iq.rel is Rel.EQ and iq.coeff(dim) != 0:
            a = iq.coeff(dim)
            expr_coeffs = {d: Fraction(-c, a) for d, c in iq.coeffs if d != dim}
            expr_const = Fraction(-iq.const, a)
            out = []
            for other in ineqs:
                if other is iq:
                    continue
                b = other.coeff(dim)
                if b == 0:
                    out.append(other)
                    continue
                coeffs = {d: Fraction(c) for d, c in other.coeffs if d != dim}
                for d, c in expr_coeffs.items():
                    coeffs[d] = coeffs.get(d, Fraction(0)) + b * c
                out.append(Inequality(coeffs, other.const + b * expr_const, other.rel))
            pruned = _prune(out)
            if pruned is None:
                return None, None
            return pruned, ("eq", dim, expr_coeffs, expr_const)
    lowers, uppers, rest = [], [], []
    for iq in ineqs:
        a = iq.coeff(dim)
        if a == 0:
            rest.append(iq)
        elif a > 0:
            uppers.append(iq)
        else:
            lowers.append(iq)
    for lo in lowers:
        for up in uppers:
            rest.append(_combine(lo, up, dim))
    pruned = _prune(rest)
    if pruned is None:
        return None, None
    return pruned, ("fm", dim, tuple(lowers), tuple(uppers))


def _backsub(trace, point: dict[str, Fraction]) -> None:
    """Extend a satisfying point to the eliminated dimensions, in place."""
    for entry in reversed(trace):
        if entry[0] == "eq":
            _, dim, coeffs, const = entry
            point[dim] = sum((c * point[d] for d, c in coeffs.items()), const)
        else:
            _, dim, lowers, uppers = entry
            lo: Optional[tuple[Fraction, bool]] = None
            hi: Optional[tuple[Fraction, bool]] = None
            for iq in lowers:
                a = iq.coeff(dim)
                rest = sum((Fraction(c) * point[d] for d, c in iq.coeffs if d != dim), Fraction(iq.const))
                bound = rest / -a  # a < 0: dim >= bound (or >)
                strict = iq.rel is Rel.LT
                if lo is None or bound > lo[0] or (bound == lo[0] and strict):
                    lo = (bound, strict)
            for iq in uppers:
                a = iq.coeff(dim)
                rest = sum((Fraction(c) * point[d] for d, c in iq.coeffs if d != dim), Fraction(iq.const))
                bound = rest / -a  # a > 0: dim <= bound (or <)
                strict = iq.rel is Rel.LT
                if hi is None or bound < hi[0] or (bound == hi[0] and strict):
                    hi = (bound, strict)
            if lo is None and hi is None:
                point[dim] = Fraction(0)
            elif lo is None:
                point[dim] = hi[0] - 1 if hi[1] else hi[0]
            elif hi is None:
                point[dim] = lo[0] + 1 if lo[1] else lo[0]
            else:
                if lo[0] == hi[0]:
                    point[dim] = lo[0]
                else:
                    point[dim] = (lo[0] + hi[0]) / 2


class Polyhedron:
    """Immutable convex polyhedron over a :class:`Space`.

    The empty constraint list denotes the universe (modulo the implicit
    nonnegativity of parameter dimensions, conjoined at construction).
    """

    __slots__ = ("space", "constraints", "_hash")

    def __init__(self, space: Space, constraints: Iterable[Inequality] = (), *, _raw: bool = False):
        ineqs = list(constraints)
        if not _raw:
            for p in space.params:
                ineqs.append(Inequality({p: -1}, 0, Rel.LE))
        pruned = _prune(ineqs)
        if pruned is None:
            pruned = (FALSE_INEQ,)
        pruned = tuple(sorted(pruned, key=Inequality.sort_key))
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "constraints", pruned)
        object.__setattr__(self, "_hash", hash((space, pruned)))

    def __setattr__(self, *a):
        raise AttributeError("Polyhedron is immutable")

    def __eq__(self, other):
        return (
            isinstance(other, Polyhedron)
            and self._hash == other._hash
            and self.space == other.space
            and self.constraints == other.constraints
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):  # pragma: no cover - debugging aid
        if not self.constraints:
            return "<Polyhedron true>"
        return "<Polyhedron " + " & ".join(iq.render() for iq in self.constraints) + ">"

    # -- constructors ---------------------------------------------------

    @classmethod
    def universe(cls, space: Space) -> "Polyhedron":
        return cls(space, ())

    @classmethod
    def empty(cls, space: Space) -> "Polyhedron":
        return cls(space, (FALSE_INEQ,), _raw=True)

    def _with(self, constraints: Iterable[Inequality]) -> "Polyhedron":
        return Polyhedron(self.space, constraints, _raw=True)

    # -- predicates ------------------------------------------------------

    @property
    def is_trivially_empty(self) -> bool:
        return self.constraints == (FALSE_INEQ,)

    def dims_referenced(self) -> set[str]:
        out: set[str] = set()
        for iq in self.constraints:
            out |= iq.dims()
        return out

    def contains_point(self, point: Mapping[str, Fraction]) -> bool:
        full = {d: Fraction(point.get(d, 0)) for d in self.space.dims}
        return all(iq.holds_at(full) for iq in self.constraints)

    def sample_point(self) -> Optional[dict[str, Fraction]]:
        """A rational point satisfying the polyhedron, or None when empty."""
        ineqs: Sequence[Inequality] = self.constraints
        trace = []
        for dim in self.space.dims:
            ineqs, entry = _eliminate_one(ineqs, dim)
            if ineqs is None:
                return None
            trace.append(entry)
        for iq in ineqs:
            if not iq.ground_truth():  # pragma: no cover - pruned earlier
                return None
        point: dict[str, Fraction] = {}
        _backsub(trace, point)
        return point

    def is_satisfiable(self) -> bool:
        """True iff some real point satisfies every constraint, strictness respected."""
        if self.is_trivially_empty:
            return False
        ineqs: Sequence[Inequality] = self.constraints
        for dim in self.space.dims:
            ineqs, _ = _eliminate_one(ineqs, dim)
            if ineqs is None:
                return False
        return True

    def includes(self, other: "Polyhedron") -> bool:
        """Point-set inclusion: other is a subset of self."""
        if self.space != other.space:
            raise DimensionMismatch("inclusion across different dimension universes")
        for iq in self.constraints:
            for neg in iq.negations():
                if other._with(other.constraints + (neg,)).is_satisfiable():
                    return False
        return True

    def equivalent(self, other: "Polyhedron") -> bool:
        return self.includes(other) and other.includes(self)

    # -- operations ------------------------------------------------------

    def intersect(self, other: "Polyhedron") -> "Polyhedron":
        if self.space != other.space:
            raise DimensionMismatch("intersection across different dimension universes")
        return self._with(self.constraints + other.constraints)

    def conjoin(self, ineqs: Iterable[Inequality]) -> "Polyhedron":
        return self._with(self.constraints + tuple(ineqs))

    def eliminate(self, dims_to_drop: Iterable[str]) -> "Polyhedron":
        """Exact existential projection; dropped dims stay in the universe but
        become unconstrained."""
        drop = [d for d in self.space.dims if d in set(dims_to_drop)]
        for d in set(dims_to_drop):
            if d not in self.space:
                raise DimensionMismatch(f"unknown dimension {d!r}")
        ineqs: Sequence[Inequality] = self.constraints
        for dim in drop:
            ineqs, _ = _eliminate_one(ineqs, dim)
            if ineqs is None:
                return Polyhedron.empty(self.space)
        return self._with(ineqs)

    def time_elapse(self, clock_dims: Optional[Iterable[str]] = None) -> "Polyhedron":
        """Forward time closure: advance every clock by a shared delay >= 0."""
        clocks = tuple(clock_dims) if clock_dims is not None else self.space.clocks
        for c in clocks:
            if c not in self.space:
                raise DimensionMismatch(f"unknown clock {c!r}")
        delta = "__delta"
        clockset = set(clocks)
        shifted = []
        for iq in self.constraints:
            dcoeff = -sum(c for d, c in iq.coeffs if d in clockset)
            coeffs = dict(iq.coeffs)
            if dcoeff != 0:
                coeffs[delta] = dcoeff
            shifted.append(Inequality(coeffs, iq.const, iq.rel))
        shifted.append(Inequality({delta: -1}, 0, Rel.LE))
        ineqs, _ = _eliminate_one(shifted, delta)
        if ineqs is None:
            return Polyhedron.empty(self.space)
        return self._with(ineqs)

    def reset(self, clocks: Iterable[str]) -> "Polyhedron":
        """Set the given clocks to zero, keeping everything else."""
        reset_set = tuple(clocks)
        for c in reset_set:
            if not self.space.is_clock(c):
                raise DimensionMismatch(f"reset of non-clock dimension {c!r}")
        out = self.eliminate(reset_set)
        zeros = [Inequality({c: 1}, 0, Rel.EQ) for c in reset_set]
        return out.conjoin(zeros)

    def substitute(self, values: Mapping[str, Fraction]) -> "Polyhedron":
        vals = {d: Fraction(v) for d, v in values.items()}
        return self._with(iq.substitute(vals) for iq in self.constraints)

    def rename_dims(self, mapping: Mapping[str, str], space: Space) -> "Polyhedron":
        return Polyhedron(space, (iq.rename(mapping) for iq in self.constraints), _raw=True)

    def on_space(self, space: Space) -> "Polyhedron":
        """Reinterpret over another universe (must cover referenced dims)."""
        missing = self.dims_referenced() - set(space.dims)
        if missing:
            raise DimensionMismatch(f"constraints reference dropped dims {sorted(missing)}")
        return Polyhedron(space, self.constraints, _raw=True)

    def as_json(self) -> list[dict]:
        return [iq.as_json() for iq in self.constraints]

    def render(self) -> str:
        if not self.constraints:
            return "true"
        if self.is_trivially_empty:
            return "false"
        return " & ".join(iq.render() for iq in self.constraints)


class ConstraintUnion:
    """Finite disjunction of polyhedra over one dimension universe.

    Unsatisfiable disjuncts are pruned at construction; the empty list is
    the canonical representation of false.
    """

    __slots__ = ("space", "disjuncts")

    def __init__(self, space: Space, disjuncts: Iterable[Polyhedron] = (), *, prune: bool = True):
        kept: list[Polyhedron] = []
        seen = set()
        for p in disjuncts:
            if p.space != space:
                raise DimensionMismatch("union member over a different universe")
            if p in seen:
                continue
            if prune and not p.is_satisfiable():
                continue
            seen.add(p)
            kept.append(p)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "disjuncts", tuple(kept))

    def __setattr__(self, *a):
        raise AttributeError("ConstraintUnion is immutable")

    def __eq__(self, other):
        return (
            isinstance(other, ConstraintUnion)
            and self.space == other.space
            and self.disjuncts == other.disjuncts
        )

    def __hash__(self):
        return hash((self.space, self.disjuncts))

    def __repr__(self):  # pragma: no cover - debugging aid
        return "<ConstraintUnion " + (" | ".join(f"({p.render()})" for p in self.disjuncts) or "false") + ">"

    @property
    def is_false(self) -> bool:
        return not self.disjuncts

    def contains_point(self, point: Mapping[str, Fraction]) -> bool:
        return any(p.contains_point(point) for p in self.disjuncts)

    def eliminate(self, dims: Iterable[str]) -> "ConstraintUnion":
        dims = tuple(dims)
        return ConstraintUnion(self.space, (p.eliminate(dims) for p in self.disjuncts))

    def substitute(self, values: Mapping[str, Fraction]) -> "ConstraintUnion":
        return ConstraintUnion(self.space, (p.substitute(values) for p in self.disjuncts))

    def includes_poly(self, p: Polyhedron) -> bool:
        """Sufficient check: p is inside one disjunct (not a full union test)."""
        return any(d.includes(p) for d in self.disjuncts)

    def on_space(self, space: Space) -> "ConstraintUnion":
        """Reinterpret over a smaller universe; members must not constrain
        dropped dimensions."""
        return ConstraintUnion(space, (p.on_space(space) for p in self.disjuncts), prune=False)

    def as_json(self) -> list[list[dict]]:
        return [p.as_json() for p in self.disjuncts]

    def render(self) -> str:
        if not self.disjuncts:
            return "false"
        return " | ".join(f"({p.render()})" for p in self.disjuncts)


def point_str(point: Mapping[str, Fraction]) -> str:
    return ", ".join(f"{d}={format_rational(v)}" for d, v in sorted(point.items()))
