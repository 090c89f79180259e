"""Geometry kernel tests.

The randomized checks compare the kernel against two independent routes: a
deliberately naive Fourier-Motzkin implementation written here (no pruning,
equalities split into two inequalities) for satisfiability, and direct point
evaluation for membership-style properties.
"""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from topacity.poly import (
    ConstraintUnion,
    DimensionMismatch,
    Inequality,
    Polyhedron,
    Rel,
    Space,
)
from topacity.durations import (
    DurationSet,
    Interval,
    ResidualDimensions,
    to_duration_set,
    union_equal_1d,
)
from topacity.rationals import format_rational, parse_rational


# ---------------------------------------------------------------------------
# independent satisfiability oracle: naive FM on (coeff-map, const, strict) rows


def _naive_satisfiable(rows, dims):
    """rows: list of (coeffs dict, const, rel) meaning sum+const REL 0."""
    work = []
    for coeffs, const, rel in rows:
        if rel is Rel.EQ:
            work.append((dict(coeffs), Fraction(const), False))
            work.append(({d: -c for d, c in coeffs.items()}, -Fraction(const), False))
        else:
            work.append((dict(coeffs), Fraction(const), rel is Rel.LT))
    for dim in dims:
        lowers, uppers, rest = [], [], []
        for coeffs, const, strict in work:
            a = coeffs.get(dim, Fraction(0))
            if a == 0:
                rest.append((coeffs, const, strict))
            elif a > 0:
                uppers.append((coeffs, const, strict))
            else:
                lowers.append((coeffs, const, strict))
        for lc, lk, ls in lowers:
            for uc, uk, us in uppers:
                a1, a2 = lc[dim], uc[dim]
                coeffs = {}
                for d, c in lc.items():
                    if d != dim:
                        coeffs[d] = coeffs.get(d, Fraction(0)) + c * a2
                for d, c in uc.items():
                    if d != dim:
                        coeffs[d] = coeffs.get(d, Fraction(0)) + c * -a1
                rest.append((coeffs, lk * a2 + uk * -a1, ls or us))
        work = rest
    for coeffs, const, strict in work:
        if any(c != 0 for c in coeffs.values()):  # pragma: no cover
            raise AssertionError("dimension left over")
        if strict and not const < 0:
            return False
        if not strict and not const <= 0:
            return False
    return True


SP = Space(clocks=("x", "y"), params=("p", "q"))


def ineq(coeffs, const, rel=Rel.LE):
    return Inequality({d: Fraction(c) for d, c in coeffs.items()}, Fraction(const), rel)


def poly(*ineqs, space=SP):
    return Polyhedron(space, ineqs)


def rand_ineq(rng, dims):
    coeffs = {}
    for d in dims:
        if rng.random() < 0.55:
            coeffs[d] = Fraction(rng.randint(-3, 3))
    const = Fraction(rng.randint(-10, 10))
    rel = rng.choice([Rel.LE, Rel.LE, Rel.LT, Rel.LT, Rel.EQ])
    return Inequality(coeffs, const, rel)


def rand_poly(rng, space=SP, max_ineqs=5):
    n = rng.randint(0, max_ineqs)
    return Polyhedron(space, [rand_ineq(rng, space.dims) for _ in range(n)])


def rand_point(rng, dims):
    return {d: Fraction(rng.randint(-8, 16), rng.choice([1, 1, 2, 4])) for d in dims}


# ---------------------------------------------------------------------------
# satisfiability


def test_contradictory_bounds_unsat():
    # x >= 1 and x < 1
    p = poly(ineq({"x": -1}, 1), ineq({"x": 1}, -1, Rel.LT))
    assert not p.is_satisfiable()


def test_zone_constraint_satisfiable():
    # 3 >= x >= p and 0 <= p <= 3, q >= 0
    p = poly(ineq({"x": 1}, -3), ineq({"p": 1, "x": -1}, 0), ineq({"p": 1}, -3))
    assert p.is_satisfiable()
    assert p.contains_point({"x": Fraction(2), "y": Fraction(0), "p": Fraction(1), "q": Fraction(0)})


def test_satisfiability_matches_naive_fm():
    rng = random.Random(12345)
    for _ in range(200):
        p = rand_poly(rng)
        rows = [(dict(iq.coeffs), Fraction(iq.const), iq.rel) for iq in p.constraints]
        assert p.is_satisfiable() == _naive_satisfiable(rows, SP.dims)


def test_sample_point_lands_inside():
    rng = random.Random(999)
    hits = 0
    for _ in range(150):
        p = rand_poly(rng)
        pt = p.sample_point()
        if pt is None:
            assert not p.is_satisfiable()
        else:
            hits += 1
            assert p.contains_point(pt)
    assert hits > 30  # the generator is not degenerate


# ---------------------------------------------------------------------------
# intersection


def test_intersect_universe_is_identity():
    p = poly(ineq({"x": 1}, -3), ineq({"x": -1, "p": 1}, 0))
    assert p.intersect(Polyhedron.universe(SP)).equivalent(p)


def test_intersect_guard_and_invariant():
    # {x <= 3} with {x >= p}: p <= x <= 3 (p nonnegative implicitly)
    a = poly(ineq({"x": 1}, -3))
    b = poly(ineq({"p": 1, "x": -1}, 0))
    c = a.intersect(b)
    expect = poly(ineq({"x": 1}, -3), ineq({"p": 1, "x": -1}, 0))
    assert c.equivalent(expect)
    assert not c.contains_point({"x": Fraction(1), "y": 0, "p": Fraction(2), "q": 0})


def test_intersect_membership_sampling():
    rng = random.Random(777)
    for _ in range(25):
        a, b = rand_poly(rng), rand_poly(rng)
        c = a.intersect(b)
        for _ in range(4):
            pt = rand_point(rng, SP.dims)
            assert c.contains_point(pt) == (a.contains_point(pt) and b.contains_point(pt))


def test_intersect_space_mismatch():
    other = Polyhedron.universe(Space(("x",), ()))
    with pytest.raises(DimensionMismatch):
        poly().intersect(other)


# ---------------------------------------------------------------------------
# time elapse


def test_elapse_from_origin_under_invariant():
    # elapse({x = 0, y = 0}) meet {x <= 3} leaves 0 <= x = y <= 3
    origin = poly(ineq({"x": 1}, 0, Rel.EQ), ineq({"y": 1}, 0, Rel.EQ))
    elapsed = origin.time_elapse().intersect(poly(ineq({"x": 1}, -3)))
    expect = poly(
        ineq({"x": -1}, 0),
        ineq({"x": 1}, -3),
        ineq({"x": 1, "y": -1}, 0, Rel.EQ),
    )
    assert elapsed.equivalent(expect)


def test_elapse_universe_fixed_point():
    u = Polyhedron.universe(SP)
    assert u.time_elapse().equivalent(u)


def test_elapse_does_not_move_params():
    p = poly(ineq({"p": 1}, -2), ineq({"x": 1}, -1))
    e = p.time_elapse()
    assert e.contains_point({"x": Fraction(50), "y": Fraction(50), "p": Fraction(1), "q": 0})
    assert not e.contains_point({"x": Fraction(0), "y": 0, "p": Fraction(3), "q": 0})


def test_elapse_idempotent_and_extensive():
    rng = random.Random(4242)
    for _ in range(100):
        p = rand_poly(rng)
        e = p.time_elapse()
        assert e.includes(p)
        ee = e.time_elapse()
        assert ee.includes(e) and e.includes(ee)


# ---------------------------------------------------------------------------
# reset


def test_reset_single_clock():
    # reset({x = y, 0 <= y <= 1}, {x}) = {x = 0, 0 <= y <= 1}
    p = poly(ineq({"x": 1, "y": -1}, 0, Rel.EQ), ineq({"y": -1}, 0), ineq({"y": 1}, -1))
    r = p.reset(["x"])
    expect = poly(ineq({"x": 1}, 0, Rel.EQ), ineq({"y": -1}, 0), ineq({"y": 1}, -1))
    assert r.equivalent(expect)


def test_reset_empty_set_is_identity():
    rng = random.Random(31)
    for _ in range(20):
        p = rand_poly(rng)
        assert p.reset([]).equivalent(p)


def test_reset_idempotent():
    rng = random.Random(77)
    for _ in range(100):
        p = rand_poly(rng)
        r1 = p.reset(["x"])
        assert r1.reset(["x"]).equivalent(r1)


def test_reset_rejects_parameters():
    with pytest.raises(DimensionMismatch):
        poly().reset(["p"])


# ---------------------------------------------------------------------------
# elimination


def test_eliminate_clock_from_zone():
    # {x >= q, 0 <= q <= 3, p >= 0} without x
    p = poly(ineq({"q": 1, "x": -1}, 0), ineq({"q": 1}, -3))
    out = p.eliminate(["x"])
    expect = poly(ineq({"q": 1}, -3))
    assert out.equivalent(expect)
    assert "x" not in out.dims_referenced()


def test_eliminate_absent_dim_is_identity():
    p = poly(ineq({"p": 1}, -3))
    assert p.eliminate(["y"]).equivalent(p)


def test_eliminate_soundness_by_sampling():
    rng = random.Random(1618)
    for _ in range(100):
        p = rand_poly(rng)
        drop = rng.sample(list(SP.dims), rng.randint(1, 2))
        projected = p.eliminate(drop)
        kept = [d for d in SP.dims if d not in drop]
        v = {d: rand_point(rng, [d])[d] for d in kept}
        member = projected.substitute(v).is_satisfiable()
        oracle = p.substitute(v).is_satisfiable()
        assert member == oracle


def test_strictness_preserved_through_projection():
    # 0 < x < 2 and y = x projected to y keeps both bounds strict
    p = poly(
        ineq({"x": -1}, 0, Rel.LT),
        ineq({"x": 1}, -2, Rel.LT),
        ineq({"x": 1, "y": -1}, 0, Rel.EQ),
    )
    out = p.eliminate(["x"])
    assert not out.contains_point({"x": 0, "y": Fraction(0), "p": 0, "q": 0})
    assert not out.contains_point({"x": 0, "y": Fraction(2), "p": 0, "q": 0})
    assert out.contains_point({"x": 0, "y": Fraction(1), "p": 0, "q": 0})


def test_strictness_never_widened_random():
    # endpoints of 1-D projections: open stays open, closed stays closed
    rng = random.Random(2024)
    space = Space(clocks=("x", "y"), params=("d",))
    for _ in range(100):
        n = rng.randint(1, 4)
        p = Polyhedron(space, [rand_ineq(rng, space.dims) for _ in range(n)])
        proj = p.eliminate(["x", "y"])
        if not proj.is_satisfiable():
            continue
        ds = to_duration_set(ConstraintUnion(space, [proj]), "d")
        for iv in ds.intervals:
            assert proj.substitute({"d": iv.lo}).is_satisfiable() == iv.lo_closed
            if iv.hi is not None:
                assert proj.substitute({"d": iv.hi}).is_satisfiable() == iv.hi_closed


# ---------------------------------------------------------------------------
# inclusion


def test_includes_simple():
    assert poly(ineq({"x": 1}, -3)).includes(poly(ineq({"x": 1}, -2)))
    assert not poly(ineq({"x": 1}, -2)).includes(poly(ineq({"x": 1}, -3)))


def test_includes_strict_vs_nonstrict():
    le = poly(ineq({"x": 1}, -1))
    lt = poly(ineq({"x": 1}, -1, Rel.LT))
    assert le.includes(lt)
    assert not lt.includes(le)


def test_includes_agrees_with_sampling():
    rng = random.Random(55)
    for _ in range(40):
        a, b = rand_poly(rng, max_ineqs=3), rand_poly(rng, max_ineqs=3)
        if a.includes(b):
            pt = b.sample_point()
            if pt is not None:
                assert a.contains_point(pt)
        else:
            # a witness of b outside a must exist; find it by conjoining a negation
            found = False
            for iq in a.constraints:
                for neg in iq.negations():
                    w = b.conjoin([neg]).sample_point()
                    if w is not None:
                        assert b.contains_point(w) and not a.contains_point(w)
                        found = True
                        break
                if found:
                    break
            assert found


# ---------------------------------------------------------------------------
# duration sets


DSP = Space(clocks=(), params=("d",))


def dpoly(*ineqs):
    return Polyhedron(DSP, ineqs)


def dunion(*polys):
    return ConstraintUnion(DSP, polys)


def test_duration_set_strict_lower():
    # {d > 30} canonicalizes to (30, inf)
    u = dunion(dpoly(ineq({"d": -1}, 30, Rel.LT)))
    ds = to_duration_set(u, "d")
    assert ds.intervals == (Interval(Fraction(30), False, None, True),)
    assert not ds.contains(Fraction(30))
    assert ds.contains(Fraction(31))


def test_duration_set_bottom():
    assert to_duration_set(dunion(), "d").is_empty()


def test_duration_set_merges_overlapping():
    a = dpoly(ineq({"d": -1}, 1024), ineq({"d": 1}, -1029))
    b = dpoly(
        ineq({"d": -1}, parse_rational("1026.048")),
        ineq({"d": 1}, -1034),
    )
    ds = to_duration_set(dunion(a, b), "d")
    assert ds == DurationSet.closed(1024, 1034)


def test_duration_set_no_merge_across_gap():
    a = dpoly(ineq({"d": -1}, 0), ineq({"d": 1}, -1, Rel.LT))   # [0, 1)
    b = dpoly(ineq({"d": -1}, 1, Rel.LT), ineq({"d": 1}, -2))   # (1, 2]
    ds = to_duration_set(dunion(a, b), "d")
    assert len(ds.intervals) == 2
    # but [0,1) with [1,2] merges
    c = dpoly(ineq({"d": -1}, 1), ineq({"d": 1}, -2))
    ds2 = to_duration_set(dunion(a, c), "d")
    assert ds2 == DurationSet.closed(0, 2)


def test_union_equal_1d():
    a13 = dpoly(ineq({"d": -1}, 1), ineq({"d": 1}, -3))
    a23 = dpoly(ineq({"d": -1}, 2), ineq({"d": 1}, -3))
    half = dpoly(ineq({"d": -2}, 3), ineq({"d": 1}, -3))  # [1.5, 3]
    assert not union_equal_1d(dunion(a13), dunion(a23), "d")
    assert union_equal_1d(dunion(half), dunion(half), "d")


def test_union_equal_1d_rejects_residual_dims():
    sp = Space(clocks=("x",), params=("d",))
    bad = ConstraintUnion(sp, [Polyhedron(sp, [ineq({"x": 1, "d": -1}, 0)])])
    ok = ConstraintUnion(sp, [Polyhedron(sp, [ineq({"d": 1}, -1)])])
    with pytest.raises(ResidualDimensions):
        union_equal_1d(bad, ok, "d")


def test_duration_set_intersection_and_subset():
    a = DurationSet.closed(1, 3)
    b = DurationSet.closed(2, 3)
    assert a.intersect(b) == b
    assert b.is_subset_of(a)
    assert not a.is_subset_of(b)
    assert DurationSet.empty().is_subset_of(b)


def test_duration_set_point_and_equality_is_structural():
    p = DurationSet.point(Fraction(5, 2))
    q = DurationSet((Interval(Fraction(5, 2), True, Fraction(5, 2), True),))
    assert p == q and hash(p) == hash(q)


def test_duration_set_json_round_trip():
    ds = DurationSet(
        (
            Interval(Fraction(0), True, Fraction(1), False),
            Interval(Fraction(30), False, None, True),
        )
    )
    again = DurationSet.from_json(ds.as_json())
    assert again == ds
    assert ds.as_json()[1]["hi"] == "inf"


# ---------------------------------------------------------------------------
# rationals


def test_rational_formats():
    assert format_rational(parse_rational("1026.048")) == "1026.048"
    assert format_rational(Fraction(501, 500)) == "1.002"
    assert format_rational(Fraction(1, 3)) == "1/3"
    assert format_rational(Fraction(-7, 4)) == "-1.75"
    assert format_rational(Fraction(3)) == "3"
    assert parse_rational("501/500") == parse_rational("1.002")
    with pytest.raises(ValueError):
        parse_rational("1.2.3")


def test_unsatisfiable_disjuncts_pruned_from_union():
    empty_halfopen = dpoly(ineq({"d": -1}, 1), ineq({"d": 1}, -1, Rel.LT))  # 1 <= d < 1
    contradiction = dpoly(ineq({"d": -1}, 0, Rel.LT), ineq({"d": 1}, 0, Rel.LT))  # d > 0, d < 0
    assert dunion(contradiction).is_false
    assert dunion(empty_halfopen).is_false
    live = dpoly(ineq({"d": 1}, -1))
    assert dunion(contradiction, live).disjuncts == (live,)
