"""Region certificates against sampling oracles."""

from __future__ import annotations

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from germglue.errors import CoverageLossError, ShapeError
from germglue.jets import (
    PolyMap,
    identity_map,
    jet_add,
    jet_const,
    jet_eval,
    jet_from_terms,
    jet_mul,
    jet_pow,
    jet_var,
)
from germglue.regions import (
    CoverTriple,
    Polydisc,
    TubeDomain,
    contains,
    disc_lens_inner,
    disc_lens_outer,
    disc_margin,
    discs_disjoint,
    map_image_bound,
    point_in_polydisc,
    point_in_tube,
    polydisc_common_point,
    polydisc_disjoint,
    polydisc_inflate,
    polydisc_intersection_inner,
    polydisc_intersection_outer,
    polydisc_rel_compact,
    polydisc_scale,
    range_bound,
    range_bound_tube,
    recenter,
    refine_cover,
    rel_compact,
    tube_as_polydisc,
    tube_rel_compact,
)
from germglue.scalars import Coeff, ONE, ZERO, coeff_abs_ub


def frac(p, q=1):
    return Coeff(Fraction(p, q))


def disc(center, radius) -> Polydisc:
    return Polydisc([center if isinstance(center, Coeff) else frac(center)], [Fraction(radius)])


def grid_points(center: Coeff, radius: Fraction, steps: int = 8):
    """Rational points of the closed disc on a square grid."""
    for a in range(-steps, steps + 1):
        for b in range(-steps, steps + 1):
            dx = Fraction(a, steps) * radius
            dy = Fraction(b, steps) * radius
            if dx * dx + dy * dy <= radius * radius:
                yield center + Coeff(dx, dy)


# ---------------------------------------------------------------------------
# construction and basic containment
# ---------------------------------------------------------------------------


def test_polydisc_validation():
    with pytest.raises(ShapeError):
        Polydisc([frac(0)], [Fraction(0)])
    with pytest.raises(ShapeError):
        Polydisc([frac(0), frac(1)], [Fraction(1)])


def test_contains_examples():
    assert contains(disc(0, 1), disc(0, 2))
    assert rel_compact(disc(0, 1), disc(0, 2)) == 1
    assert contains(disc(0, 1), disc(0, 1))
    assert rel_compact(disc(0, 1), disc(0, 1)) is None
    assert rel_compact(disc(Fraction(1, 2), 1), disc(0, 2)) == Fraction(1, 2)


def test_contains_is_sound_on_samples():
    inner, outer = disc(Fraction(1, 2), 1), disc(0, 2)
    assert contains(inner, outer)
    for p in grid_points(inner.centers[0], inner.radii[0], steps=6):
        assert point_in_polydisc((p,), outer, strict=False)


def test_tube_containment():
    a = TubeDomain("c", disc(0, 1), 2, Fraction(1, 4))
    b = TubeDomain("c", disc(0, 2), 2, Fraction(1, 2))
    assert contains(a, b)
    assert rel_compact(a, b) == Fraction(1, 4)
    with pytest.raises(ShapeError):
        contains(a, TubeDomain("other", disc(0, 2), 2, Fraction(1, 2)))


def test_cover_triple_requires_concentric_increasing():
    with pytest.raises(ShapeError):
        CoverTriple(disc(0, 1), disc(1, 2), disc(0, 3))
    with pytest.raises(ShapeError):
        CoverTriple(disc(0, 2), disc(0, 1), disc(0, 3))


# ---------------------------------------------------------------------------
# lens calculus
# ---------------------------------------------------------------------------

disc_strategy = st.builds(
    lambda cr, ci, r: (Coeff(cr, ci), r),
    st.builds(Fraction, st.integers(-8, 8), st.integers(1, 4)),
    st.builds(Fraction, st.integers(-8, 8), st.integers(1, 4)),
    st.builds(Fraction, st.integers(1, 12), st.integers(1, 4)),
)


@settings(max_examples=120, deadline=None)
@given(disc_strategy, disc_strategy)
def test_lens_outer_contains_sampled_intersection(d1, d2):
    (c1, r1), (c2, r2) = d1, d2
    lens = disc_lens_outer(c1, r1, c2, r2)
    if lens is None:
        assert discs_disjoint(c1, r1, c2, r2)
        return
    m, rho = lens
    for p in grid_points(c1, r1, steps=5):
        if (p - c2).abs2() <= r2 * r2:
            assert (p - m).abs2() <= rho * rho


@settings(max_examples=120, deadline=None)
@given(disc_strategy, disc_strategy)
def test_lens_inner_inside_both(d1, d2):
    (c1, r1), (c2, r2) = d1, d2
    lens = disc_lens_inner(c1, r1, c2, r2)
    if lens is None:
        return
    m, rho = lens
    assert (m - c1).abs2() < r1 * r1 and (m - c2).abs2() < r2 * r2
    # sample strictly inside the open inner disc
    for p in grid_points(m, rho * Fraction(5, 6), steps=3):
        assert (p - c1).abs2() < r1 * r1
        assert (p - c2).abs2() < r2 * r2


def test_lens_concentric_exact():
    assert disc_lens_outer(frac(0), Fraction(2), frac(0), Fraction(1)) == (frac(0), Fraction(1))
    assert disc_lens_inner(frac(0), Fraction(2), frac(0), Fraction(1)) == (frac(0), Fraction(1))


def test_polydisc_intersections_and_common_point():
    a = Polydisc([frac(0), frac(0)], [Fraction(1), Fraction(1)])
    b = Polydisc([frac(1), frac(0)], [Fraction(1), Fraction(2)])
    outer = polydisc_intersection_outer(a, b)
    inner = polydisc_intersection_inner(a, b)
    assert outer is not None and inner is not None
    assert polydisc_rel_compact(inner, polydisc_inflate(outer, Fraction(1, 100))) is not None
    pt = polydisc_common_point([a, b])
    assert pt is not None
    assert point_in_polydisc(pt, a) and point_in_polydisc(pt, b)
    far = Polydisc([frac(10), frac(0)], [Fraction(1), Fraction(1)])
    assert polydisc_disjoint(a, far)
    assert polydisc_intersection_outer(a, far) is None


# ---------------------------------------------------------------------------
# range bounds
# ---------------------------------------------------------------------------


def test_range_bound_spec_values():
    x = jet_var(1, 3, 0)
    assert range_bound(jet_pow(x, 2), disc(0, Fraction(1, 2))) == Fraction(1, 4)
    f = jet_add(jet_const(1, 3, ONE), x)
    assert range_bound(f, disc(0, 1)) == 2


def test_recenter_is_exact_shift():
    x = jet_var(1, 3, 0)
    f = jet_add(jet_pow(x, 2), x)  # x + x^2
    g = recenter(f, (frac(1),))    # (1+u) + (1+u)^2 = 2 + 3u + u^2
    assert g.terms == {(0,): frac(2), (1,): frac(3), (2,): ONE}
    for v in (frac(0), frac(1, 3), frac(-2)):
        assert jet_eval(g, (v,)) == jet_eval(f, (v + frac(1),))


def test_range_bound_dominates_grid_max():
    # random-ish cubic with complex coefficients on a shifted disc
    f = jet_from_terms(
        1,
        3,
        [
            ((0,), Coeff(Fraction(1, 3), Fraction(-1, 2))),
            ((1,), Coeff(Fraction(-2), Fraction(1, 4))),
            ((2,), Coeff(Fraction(1, 2), Fraction(1))),
            ((3,), Coeff(Fraction(3, 7), Fraction(0))),
        ],
    )
    d = disc(Fraction(1, 3), Fraction(5, 4))
    bound = range_bound(f, d)
    for p in grid_points(d.centers[0], d.radii[0], steps=7):
        val = jet_eval(f, (p,))
        assert val.abs2() <= bound * bound


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.integers(0, 3),
            st.builds(Coeff,
                      st.builds(Fraction, st.integers(-6, 6), st.integers(1, 3)),
                      st.builds(Fraction, st.integers(-6, 6), st.integers(1, 3))),
        ),
        max_size=5,
    ),
    st.builds(Fraction, st.integers(-4, 4), st.integers(1, 3)),
    st.builds(Fraction, st.integers(1, 8), st.integers(1, 4)),
)
def test_range_bound_sound_random(terms, center, radius):
    f = jet_from_terms(1, 3, [((k,), c) for k, c in terms])
    d = Polydisc([Coeff(center)], [radius])
    bound = range_bound(f, d)
    for p in grid_points(d.centers[0], d.radii[0], steps=4):
        assert jet_eval(f, (p,)).abs2() <= bound * bound


def test_range_bound_tube_counts_fiber():
    # f(t, z) = t * z^2 over base disc radius 1, fiber radius 1/2 -> 1/4
    t = jet_var(2, 3, 0)
    z = jet_var(2, 3, 1)
    f = jet_mul(t, jet_pow(z, 2))
    tube = TubeDomain(0, disc(0, 1), 1, Fraction(1, 2))
    assert range_bound_tube(f, tube) == Fraction(1, 4)


# ---------------------------------------------------------------------------
# image bounds
# ---------------------------------------------------------------------------


def test_image_bound_identity_exact():
    d = TubeDomain("a", Polydisc([frac(1, 2)], [Fraction(3, 4)]), 2, Fraction(1, 8))
    out = map_image_bound(identity_map(3, 4), d, 1)
    assert out == d


def test_image_bound_spec_example():
    # f(t,z) = (t, z + t z^2), base disc(0,1), fiber 1/4 -> fiber bound 5/16
    t = jet_var(2, 4, 0)
    z = jet_var(2, 4, 1)
    f = PolyMap(2, [t, jet_add(z, jet_mul(t, jet_pow(z, 2)))])
    d = TubeDomain(0, disc(0, 1), 1, Fraction(1, 4))
    out = map_image_bound(f, d, 1)
    assert out.fiber_radius == Fraction(5, 16)
    assert out.base == d.base


def test_image_bound_is_sound_on_samples():
    t = jet_var(2, 4, 0)
    z = jet_var(2, 4, 1)
    f = PolyMap(2, [jet_add(t, jet_pow(z, 2)), jet_add(z, jet_mul(t, jet_pow(z, 2)))])
    d = TubeDomain(0, disc(Fraction(1, 4), 1), 1, Fraction(1, 4))
    out = map_image_bound(f, d, 1)
    box = tube_as_polydisc(d)
    # sample rational points of the tube on a coarse grid
    for a in range(-3, 4):
        for b in range(-3, 4):
            pt = (
                box.centers[0] + Coeff(Fraction(a, 3) * box.radii[0]),
                Coeff(Fraction(b, 3) * box.radii[1]),
            )
            if not point_in_polydisc(pt, box, strict=False):
                continue
            img = tuple(jet_eval(c, pt) for c in f.components)
            assert point_in_tube(img, out, strict=False)


# ---------------------------------------------------------------------------
# cover refinement
# ---------------------------------------------------------------------------


def test_refine_cover_defaults():
    [triple] = refine_cover([disc(0, 1)])
    assert triple.U.radii == (Fraction(3, 5),)
    assert triple.V.radii == (Fraction(4, 5),)
    assert triple.W.radii == (Fraction(1),)


def test_refine_cover_keeps_segment_covered():
    ws = [disc(0, 1), disc(1, 1)]
    pts = [(frac(k, 10),) for k in range(11)]
    triples = refine_cover(ws, pts)
    assert len(triples) == 2


def test_refine_cover_detects_loss():
    ws = [disc(0, 1), disc(10, 1)]
    pts = [(frac(5),)]
    with pytest.raises(CoverageLossError):
        refine_cover(ws, pts)


def test_scale_and_inflate():
    d = disc(Fraction(1, 2), 2)
    assert polydisc_scale(d, Fraction(1, 2)).radii == (Fraction(1),)
    assert polydisc_inflate(d, Fraction(1, 4)).radii == (Fraction(9, 4),)
    assert polydisc_scale(d, Fraction(1, 2)).centers == d.centers
