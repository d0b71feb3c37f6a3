"""Certified region arithmetic: polydiscs, tube domains, range bounds.

Regions are restricted to products of discs.  Every predicate here is a
one-sided certificate: a ``True`` answer (or a returned margin/bound) is
backed by exact rational arithmetic and is sound; a ``False``/``None``
answer means "not certified", never "certified false".  Callers react to
uncertified answers by shrinking, not by failing.

Closures are modelled by closed polydiscs with the same radii, so all
relative-compactness checks demand strictly positive margins.

The fiber balls of tube domains use the maximum norm, i.e. they are
polydiscs themselves; this fixes the free choice of fiberwise metric and
keeps every region a product of discs.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional, Sequence, Tuple

from .errors import CoverageLossError, ShapeError
from .jets import Jet, PolyMap, jet_const, jet_eval, jet_sub
from .scalars import Coeff, ONE, ZERO, coeff_abs_ub, sqrt_ub

Point = Tuple[Coeff, ...]


class Polydisc:
    """Product of open discs: one (center, radius) pair per variable."""

    __slots__ = ("centers", "radii")

    def __init__(self, centers: Sequence[Coeff], radii: Sequence[Fraction]):
        centers = tuple(centers)
        radii = tuple(Fraction(r) for r in radii)
        if len(centers) != len(radii) or not centers:
            raise ShapeError("polydisc needs matching nonempty centers and radii")
        if any(r <= 0 for r in radii):
            raise ShapeError("polydisc radii must be positive")
        self.centers = centers
        self.radii = radii

    @property
    def dim(self) -> int:
        return len(self.radii)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polydisc):
            return NotImplemented
        return self.centers == other.centers and self.radii == other.radii

    def __hash__(self):
        raise TypeError("regions are not hashable")

    def __repr__(self) -> str:
        return f"Polydisc(dim {self.dim}, radii {[str(r) for r in self.radii]})"


class TubeDomain:
    """Base polydisc times the fiber ball {max_j |z_j| < fiber_radius}."""

    __slots__ = ("chart", "base", "fiber_dim", "fiber_radius")

    def __init__(self, chart, base: Polydisc, fiber_dim: int, fiber_radius: Fraction):
        fiber_radius = Fraction(fiber_radius)
        if fiber_dim < 1:
            raise ShapeError("tube needs at least one fiber variable")
        if fiber_radius <= 0:
            raise ShapeError("fiber radius must be positive")
        self.chart = chart
        self.base = base
        self.fiber_dim = fiber_dim
        self.fiber_radius = fiber_radius

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TubeDomain):
            return NotImplemented
        return (
            self.chart == other.chart
            and self.base == other.base
            and self.fiber_dim == other.fiber_dim
            and self.fiber_radius == other.fiber_radius
        )

    def __hash__(self):
        raise TypeError("regions are not hashable")

    def __repr__(self) -> str:
        return (
            f"TubeDomain(chart {self.chart!r}, base {self.base!r}, "
            f"fiber {self.fiber_dim} vars < {self.fiber_radius})"
        )


class CoverTriple:
    """Concentric shrinking U inside V inside W with strict margins."""

    __slots__ = ("U", "V", "W")

    def __init__(self, U: Polydisc, V: Polydisc, W: Polydisc):
        if not (U.centers == V.centers == W.centers):
            raise ShapeError("cover triple must be concentric")
        if not all(u < v < w for u, v, w in zip(U.radii, V.radii, W.radii)):
            raise ShapeError("cover triple needs strictly increasing radii")
        self.U = U
        self.V = V
        self.W = W

    def __repr__(self) -> str:
        return f"CoverTriple({self.U!r} in {self.V!r} in {self.W!r})"


# ---------------------------------------------------------------------------
# single-disc certificates (exact rational arithmetic throughout)
# ---------------------------------------------------------------------------


def _dist2(a: Coeff, b: Coeff) -> Fraction:
    return (a - b).abs2()


def disc_contains(c_in: Coeff, r_in: Fraction, c_out: Coeff, r_out: Fraction) -> bool:
    """Closed disc (c_in, r_in) inside closed disc (c_out, r_out)."""
    if r_in > r_out:
        return False
    return _dist2(c_in, c_out) <= (r_out - r_in) ** 2


def disc_margin(c_in: Coeff, r_in: Fraction, c_out: Coeff, r_out: Fraction) -> Optional[Fraction]:
    """Certified lower bound for the boundary gap r_out - r_in - |Δc|,
    or None when no positive margin is certified."""
    m = r_out - r_in - sqrt_ub(_dist2(c_in, c_out))
    return m if m > 0 else None


def discs_disjoint(c1: Coeff, r1: Fraction, c2: Coeff, r2: Fraction) -> bool:
    """Certified disjointness of the open discs."""
    return _dist2(c1, c2) >= (r1 + r2) ** 2


def disc_lens_outer_candidates(
    c1: Coeff, r1: Fraction, c2: Coeff, r2: Fraction
) -> Optional[list[tuple[Coeff, Fraction]]]:
    """Discs certified to contain the intersection of the two closed discs;
    None when the open discs are certifiably disjoint.

    Candidates: the disc on the radical chord (when the chord separates the
    lens; exact rational center, upper square-root radius bound) listed
    first, then either input disc.  Callers needing a single disc take the
    smallest; callers fitting the bound into a target may try each."""
    if discs_disjoint(c1, r1, c2, r2):
        return None
    d2 = _dist2(c1, c2)
    if d2 == 0:
        return [(c1, min(r1, r2))]
    candidates = []
    s1 = d2 + r1 * r1 - r2 * r2
    s2 = d2 + r2 * r2 - r1 * r1
    if s1 >= 0 and s2 >= 0:
        # chord disc: center on the segment, covering the lens because both
        # circular arcs bend inside it when the chord lies between centers
        t = s1 / (2 * d2)
        m = c1 + (c2 - c1) * Coeff(t)
        h2 = r1 * r1 - t * t * d2
        if h2 > 0:
            candidates.append((m, sqrt_ub(h2)))
    candidates.append((c1, r1))
    candidates.append((c2, r2))
    return candidates


def disc_lens_outer(
    c1: Coeff, r1: Fraction, c2: Coeff, r2: Fraction
) -> Optional[tuple[Coeff, Fraction]]:
    """Smallest candidate disc certified to contain the intersection of the
    two closed discs; None when the open discs are certifiably disjoint."""
    candidates = disc_lens_outer_candidates(c1, r1, c2, r2)
    if candidates is None:
        return None
    return min(candidates, key=lambda cr: cr[1])


def disc_lens_inner(
    c1: Coeff, r1: Fraction, c2: Coeff, r2: Fraction
) -> Optional[tuple[Coeff, Fraction]]:
    """An open disc certified inside the open intersection, or None.

    Every point strictly within rho of the returned center lies in both
    open discs."""
    if discs_disjoint(c1, r1, c2, r2):
        return None
    d2 = _dist2(c1, c2)
    if d2 == 0:
        return (c1, min(r1, r2))
    t = (d2 + r1 * r1 - r2 * r2) / (2 * d2)
    # clamp the chord point onto the segment so the center is sensible even
    # in one-disc-inside-the-other configurations
    t = max(Fraction(0), min(Fraction(1), t))
    m = c1 + (c2 - c1) * Coeff(t)
    rho = min(r1 - sqrt_ub(_dist2(m, c1)), r2 - sqrt_ub(_dist2(m, c2)))
    if rho <= 0:
        return None
    return (m, rho)


# ---------------------------------------------------------------------------
# polydisc certificates
# ---------------------------------------------------------------------------


def _check_same_dim(a: Polydisc, b: Polydisc) -> None:
    if a.dim != b.dim:
        raise ShapeError(f"polydisc dimension mismatch: {a.dim} vs {b.dim}")


def polydisc_contains(inner: Polydisc, outer: Polydisc) -> bool:
    _check_same_dim(inner, outer)
    return all(
        disc_contains(ci, ri, co, ro)
        for ci, ri, co, ro in zip(inner.centers, inner.radii, outer.centers, outer.radii)
    )


def polydisc_rel_compact(inner: Polydisc, outer: Polydisc) -> Optional[Fraction]:
    """Strict containment margin (minimum over coordinates), or None."""
    _check_same_dim(inner, outer)
    margins = []
    for ci, ri, co, ro in zip(inner.centers, inner.radii, outer.centers, outer.radii):
        m = disc_margin(ci, ri, co, ro)
        if m is None:
            return None
        margins.append(m)
    return min(margins)


def polydisc_disjoint(a: Polydisc, b: Polydisc) -> bool:
    """Certified emptiness of the intersection (disjoint in some coordinate)."""
    _check_same_dim(a, b)
    return any(
        discs_disjoint(ca, ra, cb, rb)
        for ca, ra, cb, rb in zip(a.centers, a.radii, b.centers, b.radii)
    )


def polydisc_intersection_outer(a: Polydisc, b: Polydisc) -> Optional[Polydisc]:
    """Polydisc certified to contain the intersection; None when the
    intersection is certifiably empty."""
    _check_same_dim(a, b)
    centers, radii = [], []
    for ca, ra, cb, rb in zip(a.centers, a.radii, b.centers, b.radii):
        lens = disc_lens_outer(ca, ra, cb, rb)
        if lens is None:
            return None
        centers.append(lens[0])
        radii.append(lens[1])
    return Polydisc(centers, radii)


def polydisc_intersection_inner(a: Polydisc, b: Polydisc) -> Optional[Polydisc]:
    """Polydisc certified inside the open intersection; None when no
    positive-radius inner witness is found."""
    _check_same_dim(a, b)
    centers, radii = [], []
    for ca, ra, cb, rb in zip(a.centers, a.radii, b.centers, b.radii):
        lens = disc_lens_inner(ca, ra, cb, rb)
        if lens is None:
            return None
        centers.append(lens[0])
        radii.append(lens[1])
    return Polydisc(centers, radii)


def polydisc_inflate(p: Polydisc, delta: Fraction) -> Polydisc:
    if delta < 0:
        raise ShapeError("inflation amount must be nonnegative")
    return Polydisc(p.centers, tuple(r + delta for r in p.radii))


def polydisc_scale(p: Polydisc, factor: Fraction) -> Polydisc:
    if factor <= 0:
        raise ShapeError("scale factor must be positive")
    return Polydisc(p.centers, tuple(r * factor for r in p.radii))


def point_in_polydisc(x: Sequence[Coeff], p: Polydisc, strict: bool = True) -> bool:
    if len(x) != p.dim:
        raise ShapeError("point dimension mismatch")
    for xv, c, r in zip(x, p.centers, p.radii):
        d2 = _dist2(xv, c)
        if strict:
            if not d2 < r * r:
                return False
        else:
            if not d2 <= r * r:
                return False
    return True


def polydisc_common_point(ps: Sequence[Polydisc]) -> Optional[Point]:
    """A rational point certified in the open intersection of all the
    polydiscs, found by iterated inner-lens narrowing; None if not found
    (not a certificate of emptiness)."""
    if not ps:
        return None
    acc = ps[0]
    for q in ps[1:]:
        acc = polydisc_intersection_inner(acc, q)
        if acc is None:
            return None
    point = acc.centers
    if all(point_in_polydisc(point, p, strict=True) for p in ps):
        return point
    return None


# ---------------------------------------------------------------------------
# tube-domain certificates
# ---------------------------------------------------------------------------


def tube_as_polydisc(t: TubeDomain) -> Polydisc:
    """The tube as a polydisc in base + fiber variables (fiber centered 0)."""
    centers = t.base.centers + (ZERO,) * t.fiber_dim
    radii = t.base.radii + (t.fiber_radius,) * t.fiber_dim
    return Polydisc(centers, radii)


def tube_contains(inner: TubeDomain, outer: TubeDomain) -> bool:
    if inner.chart != outer.chart:
        raise ShapeError("tube containment across different charts")
    if inner.fiber_dim != outer.fiber_dim:
        raise ShapeError("tube fiber dimension mismatch")
    return (
        polydisc_contains(inner.base, outer.base)
        and inner.fiber_radius <= outer.fiber_radius
    )


def tube_rel_compact(inner: TubeDomain, outer: TubeDomain) -> Optional[Fraction]:
    if inner.chart != outer.chart:
        raise ShapeError("tube containment across different charts")
    if inner.fiber_dim != outer.fiber_dim:
        raise ShapeError("tube fiber dimension mismatch")
    base_margin = polydisc_rel_compact(inner.base, outer.base)
    fiber_margin = outer.fiber_radius - inner.fiber_radius
    if base_margin is None or fiber_margin <= 0:
        return None
    return min(base_margin, fiber_margin)


def point_in_tube(x: Sequence[Coeff], t: TubeDomain, strict: bool = True) -> bool:
    return point_in_polydisc(x, tube_as_polydisc(t), strict=strict)


def contains(inner, outer) -> bool:
    """Certified containment for matching region types."""
    if isinstance(inner, Polydisc) and isinstance(outer, Polydisc):
        return polydisc_contains(inner, outer)
    if isinstance(inner, TubeDomain) and isinstance(outer, TubeDomain):
        return tube_contains(inner, outer)
    raise ShapeError("containment needs two regions of the same type")


def rel_compact(inner, outer) -> Optional[Fraction]:
    """Certified strict containment margin for matching region types."""
    if isinstance(inner, Polydisc) and isinstance(outer, Polydisc):
        return polydisc_rel_compact(inner, outer)
    if isinstance(inner, TubeDomain) and isinstance(outer, TubeDomain):
        return tube_rel_compact(inner, outer)
    raise ShapeError("containment needs two regions of the same type")


# ---------------------------------------------------------------------------
# range bounds
# ---------------------------------------------------------------------------


def _shift_variable(terms: dict, var: int, c: Coeff, num_vars: int) -> dict:
    """Exact polynomial substitution x_var -> x_var + c."""
    if c.is_zero():
        return terms
    out: dict = {}
    pows = [ONE]
    for e, coeff in terms.items():
        k = e[var]
        while len(pows) <= k:
            pows.append(pows[-1] * c)
        for j in range(k + 1):
            d = list(e)
            d[var] = j
            v = coeff * Coeff(Fraction(math.comb(k, j))) * pows[k - j]
            key = tuple(d)
            acc = out.get(key)
            v = v if acc is None else acc + v
            if v.is_zero():
                out.pop(key, None)
            else:
                out[key] = v
    return out


def recenter(f: Jet, center: Sequence[Coeff]) -> Jet:
    """The polynomial u -> f(center + u), exact (no truncation loss: the
    total degree never grows under the shift)."""
    if len(center) != f.num_vars:
        raise ShapeError("center has wrong dimension")
    terms = f.terms
    for i, c in enumerate(center):
        terms = _shift_variable(terms, i, c, f.num_vars)
    return Jet(f.num_vars, f.order, dict(terms))


def range_bound(f: Jet, d: Polydisc) -> Fraction:
    """Sound upper bound for sup over the closed polydisc of |f|, treating
    the stored terms of f as an exact polynomial: after recentering,
    sum |coeff| * radii**e.  Exact for monomials with real coefficients."""
    if f.num_vars != d.dim:
        raise ShapeError("jet/polydisc dimension mismatch")
    g = recenter(f, d.centers)
    total = Fraction(0)
    for e, c in g.terms.items():
        term = coeff_abs_ub(c)
        for r, k in zip(d.radii, e):
            if k:
                term *= r**k
        total += term
    return total


def range_bound_tube(f: Jet, t: TubeDomain) -> Fraction:
    return range_bound(f, tube_as_polydisc(t))


def map_image_bound(
    f: PolyMap,
    d: TubeDomain,
    target_base_dim: int,
    target_chart=None,
) -> TubeDomain:
    """Certified tube superset of f(d).

    The first ``target_base_dim`` components are treated as base
    coordinates: each image disc is centered at the component's value at the
    domain center (base center, fiber 0) with radius bounding the deviation.
    Remaining components are fiber coordinates measured from 0.  For the
    identity map the result equals the input exactly.
    """
    if f.source_vars != d.base.dim + d.fiber_dim:
        raise ShapeError("map source does not match tube dimension")
    if not 0 <= target_base_dim < f.target_vars:
        raise ShapeError("target base dimension out of range")
    center_point = d.base.centers + (ZERO,) * d.fiber_dim
    centers, radii = [], []
    for comp in f.components[:target_base_dim]:
        c = jet_eval(comp, center_point)
        dev = jet_sub(comp, jet_const(comp.num_vars, comp.order, c))
        centers.append(c)
        radii.append(range_bound_tube(dev, d))
    fiber = Fraction(0)
    for comp in f.components[target_base_dim:]:
        fiber = max(fiber, range_bound_tube(comp, d))
    if fiber == 0:
        # a certified superset must stay a valid (open) tube
        fiber = Fraction(1, 2**40)
    radii = [r if r > 0 else Fraction(1, 2**40) for r in radii]
    chart = d.chart if target_chart is None else target_chart
    return TubeDomain(chart, Polydisc(centers, radii), f.target_vars - target_base_dim, fiber)


# ---------------------------------------------------------------------------
# cover shrinking
# ---------------------------------------------------------------------------

RHO_U_DEFAULT = Fraction(3, 5)
RHO_V_DEFAULT = Fraction(4, 5)


def refine_cover(
    ws: Sequence[Polydisc],
    base_points: Sequence[Point] = (),
    rho_u: Fraction = RHO_U_DEFAULT,
    rho_v: Fraction = RHO_V_DEFAULT,
) -> list[CoverTriple]:
    """Concentric shrinking of each W at radius fractions rho_u < rho_v < 1,
    certifying that the shrunk U's still cover the declared base sample
    points (closed-disc membership)."""
    if not (0 < rho_u < rho_v < 1):
        raise ShapeError("need 0 < rho_u < rho_v < 1")
    triples = [
        CoverTriple(polydisc_scale(w, rho_u), polydisc_scale(w, rho_v), w) for w in ws
    ]
    missed = [
        tuple(str(c) for c in pt)
        for pt in base_points
        if not any(point_in_polydisc(pt, t.U, strict=False) for t in triples)
    ]
    if missed:
        raise CoverageLossError(
            f"shrunk cover misses {len(missed)} declared base point(s); first: {missed[0]}"
        )
    return triples
