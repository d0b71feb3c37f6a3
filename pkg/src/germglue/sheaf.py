"""Gluing chart-wise sheaf data over a glued atlas.

Locally free mode: per ordered pair a transition matrix g_ij (l_j x l_i,
entries jets in the chart coordinates) on a declared symmetric tube A_ij,
with triple tubes B_ijk inside the pairwise intersections.  Validation
checks the matrix cocycle g_jk * g_ij = g_ik at order K, inverse pairs,
identity diagonals, and a determinant-unit certificate for each g_ij over
its tube.  Gluing finds per-chart radii eps_i whose tubes fit inside the
chart tube and the declared A/B domains, restricts the transitions, and
records the zero-section (fiber = 0) restriction of each matrix.

Presentation mode: modules are given by presentation matrices xi_i; the
pair data supplies psi_ij together with a certificate chi_ij, and only the
identity psi_ij * xi_i = xi_j * chi_ij is verified (lifts are supplied by
the caller, never constructed here).

Chart-wise module homomorphisms glue when g2_ij * Phi_i = Phi_j * g1_ij at
order K on every pair; invertible chart matrices upgrade the result to an
isomorphism certificate.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Optional, Sequence, Tuple

from .errors import (
    AgreementError,
    NotInvertibleError,
    ShapeError,
    ShrinkExhausted,
    ValidationFailure,
)
from .jets import (
    grlex_terms,
    jet_const,
    jet_eval,
    jet_is_zero,
    jet_project,
    jet_scale,
    jet_sub,
    jet_substitute_zero,
)
from .matrices import (
    JetMatrix,
    matrix_det,
    matrix_identity,
    matrix_inverse,
    matrix_mul,
    matrix_sub,
)
from .regions import (
    Polydisc,
    TubeDomain,
    disc_contains,
    disc_lens_outer_candidates,
    range_bound_tube,
)
from .scalars import ONE, ZERO, coeff_abs_lb

Pair = Tuple[object, object]


def _unordered(i, j):
    return tuple(sorted((i, j), key=repr))


def _matrix_first_nonzero(m: JetMatrix):
    for r in range(m.rows):
        for c in range(m.cols):
            if not jet_is_zero(m.entries[r][c]):
                e, v = next(iter(grlex_terms(m.entries[r][c])))
                return r, c, list(e), v
    return None


class SheafInput:
    """Chart-wise sheaf data: ranks, pair matrices on symmetric tubes,
    triple tubes, optional declared base-level (zero-section) transitions,
    optional presentation data (xi per chart, chi per pair)."""

    __slots__ = ("mode", "ranks", "domains", "matrices", "triple_domains",
                 "base_transitions", "presentations", "chi")

    def __init__(
        self,
        ranks: Dict[object, int],
        domains: Dict[Pair, TubeDomain],
        matrices: Dict[Pair, JetMatrix],
        triple_domains: Optional[Dict[tuple, TubeDomain]] = None,
        base_transitions: Optional[Dict[Pair, JetMatrix]] = None,
        presentations: Optional[Dict[object, JetMatrix]] = None,
        chi: Optional[Dict[Pair, JetMatrix]] = None,
    ):
        self.mode = "presentation" if presentations else "locally_free"
        self.ranks = dict(ranks)
        self.matrices = dict(matrices)
        self.base_transitions = dict(base_transitions or {})
        self.presentations = dict(presentations or {})
        self.chi = dict(chi or {})
        canon: Dict[Pair, TubeDomain] = {}
        for (i, j), dom in domains.items():
            key = _unordered(i, j)
            if key in canon:
                prev = canon[key]
                if prev.base != dom.base or prev.fiber_radius != dom.fiber_radius:
                    raise ValidationFailure(
                        f"pair domain for {key!r} is not symmetric: "
                        "A_ij and A_ji differ"
                    )
            else:
                canon[key] = dom
        self.domains = canon
        triples: Dict[tuple, TubeDomain] = {}
        for key, dom in (triple_domains or {}).items():
            skey = tuple(sorted(key, key=repr))
            if skey in triples:
                prev = triples[skey]
                if prev.base != dom.base or prev.fiber_radius != dom.fiber_radius:
                    raise ValidationFailure(
                        f"triple domain for {skey!r} is not symmetric"
                    )
            else:
                triples[skey] = dom
        self.triple_domains = triples

    def domain(self, i, j) -> Optional[TubeDomain]:
        return self.domains.get(_unordered(i, j))


class GluedSheaf:
    __slots__ = ("atlas", "mode", "ranks", "epsilons", "chart_tubes",
                 "pair_tubes", "matrices", "zero_section", "det_bounds", "order")

    def __init__(self, atlas, mode, ranks, epsilons, chart_tubes, pair_tubes,
                 matrices, zero_section, det_bounds, order):
        self.atlas = atlas
        self.mode = mode
        self.ranks = ranks
        self.epsilons = epsilons
        self.chart_tubes = chart_tubes
        self.pair_tubes = pair_tubes
        self.matrices = matrices
        self.zero_section = zero_section
        self.det_bounds = det_bounds
        self.order = order


class GluedMorphism:
    __slots__ = ("epsilons", "domains", "matrices", "isomorphism", "note")

    def __init__(self, epsilons, domains, matrices, isomorphism, note):
        self.epsilons = epsilons
        self.domains = domains
        self.matrices = matrices
        self.isomorphism = isomorphism
        self.note = note


def _det_unit_certificate(g: JetMatrix, tube: TubeDomain, base_dim: int):
    """Lower bound for |det g| on the tube, or None.

    Writes det = c (1 - u) with c the value at the tube's center on the zero
    section; range-bounding u (the reciprocal's denominator deviation) below
    1 certifies the determinant has no zero on the tube."""
    det = matrix_det(g)
    center = tube.base.centers + (ZERO,) * tube.fiber_dim
    c = jet_eval(det, center)
    if c.is_zero():
        return None
    u = jet_scale(jet_sub(jet_const(det.num_vars, det.order, c), det), ONE / c)
    bound = range_bound_tube(u, tube)
    if bound >= 1:
        return None
    return coeff_abs_lb(c) * (1 - bound)


def validate_sheaf_cocycle(inp: SheafInput) -> dict:
    """Shape, symmetry, inverse-pair, cocycle, and determinant checks; in
    presentation mode the lift certificate psi_ij * xi_i = xi_j * chi_ij.

    Returns the report when valid, raises ValidationFailure carrying it
    otherwise."""
    violations: list[dict] = []
    det_bounds: Dict[Pair, Fraction] = {}

    for (i, j), g in sorted(inp.matrices.items(), key=lambda kv: repr(kv[0])):
        li, lj = inp.ranks.get(i), inp.ranks.get(j)
        if li is None or lj is None:
            violations.append({"kind": "shape", "pair": [i, j],
                               "detail": "matrix references unknown chart"})
            continue
        if i == j:
            if g != matrix_identity(li, g.num_vars, g.order):
                violations.append({"kind": "diagonal", "pair": [i, j],
                                   "detail": "diagonal transition is not the identity"})
            continue
        if (g.rows, g.cols) != (lj, li):
            violations.append({"kind": "shape", "pair": [i, j],
                               "detail": f"expected {lj}x{li}, got {g.rows}x{g.cols}"})
            continue
        if inp.domain(i, j) is None:
            violations.append({"kind": "shape", "pair": [i, j],
                               "detail": "missing pair domain A_ij"})

    shape_bad = {tuple(v["pair"]) for v in violations}

    def usable(i, j):
        return (i, j) in inp.matrices and (i, j) not in shape_bad and i != j

    if inp.mode == "locally_free":
        seen = set()
        for (i, j) in sorted(inp.matrices, key=repr):
            if not usable(i, j):
                continue
            if not usable(j, i):
                violations.append({"kind": "inverse_pair", "pair": [i, j],
                                   "detail": "missing reverse matrix"})
                continue
            if (j, i) in seen:
                continue
            seen.add((i, j))
            g, h = inp.matrices[(i, j)], inp.matrices[(j, i)]
            for left, right, rank, pair in (
                (h, g, inp.ranks[i], [i, j]),
                (g, h, inp.ranks[j], [j, i]),
            ):
                residual = matrix_sub(
                    matrix_mul(left, right),
                    matrix_identity(rank, g.num_vars, g.order),
                )
                hit = _matrix_first_nonzero(residual)
                if hit is not None:
                    violations.append({
                        "kind": "inverse_pair", "pair": pair, "entry": hit[:2],
                        "exponent": hit[2], "value": hit[3],
                    })
        for skey, dom in sorted(inp.triple_domains.items(), key=repr):
            for a in range(3):
                i, j, k = skey[a], skey[(a + 1) % 3], skey[(a + 2) % 3]
                for (x, y, z) in ((i, j, k), (i, k, j)):
                    if not (usable(x, y) and usable(y, z) and usable(x, z)):
                        continue
                    residual = matrix_sub(
                        matrix_mul(inp.matrices[(y, z)], inp.matrices[(x, y)]),
                        inp.matrices[(x, z)],
                    )
                    hit = _matrix_first_nonzero(residual)
                    if hit is not None:
                        violations.append({
                            "kind": "cocycle", "triple": [x, y, z],
                            "entry": hit[:2], "exponent": hit[2], "value": hit[3],
                        })
        for (i, j), g in sorted(inp.matrices.items(), key=repr):
            if not usable(i, j):
                continue
            dom = inp.domain(i, j)
            if dom is None:
                continue
            lb = _det_unit_certificate(g, dom, dom.base.dim)
            if lb is None:
                violations.append({"kind": "determinant", "pair": [i, j],
                                   "detail": "no certified nonzero determinant on A_ij"})
            else:
                det_bounds[(i, j)] = lb
    else:
        for (i, j) in sorted(inp.matrices, key=repr):
            if not usable(i, j):
                continue
            xi_i, xi_j = inp.presentations.get(i), inp.presentations.get(j)
            chi = inp.chi.get((i, j))
            if xi_i is None or xi_j is None or chi is None:
                violations.append({"kind": "presentation", "pair": [i, j],
                                   "detail": "missing xi or chi data"})
                continue
            residual = matrix_sub(
                matrix_mul(inp.matrices[(i, j)], xi_i), matrix_mul(xi_j, chi)
            )
            hit = _matrix_first_nonzero(residual)
            if hit is not None:
                violations.append({
                    "kind": "presentation", "pair": [i, j], "entry": hit[:2],
                    "exponent": hit[2], "value": hit[3],
                })

    for (i, j), base_m in sorted(inp.base_transitions.items(), key=repr):
        if not usable(i, j):
            continue
        g = inp.matrices[(i, j)]
        restricted = _zero_section_matrix(g, base_m.num_vars)
        if restricted != base_m:
            hit = _matrix_first_nonzero(matrix_sub(restricted, base_m))
            violations.append({
                "kind": "base_transition", "pair": [i, j],
                "entry": hit[:2] if hit else None,
                "detail": "zero-section restriction differs from declared base data",
            })

    report = {
        "valid": not violations,
        "mode": inp.mode,
        "pairs_checked": sum(1 for (i, j) in inp.matrices if i != j),
        "triples_checked": len(inp.triple_domains),
        "det_lower_bounds": det_bounds,
        "violations": violations,
    }
    if violations:
        raise ValidationFailure(
            f"sheaf validation failed with {len(violations)} violation(s); "
            f"first: {violations[0]}", report=report,
        )
    return report


def _zero_section_matrix(g: JetMatrix, base_dim: int) -> JetMatrix:
    fiber = list(range(base_dim, g.num_vars))
    return JetMatrix([
        [jet_project(jet_substitute_zero(e, fiber), list(range(base_dim)))
         for e in row]
        for row in g.entries
    ])


def _lens_fits(u_i: Polydisc, u_j: Polydisc, target: Polydisc) -> bool:
    """Some sound outer disc of each coordinate lens fits in the target disc
    (vacuously true when a coordinate pair is certifiably disjoint)."""
    for k in range(u_i.dim):
        candidates = disc_lens_outer_candidates(
            u_i.centers[k], u_i.radii[k], u_j.centers[k], u_j.radii[k]
        )
        if candidates is None:
            return True
        if not any(
            disc_contains(c, r, target.centers[k], target.radii[k])
            for c, r in candidates
        ):
            return False
    return True


def _triple_lens_fits(us: Sequence[Polydisc], target: Polydisc) -> bool:
    for k in range(us[0].dim):
        first = disc_lens_outer_candidates(
            us[0].centers[k], us[0].radii[k], us[1].centers[k], us[1].radii[k]
        )
        if first is None:
            return True
        found = False
        for c, r in first:
            nested = disc_lens_outer_candidates(
                c, r, us[2].centers[k], us[2].radii[k]
            )
            if nested is None:
                return True
            if any(
                disc_contains(cc, rr, target.centers[k], target.radii[k])
                for cc, rr in nested
            ):
                found = True
                break
        if not found:
            return False
    return True


def glue_sheaf(inp: SheafInput, atlas, radius_floor=Fraction(1, 2**20)) -> GluedSheaf:
    """Restrict validated sheaf data to certified tubes over the atlas.

    eps_i is the largest certified radius: it must not exceed the atlas
    chart radius, the declared A_ij fiber radii of pairs at i, or the B_ijk
    fiber radii of triples at i; base inclusions of the (outer-bounded)
    pairwise and triple overlaps into the declared domains are certified
    directly and do not depend on eps."""
    report = validate_sheaf_cocycle(inp)
    cover = atlas.cover
    charts = cover.input.charts
    for cid in inp.ranks:
        if cid not in charts:
            raise ShapeError(f"sheaf references unknown chart {cid!r}")

    epsilons: Dict[object, Fraction] = {}
    for cid in sorted(inp.ranks, key=repr):
        eps = cover.radii[cid]
        for key, dom in inp.domains.items():
            if cid not in key or key[0] == key[1]:
                continue
            other = key[0] if key[1] == cid else key[1]
            u_i, u_j = cover.triples[cid].U, cover.triples[other].U
            if not _lens_fits(u_i, u_j, dom.base):
                raise ShrinkExhausted(
                    f"pair overlap {key!r} not certified inside A domain"
                )
            eps = min(eps, dom.fiber_radius)
        for skey, dom in inp.triple_domains.items():
            if cid not in skey:
                continue
            us = [cover.triples[c].U for c in skey]
            if not _triple_lens_fits(us, dom.base):
                raise ShrinkExhausted(
                    f"triple overlap {skey!r} not certified inside B domain"
                )
            eps = min(eps, dom.fiber_radius)
        if eps < radius_floor:
            raise ShrinkExhausted(
                f"no certified radius above the floor for chart {cid!r}"
            )
        epsilons[cid] = eps

    chart_tubes = {
        cid: TubeDomain(cid, cover.triples[cid].U, cover.input.fiber_dim, epsilons[cid])
        for cid in inp.ranks
    }
    pair_tubes: Dict[Pair, TubeDomain] = {}
    zero_section: Dict[Pair, JetMatrix] = {}
    det_bounds: Dict[Pair, Fraction] = {}
    order = None
    base_dim = cover.input.base_dim
    for (i, j), g in inp.matrices.items():
        if i == j:
            continue
        order = g.order if order is None else order
        dom = inp.domain(i, j)
        fiber = min(epsilons[i], epsilons[j], dom.fiber_radius)
        pair_tubes[(i, j)] = TubeDomain(i, dom.base, dom.fiber_dim, fiber)
        zero_section[(i, j)] = _zero_section_matrix(g, base_dim)
        if inp.mode == "locally_free":
            lb = _det_unit_certificate(g, pair_tubes[(i, j)], base_dim)
            if lb is None:
                raise ShrinkExhausted(
                    f"determinant certificate lost on restricted tube {(i, j)!r}"
                )
            det_bounds[(i, j)] = lb

    return GluedSheaf(
        atlas, inp.mode, dict(inp.ranks), epsilons, chart_tubes, pair_tubes,
        dict(inp.matrices), zero_section, det_bounds,
        order if order is not None else cover.input.order,
    )


def glue_sheaf_morphism(
    s1: GluedSheaf,
    s2: GluedSheaf,
    maps: Dict[object, JetMatrix],
) -> GluedMorphism:
    """Glue chart-wise module homomorphisms Phi_i between two glued sheaves
    over the same atlas.

    Requires g2_ij * Phi_i = Phi_j * g1_ij at order K on every pair; a
    nonzero residual raises an agreement error naming the pair and entry.
    All chart matrices invertible over jets yields an isomorphism flag."""
    if set(s1.ranks) != set(s2.ranks):
        raise ShapeError("sheaves must share the chart index set")
    for cid in sorted(s1.ranks, key=repr):
        phi = maps.get(cid)
        if phi is None:
            raise ShapeError(f"missing chart matrix for {cid!r}")
        if (phi.rows, phi.cols) != (s2.ranks[cid], s1.ranks[cid]):
            raise ShapeError(f"chart matrix {cid!r} has wrong shape")

    for (i, j) in sorted(s1.matrices, key=repr):
        if i == j or (i, j) not in s2.matrices:
            continue
        residual = matrix_sub(
            matrix_mul(s2.matrices[(i, j)], maps[i]),
            matrix_mul(maps[j], s1.matrices[(i, j)]),
        )
        hit = _matrix_first_nonzero(residual)
        if hit is not None:
            raise AgreementError(
                f"chart matrices incompatible with transitions on {(i, j)!r}: "
                f"entry {tuple(hit[:2])}, exponent {hit[2]}, value {hit[3]!r}"
            )

    isomorphism = True
    for cid, phi in maps.items():
        if phi.rows != phi.cols:
            isomorphism = False
            continue
        try:
            matrix_inverse(phi)
        except NotInvertibleError:
            isomorphism = False

    epsilons = {cid: min(s1.epsilons[cid], s2.epsilons[cid]) for cid in s1.ranks}
    domains = {
        cid: TubeDomain(
            cid, s1.chart_tubes[cid].base, s1.chart_tubes[cid].fiber_dim,
            epsilons[cid],
        )
        for cid in s1.ranks
    }
    note = (
        "glued morphism determined at the transition order: chart matrices "
        "agreeing on all overlaps restrict to a single global homomorphism"
    )
    return GluedMorphism(epsilons, domains, dict(maps), isomorphism, note)
