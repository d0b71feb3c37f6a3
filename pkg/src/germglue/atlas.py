"""Gluing chart-wise neighbourhood-germ data into a certified atlas.

Input: a finite cover of the base by polydisc charts, and for each ordered
pair a transition map germ along the zero section (a jet-order-K polynomial
map) together with the tube it is declared on.  The pipeline

    validate -> refine_cover -> compute_overlaps -> shrink_tubes
             -> enforce_triple_domains -> check_closed_relation
             -> build_glued_atlas

produces per-chart tubes Q_i, restricted transitions, and certificates:

(a) Q_i relatively compact in O_i = V_i x (fiber space),
(b) U_i x {0} inside Q_i inside U_i x (fiber space),
(c) Q_ij := Q_i ∩ O_ij ∩ phi_ij^{-1}(Q_j) relatively compact in O_ij,
(d) Q_ij ∩ Q_ik inside phi_ij^{-1}(O_jk),
(e) phi_jk ∘ phi_ij = phi_ik on Q_ij ∩ Q_ik at order K,

plus a closed-relation (Hausdorff) certificate.  The sets O_ij and Q_ij are
the mathematical intersections; the artifact carries certified tube bounds
for them (an inner tube witness for O_ij, an outer tube bound for Q_ij), and
every certificate is sound for the true sets.

Certified constructions prefer shrinking to failing: each search is bounded
(fiber radii 1/n for n = 1, 2, 4, ... up to n_max, then geometric halving
down to a radius floor) and raises a shrink-exhausted error naming the
blocking pair or triple when the budget runs out.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Dict, Optional, Sequence, Tuple

from .errors import (
    AgreementError,
    CertificateIncompleteError,
    ShapeError,
    ShrinkExhausted,
    ValidationFailure,
)
from .jets import (
    Jet,
    PolyMap,
    grlex_terms,
    identity_map,
    jet_is_zero,
    jet_sub,
    jet_substitute_zero,
    jet_truncate,
    jet_var,
    map_compose,
    map_eval,
    map_is_constant_free,
    map_sub,
)
from .regions import (
    CoverTriple,
    Polydisc,
    TubeDomain,
    disc_lens_outer_candidates,
    disc_margin,
    map_image_bound,
    point_in_polydisc,
    point_in_tube,
    polydisc_common_point,
    polydisc_contains,
    polydisc_inflate,
    polydisc_intersection_inner,
    polydisc_intersection_outer,
    polydisc_rel_compact,
    range_bound_tube,
    refine_cover,
    tube_contains,
    tube_rel_compact,
)
from .sampling import sample_in_polydisc, sample_in_tube
from .scalars import ZERO, sqrt_lb

N_MAX_DEFAULT = 2**16
RADIUS_FLOOR_DEFAULT = Fraction(1, 2**20)

Pair = Tuple[object, object]
Triple = Tuple[object, object, object]


class GermTransition:
    """Transition germ phi_ij on a declared tube N_ij in chart i."""

    __slots__ = ("i", "j", "domain", "map")

    def __init__(self, i, j, domain: TubeDomain, map: PolyMap):
        self.i = i
        self.j = j
        self.domain = domain
        self.map = map

    def __repr__(self) -> str:
        return f"GermTransition({self.i!r} -> {self.j!r})"


class GermAtlasInput:
    """Chart cover plus pairwise transition germs at truncation order K.

    Diagonal transitions are normalized away: phi_ii is the identity on the
    full tube over W_i, so they are never stored; a supplied diagonal entry
    must be the identity map.
    """

    __slots__ = ("base_dim", "fiber_dim", "order", "charts", "transitions", "base_points")

    def __init__(
        self,
        base_dim: int,
        fiber_dim: int,
        order: int,
        charts: Dict[object, Polydisc],
        transitions: Sequence[GermTransition],
        base_points: Sequence[tuple] = (),
    ):
        if base_dim < 1 or fiber_dim < 1 or order < 1:
            raise ShapeError("need base_dim, fiber_dim, order >= 1")
        self.base_dim = base_dim
        self.fiber_dim = fiber_dim
        self.order = order
        self.charts = dict(charts)
        self.base_points = tuple(tuple(p) for p in base_points)
        stored: Dict[Pair, GermTransition] = {}
        for tr in transitions:
            if tr.i not in self.charts or tr.j not in self.charts:
                raise ShapeError(f"transition references unknown chart: {tr.i!r}/{tr.j!r}")
            if tr.i == tr.j:
                if tr.map != identity_map(base_dim + fiber_dim, order):
                    raise ValidationFailure(
                        f"diagonal transition for chart {tr.i!r} is not the identity"
                    )
                continue
            if (tr.i, tr.j) in stored:
                raise ShapeError(f"duplicate transition {(tr.i, tr.j)!r}")
            stored[(tr.i, tr.j)] = tr
        for chart_id, w in self.charts.items():
            if w.dim != base_dim:
                raise ShapeError(f"chart {chart_id!r} polydisc has wrong dimension")
        self.transitions = stored

    @property
    def total_vars(self) -> int:
        return self.base_dim + self.fiber_dim

    def fiber_indices(self) -> range:
        return range(self.base_dim, self.total_vars)


class OverlapData:
    """Certified tube data for one ordered pair (i, j).

    ``core`` is a polydisc containing the base lens U_i ∩ U_j; ``o_inner``
    (the core inflated by delta, with a certified fiber radius) is a tube
    certified inside the true overlap domain O_ij; ``witness`` is the
    relatively compact witness P, the 0.9-fraction tube between core and
    o_inner.  ``vacuous`` marks pairs whose U-level base overlap is
    certifiably empty."""

    __slots__ = ("i", "j", "vacuous", "core", "delta", "o_inner", "witness", "margins")

    def __init__(self, i, j, vacuous, core, delta, o_inner, witness, margins):
        self.i = i
        self.j = j
        self.vacuous = vacuous
        self.core = core
        self.delta = delta
        self.o_inner = o_inner
        self.witness = witness
        self.margins = margins


class PairCertificate:
    """Condition (c) data for one ordered pair: the search exponent n_ij,
    the certified outer tube bound for Q_ij (None when certified empty), and
    the relative-compactness margin against the O_ij inner tube."""

    __slots__ = ("i", "j", "n", "bound", "margin", "vacuous")

    def __init__(self, i, j, n, bound, margin, vacuous):
        self.i = i
        self.j = j
        self.n = n
        self.bound = bound
        self.margin = margin
        self.vacuous = vacuous


class ShrunkCover:
    __slots__ = ("input", "triples", "overlaps", "n_index", "radii", "tubes",
                 "pairs", "pair_n", "halvings")

    def __init__(self, input, triples, overlaps, n_index, radii, tubes, pairs,
                 pair_n=None, halvings=0):
        self.input = input
        self.triples = triples          # chart id -> CoverTriple
        self.overlaps = overlaps        # (i, j) -> OverlapData
        self.n_index = n_index          # chart id -> n(i)
        self.radii = radii              # chart id -> Fraction r_i
        self.tubes = tubes              # chart id -> TubeDomain Q_i
        self.pairs = pairs              # (i, j) -> PairCertificate
        self.pair_n = pair_n or {}      # (i, j) -> accepted search exponent
        self.halvings = halvings


class TripleCertificate:
    __slots__ = ("triple", "vacuous", "domain_margin", "residual_zero", "remark")

    def __init__(self, triple, vacuous, domain_margin, residual_zero, remark):
        self.triple = triple
        self.vacuous = vacuous
        self.domain_margin = domain_margin
        self.residual_zero = residual_zero
        self.remark = remark


class GluedAtlas:
    __slots__ = (
        "cover",
        "triple_certs",
        "closedness",
        "zero_sections",
        "nerve_pairs",
        "nerve_triples",
        "certificates",
    )

    def __init__(self, cover, triple_certs, closedness, zero_sections,
                 nerve_pairs, nerve_triples, certificates):
        self.cover = cover
        self.triple_certs = triple_certs
        self.closedness = closedness
        self.zero_sections = zero_sections
        self.nerve_pairs = nerve_pairs
        self.nerve_triples = nerve_triples
        self.certificates = certificates


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _first_violation_terms(residual: Jet) -> list[dict]:
    out = []
    for e, c in grlex_terms(residual):
        out.append({"exponent": list(e), "value": c})
    return out


def _zero_section_residuals(inp: GermAtlasInput, f: PolyMap) -> list[tuple[int, Jet]]:
    """Component residuals of phi(t, 0) - (t, 0)."""
    fiber = list(inp.fiber_indices())
    bad = []
    for idx, comp in enumerate(f.components):
        restricted = jet_substitute_zero(comp, fiber)
        if idx < inp.base_dim:
            expected = jet_var(inp.total_vars, inp.order, idx)
            residual = jet_sub(restricted, expected)
        else:
            residual = restricted
        if not jet_is_zero(residual):
            bad.append((idx, residual))
    return bad


def validate_germ_data(inp: GermAtlasInput) -> dict:
    """Check identity-on-zero-section, inverse pairs, and the order-K cocycle
    on every triple with a certified nonempty base overlap.

    Returns the report when everything holds; raises ValidationFailure
    carrying the full report otherwise."""
    violations: list[dict] = []
    ident = identity_map(inp.total_vars, inp.order)

    for (i, j), tr in sorted(inp.transitions.items(), key=lambda kv: repr(kv[0])):
        f = tr.map
        if f.source_vars != inp.total_vars or f.target_vars != inp.total_vars:
            violations.append({"kind": "shape", "pair": [i, j],
                               "detail": "transition has wrong variable count"})
            continue
        if f.order != inp.order:
            violations.append({"kind": "shape", "pair": [i, j],
                               "detail": "transition order differs from atlas order"})
            continue
        if tr.domain.chart != i or tr.domain.base.dim != inp.base_dim \
                or tr.domain.fiber_dim != inp.fiber_dim:
            violations.append({"kind": "shape", "pair": [i, j],
                               "detail": "declared tube does not live in the source chart"})
            continue
        if not map_is_constant_free(f):
            violations.append({"kind": "shape", "pair": [i, j],
                               "detail": "transition has a constant term"})
            continue
        for idx, residual in _zero_section_residuals(inp, f):
            terms = _first_violation_terms(residual)
            violations.append({
                "kind": "zero_section", "pair": [i, j], "component": idx,
                "exponent": terms[0]["exponent"], "value": terms[0]["value"],
            })
        if (j, i) not in inp.transitions:
            violations.append({"kind": "inverse_pair", "pair": [i, j],
                               "detail": "missing reverse transition"})

    shape_bad = {tuple(v["pair"]) for v in violations if v["kind"] == "shape"}

    def usable(i, j):
        return (i, j) in inp.transitions and (i, j) not in shape_bad

    seen_pairs = set()
    for (i, j) in sorted(inp.transitions, key=repr):
        if not usable(i, j) or not usable(j, i) or (j, i) in seen_pairs:
            continue
        seen_pairs.add((i, j))
        composed = map_compose(inp.transitions[(i, j)].map, inp.transitions[(j, i)].map)
        residual = map_sub(composed, ident)
        for idx, comp in enumerate(residual.components):
            if not jet_is_zero(comp):
                terms = _first_violation_terms(comp)
                violations.append({
                    "kind": "inverse_pair", "pair": [i, j], "component": idx,
                    "exponent": terms[0]["exponent"], "value": terms[0]["value"],
                })

    cocycle_checked = 0
    cocycle_skipped = []
    chart_ids = sorted(inp.charts, key=repr)
    for i in chart_ids:
        for j in chart_ids:
            for k in chart_ids:
                if len({i, j, k}) != 3:
                    continue
                witness = polydisc_common_point(
                    [inp.charts[i], inp.charts[j], inp.charts[k]]
                )
                if witness is None:
                    continue
                if not (usable(i, j) and usable(j, k)):
                    continue
                if not usable(i, k):
                    violations.append({
                        "kind": "cocycle", "triple": [i, j, k],
                        "detail": "missing transition (i,k) over a nonempty triple overlap",
                    })
                    continue
                composed = map_compose(
                    inp.transitions[(i, j)].map, inp.transitions[(j, k)].map
                )
                residual = map_sub(composed, inp.transitions[(i, k)].map)
                cocycle_checked += 1
                for idx, comp in enumerate(residual.components):
                    if not jet_is_zero(comp):
                        terms = _first_violation_terms(comp)
                        violations.append({
                            "kind": "cocycle", "triple": [i, j, k], "component": idx,
                            "exponent": terms[0]["exponent"], "value": terms[0]["value"],
                        })

    report = {
        "valid": not violations,
        "order": inp.order,
        "transitions_checked": len(inp.transitions),
        "cocycle_triples_checked": cocycle_checked,
        "cocycle_triples_skipped": cocycle_skipped,
        "violations": violations,
    }
    if violations:
        first = violations[0]
        raise ValidationFailure(
            f"germ data validation failed with {len(violations)} violation(s); "
            f"first: {first}", report=report,
        )
    return report


# ---------------------------------------------------------------------------
# overlap domains
# ---------------------------------------------------------------------------


def _base_escape_components(inp: GermAtlasInput, f: PolyMap) -> list[Jet]:
    """E_k = base component k of f minus the coordinate t_k."""
    return [
        jet_sub(f.components[k], jet_var(inp.total_vars, inp.order, k))
        for k in range(inp.base_dim)
    ]


def _witness_base(u_i: Polydisc, u_j: Polydisc, v_i: Polydisc, v_j: Polydisc):
    """Per-coordinate outer lens disc of (U_i, U_j), with its certified
    margin inside both V discs.  Returns (polydisc, delta) or a reason.

    Each coordinate picks, among the sound outer-disc candidates for the
    U-lens, the one with the largest certified margin into both V discs
    (chord disc preferred on ties: the shrunk pair bounds converge to it)."""
    centers, radii, margins = [], [], []
    for ci, ri, cj, rj, cvi, rvi, cvj, rvj in zip(
        u_i.centers, u_i.radii, u_j.centers, u_j.radii,
        v_i.centers, v_i.radii, v_j.centers, v_j.radii,
    ):
        candidates = disc_lens_outer_candidates(ci, ri, cj, rj)
        if candidates is None:
            return None, "empty"
        best = None
        for c, r in candidates:
            m1 = disc_margin(c, r, cvi, rvi)
            m2 = disc_margin(c, r, cvj, rvj)
            if m1 is None or m2 is None:
                continue
            m = min(m1, m2)
            if best is None or m > best[2]:
                best = (c, r, m)
        if best is None:
            return None, "witness disc not certified inside the V overlap"
        centers.append(best[0])
        radii.append(best[1])
        margins.append(best[2])
    return (Polydisc(centers, radii), min(margins) / 2), None


def compute_overlaps(
    inp: GermAtlasInput,
    triples: Dict[object, CoverTriple],
    radius_floor: Fraction = RADIUS_FLOOR_DEFAULT,
) -> Dict[Pair, OverlapData]:
    """Certified inner tube approximations of the overlap domains O_ij.

    For each ordered pair with a transition and a nonempty certified V-level
    base overlap, builds a tube (core polydisc around the U-level lens,
    inflated by a margin delta, with fiber radius rho) certified to lie in
    O_ij: inside the V overlap, inside the declared tube N_ij, and mapped by
    phi_ij into the V overlap (base-escape range bounds at most delta).
    Also fixes the relatively compact witness P (fraction 0.9 of the margin
    layer and fiber)."""
    overlaps: Dict[Pair, OverlapData] = {}
    for (i, j), tr in inp.transitions.items():
        u_i, v_i = triples[i].U, triples[i].V
        u_j, v_j = triples[j].U, triples[j].V
        if polydisc_intersection_outer(v_i, v_j) is None:
            continue  # V-level overlap certifiably empty: no pair domain
        built, reason = _witness_base(u_i, u_j, v_i, v_j)
        if built is None:
            if reason == "empty":
                overlaps[(i, j)] = OverlapData(
                    i, j, True, None, None, None, None, {}
                )
                continue
            raise ShrinkExhausted(
                f"pair {(i, j)!r}: {reason}"
            )
        core, delta = built
        # the inflated core must also fit the declared base of N_ij
        while not polydisc_contains(polydisc_inflate(core, delta), tr.domain.base):
            delta = delta / 2
            if delta < radius_floor:
                raise ShrinkExhausted(
                    f"pair {(i, j)!r}: witness base does not fit inside the "
                    "declared transition tube"
                )
        inflated = polydisc_inflate(core, delta)
        escape = _base_escape_components(inp, tr.map)
        rho = tr.domain.fiber_radius
        while True:
            probe = TubeDomain(i, inflated, inp.fiber_dim, rho)
            etas = [range_bound_tube(e, probe) for e in escape]
            if max(etas, default=Fraction(0)) <= delta:
                break
            rho = rho / 2
            if rho < radius_floor:
                raise ShrinkExhausted(
                    f"pair {(i, j)!r}: no certified fiber radius keeps the "
                    "base image inside the V overlap (empty certified inner tube)"
                )
        o_inner = TubeDomain(i, inflated, inp.fiber_dim, rho)
        witness = TubeDomain(
            i,
            polydisc_inflate(core, delta * Fraction(9, 10)),
            inp.fiber_dim,
            rho * Fraction(9, 10),
        )
        margins = {
            "witness_base": delta / 10,
            "witness_fiber": rho / 10,
        }
        overlaps[(i, j)] = OverlapData(i, j, False, core, delta, o_inner, witness, margins)
    return overlaps


# ---------------------------------------------------------------------------
# shrinking (condition (c))
# ---------------------------------------------------------------------------


def _pair_outer_bound(
    inp: GermAtlasInput,
    triples: Dict[object, CoverTriple],
    overlaps: Dict[Pair, OverlapData],
    i,
    j,
    fiber_radius: Fraction,
) -> Optional[TubeDomain]:
    """Certified outer tube bound for Q_i(f) ∩ O_ij ∩ phi_ij^{-1}(Q_j(f)),
    where f = fiber_radius bounds the Q_i fiber; None when the set is
    certified empty.

    Stages: a coarse bound from Q_i ⊆ U_i x ball and O_ij ⊆ N_ij, then a
    base refinement pulling the phi-preimage constraint back through a
    base-escape range bound.  Each refined coordinate picks, among the sound
    outer-disc candidates, the one sitting deepest inside the pair's witness
    disc (all candidates are outer bounds, so any choice is sound)."""
    tr = inp.transitions[(i, j)]
    u_i, u_j = triples[i].U, triples[j].U
    coarse_base = polydisc_intersection_outer(u_i, triples[j].V)
    if coarse_base is None:
        return None
    coarse_base = polydisc_intersection_outer(coarse_base, tr.domain.base)
    if coarse_base is None:
        return None
    fiber = min(fiber_radius, tr.domain.fiber_radius)
    coarse = TubeDomain(i, coarse_base, inp.fiber_dim, fiber)
    escape = _base_escape_components(inp, tr.map)
    etas = [range_bound_tube(e, coarse) for e in escape]
    data = overlaps.get((i, j))
    witness_base = None if data is None or data.vacuous else data.witness.base
    centers, radii = [], []
    for k in range(inp.base_dim):
        candidates = disc_lens_outer_candidates(
            u_i.centers[k], u_i.radii[k],
            u_j.centers[k], u_j.radii[k] + etas[k],
        )
        if candidates is None:
            return None
        chosen = None
        if witness_base is not None:
            best = None
            for c, r in candidates:
                m = disc_margin(c, r, witness_base.centers[k], witness_base.radii[k])
                if m is not None and (best is None or m > best[2]):
                    best = (c, r, m)
            if best is not None:
                chosen = (best[0], best[1])
        if chosen is None:
            chosen = min(candidates, key=lambda cr: cr[1])
        centers.append(chosen[0])
        radii.append(chosen[1])
    return TubeDomain(i, Polydisc(centers, radii), inp.fiber_dim, fiber)


def shrink_tubes(
    inp: GermAtlasInput,
    triples: Dict[object, CoverTriple],
    overlaps: Dict[Pair, OverlapData],
    n_max: int = N_MAX_DEFAULT,
) -> ShrunkCover:
    """Find fiber radii r_i = 1/n(i) so that every pair satisfies (c).

    Per pair the search runs n = 1, 2, 4, ... up to n_max, accepting the
    first n whose certified outer bound for Q_ij lands inside the witness P
    (or is certified empty); then n(i) is the maximum over the pairs at i,
    which preserves every accepted inclusion (the bounds shrink with n)."""
    n_pair: Dict[Pair, int] = {}
    for (i, j), data in overlaps.items():
        n = 1
        while True:
            bound = _pair_outer_bound(inp, triples, overlaps, i, j, Fraction(1, n))
            if bound is None:
                n_pair[(i, j)] = n
                break
            if not data.vacuous and tube_contains(bound, data.witness):
                n_pair[(i, j)] = n
                break
            if n >= n_max:
                raise ShrinkExhausted(
                    f"pair {(i, j)!r} not certified at n_max = {n_max}"
                )
            n *= 2

    n_index = {cid: 1 for cid in inp.charts}
    for (i, j), n in n_pair.items():
        n_index[i] = max(n_index[i], n)
    radii = {cid: Fraction(1, n) for cid, n in n_index.items()}
    tubes = {
        cid: TubeDomain(cid, triples[cid].U, inp.fiber_dim, radii[cid])
        for cid in inp.charts
    }
    cover = ShrunkCover(inp, triples, overlaps, n_index, radii, tubes, {}, dict(n_pair))
    while True:
        blocking = _refresh_pair_certificates(cover)
        if blocking is None:
            return cover
        i = blocking[0]
        if cover.n_index[i] * 2 > n_max:
            raise ShrinkExhausted(
                f"pair {blocking!r} not certified at n_max = {n_max}"
            )
        _set_chart_n(cover, i, cover.n_index[i] * 2)


def _set_chart_n(cover: ShrunkCover, cid, n: int) -> None:
    cover.n_index[cid] = n
    cover.radii[cid] = Fraction(1, n)
    cover.tubes[cid] = TubeDomain(
        cid, cover.triples[cid].U, cover.input.fiber_dim, cover.radii[cid]
    )


def _refresh_pair_certificates(cover: ShrunkCover) -> Optional[Pair]:
    """Recompute every pair bound at the current radii.  Returns the first
    pair whose (c) margin cannot be re-certified (the caller shrinks that
    chart further and retries: the bounds converge onto the witness core as
    the fiber radius drops), or None when all certificates hold."""
    inp = cover.input
    pairs: Dict[Pair, PairCertificate] = {}
    for (i, j), data in cover.overlaps.items():
        bound = _pair_outer_bound(
            inp, cover.triples, cover.overlaps, i, j, cover.radii[i]
        )
        if bound is None:
            pairs[(i, j)] = PairCertificate(i, j, cover.pair_n.get((i, j)), None, None, True)
            continue
        if data.vacuous:
            return (i, j)
        margin = tube_rel_compact(bound, data.o_inner)
        if margin is None or margin <= 0 or not tube_contains(bound, data.witness):
            return (i, j)
        pairs[(i, j)] = PairCertificate(i, j, cover.pair_n.get((i, j)), bound, margin, False)
    cover.pairs = pairs
    return None


def chart_certificates(cover: ShrunkCover) -> dict:
    """(a) and (b) per chart: the base margin U_i inside V_i (the fiber space
    is unconstrained, so the base margin is the binding one), and the
    positive fiber radius with base equality for (b)."""
    out = {}
    for cid, tube in cover.tubes.items():
        margin = polydisc_rel_compact(cover.triples[cid].U, cover.triples[cid].V)
        if margin is None:
            raise CertificateIncompleteError(f"chart {cid!r}: (a) margin missing")
        out[cid] = {
            "a_base_margin": margin,
            "b_fiber_radius": cover.radii[cid],
            "n": cover.n_index[cid],
        }
    return out


# ---------------------------------------------------------------------------
# triple enforcement (conditions (d) and (e))
# ---------------------------------------------------------------------------


def _bound_for(cover: ShrunkCover, i, j) -> Optional[TubeDomain]:
    """Outer bound for Q_ij; for j == i this is Q_i itself (Q_ii = Q_i)."""
    if i == j:
        return cover.tubes[i]
    cert = cover.pairs.get((i, j))
    return None if cert is None else cert.bound


def _cocycle_residual(inp: GermAtlasInput, i, j, k) -> PolyMap:
    left = map_compose(inp.transitions[(i, j)].map, inp.transitions[(j, k)].map) \
        if k != i else map_compose(inp.transitions[(i, j)].map, inp.transitions[(j, i)].map)
    right = inp.transitions[(i, k)].map if k != i else identity_map(inp.total_vars, inp.order)
    return map_sub(left, right)


def enforce_triple_domains(
    cover: ShrunkCover,
    radius_floor: Fraction = RADIUS_FLOOR_DEFAULT,
) -> Dict[Triple, TripleCertificate]:
    """Shrink per-chart radii (geometric halving) until condition (d) is
    certified for every triple (i, j, k) with i != j, j != k, and attach the
    symbolic (e) certificate plus the derived stronger inclusion.

    Triples with j == k or i == j hold by the definitions of Q_ij and (c),
    so only the remaining ones are enforced; that includes (i, j, i), whose
    condition reads Q_ij ⊆ phi_ij^{-1}(O_ji)."""
    inp = cover.input
    chart_ids = sorted(inp.charts, key=repr)
    work: list[Triple] = []
    for i in chart_ids:
        for j in chart_ids:
            if i == j or (i, j) not in inp.transitions:
                continue
            for k in chart_ids:
                if k == j:
                    continue
                if k != i and ((i, k) not in inp.transitions):
                    continue
                work.append((i, j, k))

    certs: Dict[Triple, TripleCertificate] = {}
    guard = 0
    while True:
        blocking = None
        for (i, j, k) in work:
            t_ij = _bound_for(cover, i, j)
            t_ik = _bound_for(cover, i, k)
            if t_ij is None or t_ik is None:
                certs[(i, j, k)] = TripleCertificate((i, j, k), True, None, True, "vacuous")
                continue
            base = polydisc_intersection_outer(t_ij.base, t_ik.base)
            if base is None:
                certs[(i, j, k)] = TripleCertificate((i, j, k), True, None, True, "vacuous")
                continue
            target_pair = (j, k) if k != i else (j, i)
            target = cover.overlaps.get(target_pair)
            if target is None or target.vacuous:
                blocking = (i, j, k, "no certified overlap domain O_jk for the image")
                break
            gauge = TubeDomain(i, base, inp.fiber_dim, min(t_ij.fiber_radius, t_ik.fiber_radius))
            image = map_image_bound(
                inp.transitions[(i, j)].map, gauge, inp.base_dim, target_chart=j
            )
            if not tube_contains(image, target.o_inner):
                blocking = (i, j, k, "image bound escapes O_jk")
                break
            margin = tube_rel_compact(image, target.o_inner)
            residual = _cocycle_residual(inp, i, j, k)
            residual_zero = all(jet_is_zero(c) for c in residual.components)
            if not residual_zero:
                raise ValidationFailure(
                    f"triple {(i, j, k)!r}: cocycle residual nonzero at order "
                    f"{inp.order} on a nonempty triple domain"
                )
            certs[(i, j, k)] = TripleCertificate(
                (i, j, k),
                False,
                margin,
                True,
                "derived from (d), (e) and the definitions of Q_ij, Q_jk",
            )
        if blocking is None:
            break
        i, j, k, why = blocking
        shrink_target = i
        while True:
            if cover.radii[shrink_target] / 2 < radius_floor:
                raise ShrinkExhausted(
                    f"triple {(i, j, k)!r}: {why}; radius floor {radius_floor} reached"
                )
            cover.halvings += 1
            _set_chart_n(cover, shrink_target, cover.n_index[shrink_target] * 2)
            lost = _refresh_pair_certificates(cover)
            if lost is None:
                break
            shrink_target = lost[0]
        certs.clear()
        guard += 1
        if guard > 200:
            raise ShrinkExhausted("triple enforcement did not stabilize")
    return certs


# ---------------------------------------------------------------------------
# closedness / Hausdorff certificate
# ---------------------------------------------------------------------------


def _exact_point_in_q_pair(cover: ShrunkCover, i, j, x) -> bool:
    """Certified membership of x in Q_ij = Q_i ∩ O_ij ∩ phi_ij^{-1}(Q_j):
    exact for the Q parts, via the certified inner tube for the O part."""
    inp = cover.input
    if not point_in_tube(x, cover.tubes[i], strict=True):
        return False
    data = cover.overlaps.get((i, j))
    if data is None or data.vacuous or not point_in_tube(x, data.o_inner, strict=True):
        return False
    image = map_eval(inp.transitions[(i, j)].map, x)
    return point_in_tube(image, cover.tubes[j], strict=True)


def check_closed_relation(
    cover: ShrunkCover,
    samples: int = 200,
    seed: int = 0,
) -> dict:
    """Closedness of the gluing relation: guaranteed by the positive (c)
    margins (relative compactness of each overlap graph); additionally runs
    a seeded separation audit on sampled non-equivalent point pairs."""
    margins = []
    for (i, j), cert in cover.pairs.items():
        if cert.vacuous:
            continue
        if cert.margin is None or cert.margin <= 0:
            raise CertificateIncompleteError(
                f"pair {(i, j)!r} lacks a positive (c) margin"
            )
        margins.append(cert.margin)
    rng = random.Random(seed)
    inp = cover.input
    pairs = [pk for pk, cert in cover.pairs.items() if not cert.vacuous]
    audited = separated = skipped = 0
    min_separation: Optional[Fraction] = None
    if pairs:
        for _ in range(samples):
            i, j = pairs[rng.randrange(len(pairs))]
            x = sample_in_tube(rng, cover.tubes[i])
            y = sample_in_tube(rng, cover.tubes[j])
            if not _exact_point_in_q_pair(cover, i, j, x):
                skipped += 1
                continue
            partner = map_eval(inp.transitions[(i, j)].map, x)
            gaps = [(yc - pc).abs2() for yc, pc in zip(y, partner)]
            gap = max(gaps)
            audited += 1
            if gap == 0:
                continue  # sampled an equivalent pair: nothing to separate
            separated += 1
            sep = sqrt_lb(gap)
            if sep > 0:
                min_separation = sep if min_separation is None else min(min_separation, sep)
    return {
        "closed": True,
        "margin": min(margins) if margins else None,
        "audit": {
            "samples": samples,
            "audited": audited,
            "separated": separated,
            "skipped": skipped,
            "min_separation": min_separation,
        },
    }


# ---------------------------------------------------------------------------
# assembling the atlas
# ---------------------------------------------------------------------------


def zero_section_map(base_dim: int, fiber_dim: int, order: int) -> PolyMap:
    """The embedding t -> (t, 0) of the base into a chart tube."""
    comps = [jet_var(base_dim, order, k) for k in range(base_dim)]
    comps += [Jet(base_dim, order, {}) for _ in range(fiber_dim)]
    return PolyMap(base_dim, comps)


def cover_nerve(discs: Dict[object, Polydisc]) -> tuple[list, list]:
    """Pairs and triples of the cover with a certified common point."""
    ids = sorted(discs, key=repr)
    pairs = []
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            if polydisc_common_point([discs[ids[a]], discs[ids[b]]]) is not None:
                pairs.append((ids[a], ids[b]))
    triples = []
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            for c in range(b + 1, len(ids)):
                if polydisc_common_point(
                    [discs[ids[a]], discs[ids[b]], discs[ids[c]]]
                ) is not None:
                    triples.append((ids[a], ids[b], ids[c]))
    return pairs, triples


def build_glued_atlas(
    cover: ShrunkCover,
    triple_certs: Dict[Triple, TripleCertificate],
    closedness: dict,
) -> GluedAtlas:
    """Assemble the glued atlas from the certified cover.

    Refuses to glue when any certificate is missing.  The zero-section
    restriction is the U-cover itself, so its nerve is recomputed and
    compared with the input cover's nerve."""
    if not closedness.get("closed"):
        raise CertificateIncompleteError("closedness certificate missing")
    for (i, j), cert in cover.pairs.items():
        if not cert.vacuous and (cert.margin is None or cert.margin <= 0):
            raise CertificateIncompleteError(f"pair {(i, j)!r} margin missing")
    inp = cover.input
    for key in list(inp.transitions):
        if key not in cover.pairs and key in cover.overlaps:
            raise CertificateIncompleteError(f"pair {key!r} certificate missing")

    zero_sections = {
        cid: zero_section_map(inp.base_dim, inp.fiber_dim, inp.order)
        for cid in inp.charts
    }
    u_cover = {cid: cover.triples[cid].U for cid in inp.charts}
    nerve_pairs, nerve_triples = cover_nerve(u_cover)

    inverse_ok = True
    ident = identity_map(inp.total_vars, inp.order)
    for (i, j) in inp.transitions:
        if (j, i) in inp.transitions:
            composed = map_compose(
                inp.transitions[(i, j)].map, inp.transitions[(j, i)].map
            )
            if composed != ident:
                inverse_ok = False
    certificates = {
        "cocycle_order": inp.order,
        "hausdorff": {
            "holds": True,
            "margin": closedness.get("margin"),
            "basis": "closed relation (relative compactness of overlap graphs) "
                     "plus the equivalence-relation certificate",
        },
        "equivalence_relation": {
            "reflexive": "Q_ii = Q_i with the identity transition (normalized)",
            "symmetric": inverse_ok,
            "transitive_basis": "(d) and (e) on all certified triples",
        },
        "halvings": cover.halvings,
    }
    return GluedAtlas(
        cover, triple_certs, closedness, zero_sections,
        nerve_pairs, nerve_triples, certificates,
    )


def run_glue_pipeline(
    inp: GermAtlasInput,
    n_max: int = N_MAX_DEFAULT,
    radius_floor: Fraction = RADIUS_FLOOR_DEFAULT,
    samples: int = 200,
    seed: int = 0,
) -> tuple[dict, GluedAtlas]:
    """validate -> refine -> overlaps -> shrink -> triples -> closedness -> atlas."""
    report = validate_germ_data(inp)
    triple_list = refine_cover(
        [inp.charts[cid] for cid in sorted(inp.charts, key=repr)], inp.base_points
    )
    triples = dict(zip(sorted(inp.charts, key=repr), triple_list))
    overlaps = compute_overlaps(inp, triples, radius_floor)
    cover = shrink_tubes(inp, triples, overlaps, n_max)
    triple_certs = enforce_triple_domains(cover, radius_floor)
    closedness = check_closed_relation(cover, samples=samples, seed=seed)
    atlas = build_glued_atlas(cover, triple_certs, closedness)
    return report, atlas


# ---------------------------------------------------------------------------
# sampling audits
# ---------------------------------------------------------------------------


def audit_cover_certificates(
    cover: ShrunkCover,
    triple_certs: Dict[Triple, TripleCertificate],
    samples: int = 1000,
    seed: int = 0,
) -> dict:
    """Independent re-verification of (a)-(e) on sampled points.

    Every sampled point of each certified inner set must land in the
    corresponding outer set; (e) compares evaluations of the order-K
    composite jet against the direct transition jet, which must agree
    exactly for validated input."""
    inp = cover.input
    rng = random.Random(seed)
    counts = {"a": 0, "b": 0, "c": 0, "d": 0, "e": 0}
    violations = {"a": 0, "b": 0, "c": 0, "d": 0, "e": 0}

    chart_ids = sorted(inp.charts, key=repr)
    live_pairs = [pk for pk, c in cover.pairs.items() if not c.vacuous]
    live_triples = [tc.triple for tc in triple_certs.values() if not tc.vacuous]
    composites = {}
    for (i, j, k) in live_triples:
        composites[(i, j, k)] = map_compose(
            inp.transitions[(i, j)].map,
            inp.transitions[(j, k)].map if k != i else inp.transitions[(j, i)].map,
        )

    for _ in range(samples):
        cid = chart_ids[rng.randrange(len(chart_ids))]
        tube = cover.tubes[cid]
        x = sample_in_tube(rng, tube)
        counts["a"] += 1
        if not point_in_polydisc(x[: inp.base_dim], cover.triples[cid].V, strict=True):
            violations["a"] += 1
        counts["b"] += 1
        base = sample_in_polydisc(rng, cover.triples[cid].U)
        zero_point = base + (ZERO,) * inp.fiber_dim
        if not point_in_tube(zero_point, tube, strict=False) \
                or not point_in_polydisc(x[: inp.base_dim], cover.triples[cid].U, strict=True):
            violations["b"] += 1

        if live_pairs:
            i, j = live_pairs[rng.randrange(len(live_pairs))]
            cert = cover.pairs[(i, j)]
            y = sample_in_tube(rng, cert.bound)
            if _exact_point_in_q_pair(cover, i, j, y):
                counts["c"] += 1
                data = cover.overlaps[(i, j)]
                if not (point_in_tube(y, data.witness, strict=False)
                        and point_in_tube(y, data.o_inner, strict=True)):
                    violations["c"] += 1

        if live_triples:
            i, j, k = live_triples[rng.randrange(len(live_triples))]
            t_ij = _bound_for(cover, i, j)
            t_ik = _bound_for(cover, i, k)
            base_polydisc = polydisc_intersection_inner(t_ij.base, t_ik.base)
            if base_polydisc is not None:
                probe = TubeDomain(
                    i, base_polydisc, inp.fiber_dim,
                    min(t_ij.fiber_radius, t_ik.fiber_radius),
                )
                y = sample_in_tube(rng, probe)
                in_ij = _exact_point_in_q_pair(cover, i, j, y)
                in_ik = True if k == i else _exact_point_in_q_pair(cover, i, k, y)
                if in_ij and in_ik:
                    counts["d"] += 1
                    target = cover.overlaps[(j, k) if k != i else (j, i)]
                    image = map_eval(inp.transitions[(i, j)].map, y)
                    if not point_in_tube(image, target.o_inner, strict=False):
                        violations["d"] += 1
                    counts["e"] += 1
                    lhs = map_eval(composites[(i, j, k)], y)
                    rhs = map_eval(
                        inp.transitions[(i, k)].map, y
                    ) if k != i else y
                    if any(not (a - b).is_zero() for a, b in zip(lhs, rhs)):
                        violations["e"] += 1

    return {"samples": samples, "checked": counts, "violations": violations}


def audit_transitivity(
    cover: ShrunkCover,
    chains: int = 1000,
    seed: int = 0,
) -> dict:
    """Sampled transitivity: for chains x ~ y ~ z built from exact transition
    evaluations, verify z equals the direct transition of x exactly.

    Sound for inputs whose transitions satisfy the cocycle exactly as
    polynomial maps (the jets then evaluate as the maps themselves)."""
    inp = cover.input
    rng = random.Random(seed)
    live = [
        (i, j, k)
        for (i, j) in cover.pairs
        for k in sorted(inp.charts, key=repr)
        if not cover.pairs[(i, j)].vacuous
        and k != j and k != i
        and (j, k) in cover.pairs and not cover.pairs[(j, k)].vacuous
        and (i, k) in inp.transitions
    ]
    if not live:
        return {"chains_requested": chains, "chains_verified": 0, "violations": 0}
    verified = violations = attempts = 0
    max_attempts = chains * 200
    while verified < chains and attempts < max_attempts:
        attempts += 1
        i, j, k = live[rng.randrange(len(live))]
        x = sample_in_tube(rng, cover.pairs[(i, j)].bound)
        if not _exact_point_in_q_pair(cover, i, j, x):
            continue
        y = map_eval(inp.transitions[(i, j)].map, x)
        if not _exact_point_in_q_pair(cover, j, k, y):
            continue
        z = map_eval(inp.transitions[(j, k)].map, y)
        direct = map_eval(inp.transitions[(i, k)].map, x)
        verified += 1
        if any(not (a - b).is_zero() for a, b in zip(z, direct)):
            violations += 1
    return {
        "chains_requested": chains,
        "chains_verified": verified,
        "violations": violations,
        "attempts": attempts,
    }


# ---------------------------------------------------------------------------
# gluing chart-wise maps
# ---------------------------------------------------------------------------


class GluedMap:
    __slots__ = ("epsilons", "domains", "maps", "note")

    def __init__(self, epsilons, domains, maps, note):
        self.epsilons = epsilons
        self.domains = domains
        self.maps = maps
        self.note = note


def glue_chartwise_maps(
    atlas1: GluedAtlas,
    atlas2: GluedAtlas,
    maps: Dict[object, PolyMap],
    radius_floor: Fraction = RADIUS_FLOOR_DEFAULT,
) -> GluedMap:
    """Glue per-chart maps psi_i (identity on the zero section) between two
    glued atlases over the same chart index set.

    Agreement on overlaps is the order-K germ identity
    psi_j ∘ phi1_ij = phi2_ij ∘ psi_i; a nonzero residual raises an
    agreement error naming the pair, component, and first coefficient.
    Output radii eps_i satisfy: the eps_i-tube over U_i sits inside the
    declared domain Q_i of psi_i, and the restricted overlap bounds map into
    the target's certified O_ij inner tubes."""
    inp1 = atlas1.cover.input
    inp2 = atlas2.cover.input
    if set(inp1.charts) != set(inp2.charts):
        raise ShapeError("atlases must share the chart index set")
    if (inp1.base_dim, inp1.fiber_dim) != (inp2.base_dim, inp2.fiber_dim):
        raise ShapeError("atlases must share base and fiber dimensions")
    order = min(inp1.order, inp2.order)
    for cid in inp1.charts:
        if cid not in maps:
            raise ShapeError(f"missing chart map for {cid!r}")
        psi = maps[cid]
        if psi.source_vars != inp1.total_vars or psi.target_vars != inp2.total_vars:
            raise ShapeError(f"chart map {cid!r} has wrong variable counts")
        bad = _zero_section_residuals(inp1, psi)
        if bad:
            idx, residual = bad[0]
            terms = _first_violation_terms(residual)
            raise ValidationFailure(
                f"chart map {cid!r} is not the identity on the zero section "
                f"(component {idx}, exponent {terms[0]['exponent']})"
            )

    def trunc(m: PolyMap) -> PolyMap:
        if m.order == order:
            return m
        return PolyMap(m.source_vars, [jet_truncate(c, order) for c in m.components])

    for (i, j) in sorted(inp1.transitions, key=repr):
        if (i, j) not in inp2.transitions:
            raise ShapeError(f"target atlas lacks transition {(i, j)!r}")
        lhs = map_compose(trunc(inp1.transitions[(i, j)].map), trunc(maps[j]))
        rhs = map_compose(trunc(maps[i]), trunc(inp2.transitions[(i, j)].map))
        residual = map_sub(lhs, rhs)
        for idx, comp in enumerate(residual.components):
            if not jet_is_zero(comp):
                terms = _first_violation_terms(comp)
                raise AgreementError(
                    f"chart maps disagree on overlap {(i, j)!r}: component {idx}, "
                    f"exponent {terms[0]['exponent']}, value {terms[0]['value']!r}"
                )

    epsilons: Dict[object, Fraction] = {}
    domains: Dict[object, TubeDomain] = {}
    for cid in sorted(inp1.charts, key=repr):
        eps = atlas1.cover.radii[cid]
        while True:
            ok = eps <= atlas1.cover.radii[cid]
            if ok:
                for (i, j), cert in atlas1.cover.pairs.items():
                    if i != cid or cert.vacuous or cert.bound is None:
                        continue
                    probe = TubeDomain(
                        cid, cert.bound.base, inp1.fiber_dim,
                        min(eps, cert.bound.fiber_radius),
                    )
                    image = map_image_bound(maps[cid], probe, inp1.base_dim, target_chart=cid)
                    target = atlas2.cover.overlaps.get((i, j))
                    if target is None or target.vacuous \
                            or not tube_contains(image, target.o_inner):
                        ok = False
                        break
            if ok:
                break
            eps = eps / 2
            if eps < radius_floor:
                raise ShrinkExhausted(
                    f"no certified radius for chart map {cid!r} above the floor"
                )
        epsilons[cid] = eps
        domains[cid] = TubeDomain(cid, atlas1.cover.triples[cid].U, inp1.fiber_dim, eps)

    note = (
        f"glued map determined at order {order}: any family agreeing with the "
        "chart maps as order-K germs along the zero section restricts to the "
        "same map on these tubes"
    )
    return GluedMap(epsilons, domains, dict(maps), note)
