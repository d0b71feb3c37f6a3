"""Atlas gluing pipeline: validation, shrinking, certificates, map gluing."""

from __future__ import annotations

from fractions import Fraction

import pytest

from germglue.atlas import (
    GermAtlasInput,
    GermTransition,
    audit_cover_certificates,
    audit_transitivity,
    build_glued_atlas,
    check_closed_relation,
    compute_overlaps,
    enforce_triple_domains,
    glue_chartwise_maps,
    run_glue_pipeline,
    shrink_tubes,
    validate_germ_data,
    zero_section_map,
)
from germglue.errors import (
    AgreementError,
    CoverageLossError,
    ShrinkExhausted,
    ValidationFailure,
)
from germglue.jets import (
    PolyMap,
    identity_map,
    jet_from_terms,
    map_compose,
    map_inverse,
)
from germglue.regions import Polydisc, TubeDomain
from germglue.scalars import Coeff

F = Fraction


def disc_chart(center: Fraction, radius: Fraction = F(1)) -> Polydisc:
    return Polydisc([Coeff(center)], [radius])


def full_tube(chart_id, w: Polydisc) -> TubeDomain:
    return TubeDomain(chart_id, w, 1, F(1))


def identity_atlas(order: int = 3) -> GermAtlasInput:
    """Three tightly packed line charts with identity transition germs."""
    charts = {
        "A": disc_chart(F(0)),
        "B": disc_chart(F(1, 10)),
        "C": disc_chart(F(1, 5)),
    }
    ident = identity_map(2, order)
    transitions = [
        GermTransition(i, j, full_tube(i, charts[i]), ident)
        for i in charts
        for j in charts
        if i != j
    ]
    return GermAtlasInput(1, 1, order, charts, transitions)


def pinch_map(order: int) -> PolyMap:
    """(t, z) -> (t, z + t z^2)."""
    t = jet_from_terms(2, order, [((1, 0), Coeff(1))])
    fiber = jet_from_terms(2, order, [((0, 1), Coeff(1)), ((1, 2), Coeff(1))])
    return PolyMap(2, [t, fiber])


def pinch_atlas(order: int = 6) -> GermAtlasInput:
    """Two charts with the fiber-pinching transition and its exact inverse."""
    charts = {"A": disc_chart(F(0)), "B": disc_chart(F(1, 10))}
    fwd = pinch_map(order)
    transitions = [
        GermTransition("A", "B", full_tube("A", charts["A"]), fwd),
        GermTransition("B", "A", full_tube("B", charts["B"]), map_inverse(fwd)),
    ]
    return GermAtlasInput(1, 1, order, charts, transitions)


def scaling_map(c: Fraction, order: int) -> PolyMap:
    """(t, z) -> (t + (c^2 - 1) z^2, c z): an exact cocycle family."""
    t = jet_from_terms(
        2, order, [((1, 0), Coeff(1)), ((0, 2), Coeff(c * c - 1))]
    )
    fiber = jet_from_terms(2, order, [((0, 1), Coeff(c))])
    return PolyMap(2, [t, fiber])


def scaling_atlas(order: int = 4, weights=(F(1), F(2), F(4))) -> GermAtlasInput:
    ids = ["A", "B", "C"]
    centers = [F(0), F(1, 10), F(1, 5)]
    charts = {cid: disc_chart(c) for cid, c in zip(ids, centers)}
    a = dict(zip(ids, weights))
    transitions = [
        GermTransition(i, j, full_tube(i, charts[i]), scaling_map(a[j] / a[i], order))
        for i in ids
        for j in ids
        if i != j
    ]
    return GermAtlasInput(1, 1, order, charts, transitions)


def broken_cocycle_atlas(order: int = 4) -> GermAtlasInput:
    """Scaling atlas with the A->C germ perturbed at z^2; its inverse is
    adjusted, so only the cocycle check can fire."""
    inp = scaling_atlas(order)
    old = inp.transitions[("A", "C")]
    perturbed = PolyMap(
        2,
        [
            jet_from_terms(
                2, order,
                [((1, 0), Coeff(1)), ((0, 2), Coeff(F(16)))],
            ),
            old.map.components[1],
        ],
    )
    inp.transitions[("A", "C")] = GermTransition("A", "C", old.domain, perturbed)
    rev = inp.transitions[("C", "A")]
    inp.transitions[("C", "A")] = GermTransition(
        "C", "A", rev.domain, map_inverse(perturbed)
    )
    return inp


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_validate_identity_atlas():
    report = validate_germ_data(identity_atlas())
    assert report["valid"]
    assert report["transitions_checked"] == 6
    assert report["cocycle_triples_checked"] == 6


def test_validate_rejects_zero_section_drift():
    inp = identity_atlas()
    bad = PolyMap(
        2,
        [
            jet_from_terms(2, 3, [((1, 0), Coeff(1)), ((2, 0), Coeff(1))]),
            jet_from_terms(2, 3, [((0, 1), Coeff(1))]),
        ],
    )
    tr = inp.transitions[("A", "B")]
    inp.transitions[("A", "B")] = GermTransition("A", "B", tr.domain, bad)
    with pytest.raises(ValidationFailure) as exc:
        validate_germ_data(inp)
    kinds = {v["kind"] for v in exc.value.report["violations"]}
    assert "zero_section" in kinds


def test_validate_rejects_broken_inverse_pair():
    inp = pinch_atlas(order=4)
    tr = inp.transitions[("B", "A")]
    inp.transitions[("B", "A")] = GermTransition(
        "B", "A", tr.domain, pinch_map(4)
    )
    with pytest.raises(ValidationFailure) as exc:
        validate_germ_data(inp)
    assert any(v["kind"] == "inverse_pair" for v in exc.value.report["violations"])


def test_validate_names_cocycle_triple_and_exponent():
    with pytest.raises(ValidationFailure) as exc:
        validate_germ_data(broken_cocycle_atlas())
    cocycle = [v for v in exc.value.report["violations"] if v["kind"] == "cocycle"]
    assert cocycle
    first = cocycle[0]
    assert set(first["triple"]) == {"A", "B", "C"}
    assert first["component"] == 0
    assert first["exponent"] == [0, 2]


def test_diagonal_transition_must_be_identity():
    charts = {"A": disc_chart(F(0))}
    with pytest.raises(ValidationFailure):
        GermAtlasInput(
            1, 1, 4, charts,
            [GermTransition("A", "A", full_tube("A", charts["A"]), pinch_map(4))],
        )


# ---------------------------------------------------------------------------
# pipeline on the identity atlas
# ---------------------------------------------------------------------------


def test_identity_pipeline_full_fiber_and_nerve():
    inp = identity_atlas()
    report, atlas = run_glue_pipeline(inp, samples=50)
    assert report["valid"]
    # overlap tubes keep the full declared fiber: no fiber loss for identities
    for data in atlas.cover.overlaps.values():
        assert not data.vacuous
        assert data.o_inner.fiber_radius == F(1)
    assert atlas.cover.halvings == 0
    # glued transitions are the input identities
    ident = identity_map(2, 3)
    for tr in inp.transitions.values():
        assert tr.map == ident
    assert atlas.certificates["hausdorff"]["holds"] is True
    assert atlas.certificates["hausdorff"]["margin"] > 0
    assert atlas.nerve_pairs == [("A", "B"), ("A", "C"), ("B", "C")]
    assert atlas.nerve_triples == [("A", "B", "C")]
    zs = atlas.zero_sections["A"]
    assert zs == zero_section_map(1, 1, 3)


def test_identity_triple_certificates_nonvacuous():
    inp = identity_atlas()
    _, atlas = run_glue_pipeline(inp, samples=10)
    nonvac = [c for c in atlas.triple_certs.values() if not c.vacuous]
    assert nonvac
    for cert in nonvac:
        assert cert.residual_zero
        assert cert.domain_margin > 0


# ---------------------------------------------------------------------------
# pinch atlas: nontrivial fiber transition
# ---------------------------------------------------------------------------


def test_pinch_pipeline_certificates_and_audit():
    inp = pinch_atlas()
    report, atlas = run_glue_pipeline(inp, samples=100, seed=7)
    assert report["valid"]
    for cert in atlas.cover.pairs.values():
        assert not cert.vacuous
        assert cert.margin > 0
    audit = audit_cover_certificates(atlas.cover, atlas.triple_certs,
                                     samples=400, seed=11)
    assert audit["violations"] == {k: 0 for k in "abcde"}
    assert audit["checked"]["c"] > 0
    assert audit["checked"]["d"] > 0
    sep = atlas.closedness["audit"]
    assert sep["separated"] > 0
    assert sep["min_separation"] is None or sep["min_separation"] > 0


def test_pinch_inverse_is_exact_at_order():
    inp = pinch_atlas()
    fwd = inp.transitions[("A", "B")].map
    rev = inp.transitions[("B", "A")].map
    assert map_compose(fwd, rev) == identity_map(2, 6)
    assert map_compose(rev, fwd) == identity_map(2, 6)


# ---------------------------------------------------------------------------
# scaling atlas: exact cocycle, sampled transitivity
# ---------------------------------------------------------------------------


def test_scaling_pipeline_and_transitivity_chains():
    inp = scaling_atlas()
    report, atlas = run_glue_pipeline(inp, samples=50, seed=3)
    assert report["valid"]
    audit = audit_transitivity(atlas.cover, chains=200, seed=5)
    assert audit["chains_verified"] == 200
    assert audit["violations"] == 0


def test_broken_cocycle_blocks_pipeline():
    with pytest.raises(ValidationFailure):
        run_glue_pipeline(broken_cocycle_atlas())


# ---------------------------------------------------------------------------
# failure modes
# ---------------------------------------------------------------------------


def test_shallow_overlap_exhausts_witness_search():
    charts = {"A": disc_chart(F(0)), "B": disc_chart(F(1))}
    ident = identity_map(2, 3)
    inp = GermAtlasInput(
        1, 1, 3, charts,
        [
            GermTransition("A", "B", full_tube("A", charts["A"]), ident),
            GermTransition("B", "A", full_tube("B", charts["B"]), ident),
        ],
    )
    report = validate_germ_data(inp)
    assert report["valid"]
    from germglue.regions import refine_cover

    triple_list = refine_cover([charts["A"], charts["B"]])
    triples = dict(zip(["A", "B"], triple_list))
    with pytest.raises(ShrinkExhausted):
        compute_overlaps(inp, triples)


def test_n_max_exhaustion():
    with pytest.raises(ShrinkExhausted):
        run_glue_pipeline(pinch_atlas(), n_max=1)


def test_coverage_loss_reported():
    inp = identity_atlas()
    inp = GermAtlasInput(
        1, 1, 3, inp.charts,
        list(inp.transitions.values()),
        base_points=[(Coeff(F(9, 10)),)],
    )
    with pytest.raises(CoverageLossError):
        run_glue_pipeline(inp)


# ---------------------------------------------------------------------------
# gluing chart-wise maps
# ---------------------------------------------------------------------------


def test_identity_chart_maps_glue_with_input_radii():
    inp = pinch_atlas()
    _, atlas = run_glue_pipeline(inp, samples=10)
    ident = identity_map(2, 6)
    glued = glue_chartwise_maps(atlas, atlas, {"A": ident, "B": ident})
    assert glued.epsilons == atlas.cover.radii
    for cid, dom in glued.domains.items():
        assert dom.fiber_radius == atlas.cover.radii[cid]
        assert dom.base == atlas.cover.triples[cid].U


def test_disagreeing_chart_maps_rejected_with_pair():
    inp = identity_atlas()
    _, atlas = run_glue_pipeline(inp, samples=10)
    ident = identity_map(2, 3)
    bumped = PolyMap(
        2,
        [
            ident.components[0],
            jet_from_terms(2, 3, [((0, 1), Coeff(1)), ((0, 2), Coeff(1))]),
        ],
    )
    with pytest.raises(AgreementError) as exc:
        glue_chartwise_maps(atlas, atlas, {"A": ident, "B": bumped, "C": ident})
    msg = str(exc.value)
    assert "'A'" in msg and "'B'" in msg
    assert "[0, 2]" in msg


def test_chart_map_must_fix_zero_section():
    inp = identity_atlas()
    _, atlas = run_glue_pipeline(inp, samples=10)
    ident = identity_map(2, 3)
    drifting = PolyMap(
        2,
        [
            ident.components[0],
            jet_from_terms(2, 3, [((0, 1), Coeff(1)), ((1, 0), Coeff(1))]),
        ],
    )
    with pytest.raises(ValidationFailure):
        glue_chartwise_maps(atlas, atlas, {"A": ident, "B": drifting, "C": ident})


# ---------------------------------------------------------------------------
# assembly guards
# ---------------------------------------------------------------------------


def test_build_requires_closedness():
    inp = identity_atlas()
    from germglue.regions import refine_cover

    triple_list = refine_cover([inp.charts[c] for c in sorted(inp.charts)])
    triples = dict(zip(sorted(inp.charts), triple_list))
    overlaps = compute_overlaps(inp, triples)
    cover = shrink_tubes(inp, triples, overlaps)
    certs = enforce_triple_domains(cover)
    with pytest.raises(Exception):
        build_glued_atlas(cover, certs, {"closed": False})
    closed = check_closed_relation(cover, samples=20)
    atlas = build_glued_atlas(cover, certs, closed)
    assert atlas.certificates["equivalence_relation"]["symmetric"] is True
