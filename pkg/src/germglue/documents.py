"""JSON documents for inputs and reports, with versioned schemas.

Exact scalars travel as fraction strings ("3/4", "-2"); a complex value
with nonzero imaginary part becomes {"re": ..., "im": ...}.  Jets are term
lists under their declared variable count and order; maps, matrices, and
regions nest those.  Every input document carries a "schema" field naming
its contract version, and is checked against the matching JSON Schema
shipped in ``germglue/schemas`` before decoding.  Structural violations
raise SchemaError; semantic violations found later (germ axioms, cocycle
failures) keep their own error types.
"""

from __future__ import annotations

import json
import re
from fractions import Fraction
from importlib import resources
from typing import Dict, Optional, Sequence, Tuple

import jsonschema

from .atlas import GermAtlasInput, GermTransition
from .errors import SchemaError, ValidationFailure
from .jets import Jet, PolyMap, jet_with_order
from .matrices import JetMatrix
from .regions import Point, Polydisc, TubeDomain
from .scalars import Coeff
from .sheaf import SheafInput
from .tep import TEPData

SCHEMA_IDS = {
    "atlas-input": "germglue/atlas-input/v1",
    "sheaf-input": "germglue/sheaf-input/v1",
    "tep-input": "germglue/tep-input/v1",
    "tep-glue-input": "germglue/tep-glue-input/v1",
    "report": "germglue/report/v1",
}


def _schema_for(kind: str) -> dict:
    name = f"{kind}.v1.json"
    path = resources.files("germglue").joinpath("schemas", name)
    return json.loads(path.read_text())


def validate_document(doc: object, kind: str) -> dict:
    """Check a parsed document against the published schema for ``kind``."""
    if kind not in SCHEMA_IDS:
        raise SchemaError(f"unknown document kind {kind!r}")
    try:
        jsonschema.validate(doc, _schema_for(kind))
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"{kind} document rejected: {exc.message}") from exc
    return doc


def load_document(path: str, kind: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        doc = json.load(handle)
    return validate_document(doc, kind)


# ---------------------------------------------------------------------------
# scalars
# ---------------------------------------------------------------------------


def fraction_to_json(x: Fraction) -> str:
    return str(Fraction(x))


_FRACTION_RE = re.compile(r"^-?[0-9]+(/[0-9]+)?$")


def fraction_from_json(v: object) -> Fraction:
    if not isinstance(v, str) or not _FRACTION_RE.match(v):
        raise SchemaError(f"bad fraction {v!r}")
    try:
        return Fraction(v)
    except ZeroDivisionError as exc:
        raise SchemaError(f"bad fraction {v!r}") from exc


def coeff_to_json(c: Coeff) -> object:
    if c.im == 0:
        return fraction_to_json(c.re)
    return {"re": fraction_to_json(c.re), "im": fraction_to_json(c.im)}


def coeff_from_json(v: object) -> Coeff:
    if isinstance(v, str):
        return Coeff(fraction_from_json(v))
    if isinstance(v, dict):
        return Coeff(fraction_from_json(v["re"]), fraction_from_json(v["im"]))
    raise SchemaError(f"bad coefficient {v!r}")


# ---------------------------------------------------------------------------
# jets, maps, matrices
# ---------------------------------------------------------------------------


def jet_to_json(f: Jet) -> dict:
    terms = [
        {"exponent": list(e), "value": coeff_to_json(c)}
        for e, c in sorted(f.terms.items())
    ]
    return {"vars": f.num_vars, "order": f.order, "terms": terms}


def jet_from_json(doc: dict) -> Jet:
    num_vars = doc["vars"]
    order = doc["order"]
    terms: Dict[tuple, Coeff] = {}
    for item in doc["terms"]:
        exp = tuple(item["exponent"])
        if len(exp) != num_vars:
            raise SchemaError(f"exponent {list(exp)} has wrong length")
        if sum(exp) > order:
            raise SchemaError(f"term {list(exp)} exceeds the declared order")
        if exp in terms:
            raise SchemaError(f"duplicate term {list(exp)}")
        value = coeff_from_json(item["value"])
        if not value.is_zero():
            terms[exp] = value
    return Jet(num_vars, order, terms)


def map_to_json(f: PolyMap) -> dict:
    return {
        "source_vars": f.source_vars,
        "components": [jet_to_json(c) for c in f.components],
    }


def map_from_json(doc: dict, order: Optional[int] = None) -> PolyMap:
    comps = [jet_from_json(c) for c in doc["components"]]
    if order is not None:
        comps = [jet_with_order(c, order) for c in comps]
    try:
        return PolyMap(doc["source_vars"], comps)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def matrix_to_json(m: JetMatrix) -> dict:
    return {
        "rows": m.rows,
        "cols": m.cols,
        "entries": [[jet_to_json(x) for x in row] for row in m.entries],
    }


def matrix_from_json(doc: dict) -> JetMatrix:
    entries = [[jet_from_json(x) for x in row] for row in doc["entries"]]
    try:
        m = JetMatrix(entries)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    if m.rows != doc["rows"] or m.cols != doc["cols"]:
        raise SchemaError("matrix shape disagrees with declared rows/cols")
    return m


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


def polydisc_to_json(p: Polydisc) -> dict:
    return {
        "centers": [coeff_to_json(c) for c in p.centers],
        "radii": [fraction_to_json(r) for r in p.radii],
    }


def polydisc_from_json(doc: dict) -> Polydisc:
    try:
        return Polydisc(
            [coeff_from_json(c) for c in doc["centers"]],
            [fraction_from_json(r) for r in doc["radii"]],
        )
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def tube_to_json(t: TubeDomain) -> dict:
    return {
        "chart": t.chart,
        "base": polydisc_to_json(t.base),
        "fiber_dim": t.fiber_dim,
        "fiber_radius": fraction_to_json(t.fiber_radius),
    }


def tube_from_json(doc: dict) -> TubeDomain:
    try:
        return TubeDomain(
            doc["chart"],
            polydisc_from_json(doc["base"]),
            doc["fiber_dim"],
            fraction_from_json(doc["fiber_radius"]),
        )
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def point_from_json(values: Sequence[object]) -> Point:
    return tuple(coeff_from_json(v) for v in values)


# ---------------------------------------------------------------------------
# atlas input
# ---------------------------------------------------------------------------


def atlas_input_to_json(inp: GermAtlasInput) -> dict:
    for cid in inp.charts:
        if not isinstance(cid, str):
            raise SchemaError(f"chart id {cid!r} must be a string in documents")
    transitions = [
        {
            "from": i,
            "to": j,
            "domain": tube_to_json(tr.domain),
            "map": map_to_json(tr.map),
        }
        for (i, j), tr in sorted(inp.transitions.items())
    ]
    return {
        "schema": SCHEMA_IDS["atlas-input"],
        "base_dim": inp.base_dim,
        "fiber_dim": inp.fiber_dim,
        "order": inp.order,
        "charts": {cid: polydisc_to_json(w) for cid, w in sorted(inp.charts.items())},
        "transitions": transitions,
        "base_points": [[coeff_to_json(c) for c in p] for p in inp.base_points],
    }


def atlas_input_from_json(doc: dict, order: Optional[int] = None) -> GermAtlasInput:
    validate_document(doc, "atlas-input")
    target = order if order is not None else doc["order"]
    charts = {cid: polydisc_from_json(w) for cid, w in doc["charts"].items()}
    transitions = [
        GermTransition(
            item["from"],
            item["to"],
            tube_from_json(item["domain"]),
            map_from_json(item["map"], order=target),
        )
        for item in doc["transitions"]
    ]
    points = [point_from_json(p) for p in doc.get("base_points", [])]
    try:
        return GermAtlasInput(
            doc["base_dim"], doc["fiber_dim"], target, charts, transitions, points
        )
    except ValidationFailure:
        raise
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


# ---------------------------------------------------------------------------
# sheaf input
# ---------------------------------------------------------------------------


def sheaf_input_to_json(s: SheafInput) -> dict:
    doc = {
        "schema": SCHEMA_IDS["sheaf-input"],
        "ranks": {cid: r for cid, r in sorted(s.ranks.items())},
        "domains": [
            {"charts": list(key), "domain": tube_to_json(dom)}
            for key, dom in sorted(s.domains.items())
        ],
        "matrices": [
            {"from": i, "to": j, "matrix": matrix_to_json(m)}
            for (i, j), m in sorted(s.matrices.items())
        ],
    }
    if s.triple_domains:
        doc["triple_domains"] = [
            {"charts": list(key), "domain": tube_to_json(dom)}
            for key, dom in sorted(s.triple_domains.items())
        ]
    if s.base_transitions:
        doc["base_transitions"] = [
            {"from": i, "to": j, "matrix": matrix_to_json(m)}
            for (i, j), m in sorted(s.base_transitions.items())
        ]
    if s.presentations:
        doc["presentations"] = {
            cid: matrix_to_json(m) for cid, m in sorted(s.presentations.items())
        }
    if s.chi:
        doc["chi"] = [
            {"from": i, "to": j, "matrix": matrix_to_json(m)}
            for (i, j), m in sorted(s.chi.items())
        ]
    return doc


def _pair_matrices(items: Sequence[dict]) -> Dict[tuple, JetMatrix]:
    out: Dict[tuple, JetMatrix] = {}
    for item in items:
        key = (item["from"], item["to"])
        if key in out:
            raise SchemaError(f"duplicate matrix for pair {key!r}")
        out[key] = matrix_from_json(item["matrix"])
    return out


def sheaf_input_from_json(doc: dict) -> SheafInput:
    validate_document(doc, "sheaf-input")
    domains = {
        tuple(item["charts"]): tube_from_json(item["domain"])
        for item in doc["domains"]
    }
    triple_domains = {
        tuple(item["charts"]): tube_from_json(item["domain"])
        for item in doc.get("triple_domains", [])
    } or None
    presentations = {
        cid: matrix_from_json(m) for cid, m in doc.get("presentations", {}).items()
    } or None
    return SheafInput(
        ranks=dict(doc["ranks"]),
        domains=domains,
        matrices=_pair_matrices(doc["matrices"]),
        triple_domains=triple_domains,
        base_transitions=_pair_matrices(doc.get("base_transitions", [])) or None,
        presentations=presentations,
        chi=_pair_matrices(doc.get("chi", [])) or None,
    )


# ---------------------------------------------------------------------------
# framed connection data
# ---------------------------------------------------------------------------


def _box_truncate(m: JetMatrix, base_dim: int, t_order: int, z_order: int) -> JetMatrix:
    entries = []
    for row in m.entries:
        out_row = []
        for x in row:
            kept = {
                e: c
                for e, c in x.terms.items()
                if sum(e[:base_dim]) <= t_order and e[base_dim] <= z_order
            }
            out_row.append(Jet(x.num_vars, x.order, kept))
        entries.append(out_row)
    return JetMatrix(entries)


def tep_data_to_json(d: TEPData) -> dict:
    doc = {
        "schema": SCHEMA_IDS["tep-input"],
        "m": d.base_dim,
        "rank": d.rank,
        "orders": {"t": d.t_order, "z": d.z_order},
        "A": [matrix_to_json(m) for m in d.a_mats],
        "B": matrix_to_json(d.b_mat),
        "P": matrix_to_json(d.p_mat),
        "zeta": matrix_to_json(d.zeta),
    }
    if d.domain is not None:
        doc["domain"] = polydisc_to_json(d.domain)
    return doc


def tep_data_from_json(
    doc: dict,
    t_order: Optional[int] = None,
    z_order: Optional[int] = None,
) -> TEPData:
    validate_document(doc, "tep-input")
    m = doc["m"]
    if len(doc["A"]) != m:
        raise SchemaError(f"need exactly {m} connection matrices, got {len(doc['A'])}")
    t_cap = t_order if t_order is not None else doc["orders"]["t"]
    z_cap = z_order if z_order is not None else doc["orders"]["z"]
    trunc = lambda mat: _box_truncate(matrix_from_json(mat), m, t_cap, z_cap)
    domain = polydisc_from_json(doc["domain"]) if "domain" in doc else None
    try:
        return TEPData(
            base_dim=m,
            rank=doc["rank"],
            t_order=t_cap,
            z_order=z_cap,
            a_mats=[trunc(a) for a in doc["A"]],
            b_mat=trunc(doc["B"]),
            p_mat=trunc(doc["P"]),
            zeta=trunc(doc["zeta"]),
            domain=domain,
        )
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def tep_glue_input_to_json(
    charts: Dict[str, TEPData],
    atlas: GermAtlasInput,
    sheaf: SheafInput,
    points: Sequence[Tuple[str, Point]] = (),
) -> dict:
    doc = {
        "schema": SCHEMA_IDS["tep-glue-input"],
        "atlas": atlas_input_to_json(atlas),
        "sheaf": sheaf_input_to_json(sheaf),
        "charts": {cid: tep_data_to_json(d) for cid, d in sorted(charts.items())},
    }
    if points:
        doc["points"] = [
            {"chart": cid, "point": [coeff_to_json(c) for c in pt]}
            for cid, pt in points
        ]
    return doc


def tep_glue_input_from_json(
    doc: dict,
    order: Optional[int] = None,
    t_order: Optional[int] = None,
    z_order: Optional[int] = None,
):
    """Returns (charts, atlas_input, sheaf_input, points)."""
    validate_document(doc, "tep-glue-input")
    atlas = atlas_input_from_json(doc["atlas"], order=order)
    sheaf = sheaf_input_from_json(doc["sheaf"])
    charts = {
        cid: tep_data_from_json(item, t_order=t_order, z_order=z_order)
        for cid, item in doc["charts"].items()
    }
    points = [
        (item["chart"], point_from_json(item["point"]))
        for item in doc.get("points", [])
    ]
    return charts, atlas, sheaf, points


# ---------------------------------------------------------------------------
# report payloads
# ---------------------------------------------------------------------------


def jsonable(obj: object) -> object:
    """Convert report structures (exact scalars, tuples) to JSON values."""
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if isinstance(obj, Fraction):
        return fraction_to_json(obj)
    if isinstance(obj, Coeff):
        return coeff_to_json(obj)
    if isinstance(obj, (list, tuple)):
        return [jsonable(x) for x in obj]
    if isinstance(obj, dict):
        return {
            (k if isinstance(k, str) else repr(k)): jsonable(v)
            for k, v in obj.items()
        }
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def dump_report(doc: dict) -> str:
    """Canonical serialization: sorted keys, fixed separators, newline end."""
    return json.dumps(jsonable(doc), sort_keys=True, indent=2) + "\n"
