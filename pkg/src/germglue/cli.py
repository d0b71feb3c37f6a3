"""Command line front end: JSON documents in, JSON certificates out.

Subcommands mirror the library surface: ``validate`` checks germ data,
``glue`` runs the shrinking pipeline to a glued atlas, ``glue-sheaf``
restricts sheaf data to the certified cover, ``tep-check`` verifies one
chart's framed connection data, and ``glue-tep`` assembles the global
object.  Reports are written as canonical JSON (sorted keys, no
timestamps) next to a short text summary on stdout, so repeated runs with
one seed are byte identical.

Exit codes: 0 all requested certificates obtained; 2 validation failure
(germ, cocycle, or axiom violation); 3 gluing obstruction (shrinking
exhausted below the radius floor); 4 input, schema, or I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

from .atlas import (
    N_MAX_DEFAULT,
    RADIUS_FLOOR_DEFAULT,
    run_glue_pipeline,
    validate_germ_data,
)
from .documents import (
    SCHEMA_IDS,
    atlas_input_from_json,
    dump_report,
    fraction_from_json,
    load_document,
    matrix_to_json,
    sheaf_input_from_json,
    tep_data_from_json,
    tep_glue_input_from_json,
    tube_to_json,
)
from .errors import (
    CertificateIncompleteError,
    CoverageLossError,
    GermGlueError,
    SchemaError,
    ShrinkExhausted,
    ValidationFailure,
)
from .numeval import float_transition_audit
from .sheaf import glue_sheaf
from .tep import glue_tep, tep_report

OUT_DIR_ENV = "GERMGLUE_OUT"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_OBSTRUCTION = 3
EXIT_INPUT = 4


@dataclass
class JobSpec:
    """One CLI invocation: command, inputs, and numeric policy."""

    command: str
    input: str
    atlas: Optional[str] = None
    order: Optional[int] = None
    z_order: Optional[int] = None
    mode: str = "exact"
    tolerance: float = 1e-9
    n_max: int = N_MAX_DEFAULT
    radius_floor: Optional[str] = None
    samples: int = 200
    seed: int = 0
    out: Optional[str] = None


def _floor(job: JobSpec):
    if job.radius_floor is None:
        return RADIUS_FLOOR_DEFAULT
    return fraction_from_json(job.radius_floor)


def _float_audit(job: JobSpec, cover) -> dict:
    return float_transition_audit(
        cover, chains=job.samples, seed=job.seed, tolerance=job.tolerance
    )


def _cmd_validate(job: JobSpec):
    inp = atlas_input_from_json(load_document(job.input, "atlas-input"), job.order)
    report = validate_germ_data(inp)
    payload = {
        "validation": report,
        "charts": sorted(inp.charts),
        "order": inp.order,
    }
    return True, payload, EXIT_OK


def _cmd_glue(job: JobSpec):
    inp = atlas_input_from_json(load_document(job.input, "atlas-input"), job.order)
    report, atlas = run_glue_pipeline(
        inp,
        n_max=job.n_max,
        radius_floor=_floor(job),
        samples=job.samples,
        seed=job.seed,
    )
    payload = {
        "validation": report,
        "certificates": atlas.certificates,
        "closedness": atlas.closedness,
        "nerve": {
            "pairs": sorted(atlas.nerve_pairs),
            "triples": sorted(atlas.nerve_triples),
        },
        "radii": dict(sorted(atlas.cover.radii.items())),
        "n_index": dict(sorted(atlas.cover.n_index.items())),
    }
    ok = True
    if job.mode == "float":
        audit = _float_audit(job, atlas.cover)
        payload["float_audit"] = audit
        ok = audit["ok"]
    return ok, payload, EXIT_OK if ok else EXIT_VALIDATION


def _cmd_glue_sheaf(job: JobSpec):
    if not job.atlas:
        raise SchemaError("glue-sheaf needs --atlas pointing at an atlas document")
    atlas_inp = atlas_input_from_json(load_document(job.atlas, "atlas-input"), job.order)
    sheaf_inp = sheaf_input_from_json(load_document(job.input, "sheaf-input"))
    _, atlas = run_glue_pipeline(
        atlas_inp,
        n_max=job.n_max,
        radius_floor=_floor(job),
        samples=job.samples,
        seed=job.seed,
    )
    glued = glue_sheaf(sheaf_inp, atlas, radius_floor=_floor(job))
    payload = {
        "mode": glued.mode,
        "order": glued.order,
        "ranks": dict(sorted(glued.ranks.items())),
        "epsilons": dict(sorted(glued.epsilons.items())),
        "det_bounds": {repr(k): v for k, v in sorted(glued.det_bounds.items())},
        "chart_tubes": {
            cid: tube_to_json(t) for cid, t in sorted(glued.chart_tubes.items())
        },
        "zero_section": {
            repr(k): matrix_to_json(m) for k, m in sorted(glued.zero_section.items())
        },
        "atlas_certificates": atlas.certificates,
    }
    ok = True
    if job.mode == "float":
        audit = _float_audit(job, atlas.cover)
        payload["float_audit"] = audit
        ok = audit["ok"]
    return ok, payload, EXIT_OK if ok else EXIT_VALIDATION


def _cmd_tep_check(job: JobSpec):
    doc = load_document(job.input, "tep-input")
    data = tep_data_from_json(doc, t_order=job.order, z_order=job.z_order)
    report = tep_report(data, seed=job.seed)
    ok = report["valid"]
    return ok, {"tep": report}, EXIT_OK if ok else EXIT_VALIDATION


def _cmd_glue_tep(job: JobSpec):
    doc = load_document(job.input, "tep-glue-input")
    charts, atlas_inp, sheaf_inp, points = tep_glue_input_from_json(
        doc, order=job.order, z_order=job.z_order
    )
    glued = glue_tep(
        charts,
        atlas_inp,
        sheaf_inp,
        points=points,
        n_max=job.n_max,
        radius_floor=_floor(job),
        samples=job.samples,
        seed=job.seed,
    )
    payload = {"certificate": glued.certificate}
    ok = glued.certificate["valid"]
    if job.mode == "float":
        audit = _float_audit(job, glued.atlas.cover)
        payload["float_audit"] = audit
        ok = ok and audit["ok"]
    return ok, payload, EXIT_OK if ok else EXIT_VALIDATION


_COMMANDS = {
    "validate": _cmd_validate,
    "glue": _cmd_glue,
    "glue-sheaf": _cmd_glue_sheaf,
    "tep-check": _cmd_tep_check,
    "glue-tep": _cmd_glue_tep,
}


def _error_payload(exc: Exception) -> dict:
    payload = {"error": {"kind": type(exc).__name__, "message": str(exc)}}
    report = getattr(exc, "report", None)
    if report is not None:
        payload["validation"] = report
    return payload


def run(job: JobSpec) -> int:
    """Execute a job, write its report document, print a summary."""
    try:
        ok, payload, code = _COMMANDS[job.command](job)
    except ValidationFailure as exc:
        ok, payload, code = False, _error_payload(exc), EXIT_VALIDATION
    except (ShrinkExhausted, CoverageLossError, CertificateIncompleteError) as exc:
        ok, payload, code = False, _error_payload(exc), EXIT_OBSTRUCTION
    except (SchemaError, GermGlueError, OSError, json.JSONDecodeError) as exc:
        ok, payload, code = False, _error_payload(exc), EXIT_INPUT

    error = payload.pop("error", None)
    envelope = {
        "schema": SCHEMA_IDS["report"],
        "command": job.command,
        "ok": ok,
        "exit_code": code,
        "report": payload,
    }
    if error is not None:
        envelope["error"] = error

    try:
        path = _write_report(job, envelope)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for line in _summary(envelope, path):
        print(line)
    return code


def _write_report(job: JobSpec, envelope: dict) -> str:
    out_dir = job.out or os.environ.get(OUT_DIR_ENV) or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{job.command}-report.json")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(dump_report(envelope))
    return path


def _summary(envelope: dict, path: str) -> list:
    lines = [
        f"command: {envelope['command']}",
        f"status: {'ok' if envelope['ok'] else 'FAILED'} (exit {envelope['exit_code']})",
    ]
    if "error" in envelope:
        err = envelope["error"]
        lines.append(f"{err['kind']}: {err['message']}")
    report = envelope.get("report", {})
    certs = report.get("certificates")
    if certs:
        hausdorff = certs.get("hausdorff", {})
        lines.append(f"hausdorff: {hausdorff.get('holds')}")
    if "nerve" in report:
        nerve = report["nerve"]
        lines.append(
            f"nerve: {len(nerve['pairs'])} pairs, {len(nerve['triples'])} triples"
        )
    if "epsilons" in report:
        lines.append(f"charts glued: {len(report['epsilons'])}")
    if "tep" in report:
        tep = report["tep"]
        lines.append(
            "axioms: flatness={} pairing={} IC={} GC={}".format(
                tep["flatness"]["flat"],
                tep["pairing"]["valid"],
                tep["IC"],
                tep["GC"]["holds"],
            )
        )
    if "certificate" in report:
        cert = report["certificate"]
        inter = cert["intertwining"]
        lines.append(
            f"charts: {len(cert['charts'])}, intertwining pairs: "
            f"{inter['pairs_checked']}, residuals: {len(inter['residuals'])}"
        )
    if "float_audit" in report:
        audit = report["float_audit"]
        lines.append(
            f"float audit [{audit['backend']}]: {audit['chains_verified']} chains, "
            f"{audit['violations']} violations, max residual {audit['max_residual']:.3e}"
        )
    lines.append(f"report: {path}")
    return lines


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="germglue",
        description="certified gluing of chart-wise germ data",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "validate": "check germ-data axioms for an atlas document",
        "glue": "run the shrinking pipeline and emit atlas certificates",
        "glue-sheaf": "glue sheaf data over a certified atlas",
        "tep-check": "verify framed connection axioms for one chart",
        "glue-tep": "glue chart-wise framed connection data globally",
    }
    for name, help_text in specs.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("input", help="input JSON document")
        if name == "glue-sheaf":
            sp.add_argument("--atlas", help="atlas input document", default=None)
        sp.add_argument("--order", type=int, default=None,
                        help="override the truncation order")
        sp.add_argument("--z-order", dest="z_order", type=int, default=None,
                        help="override the z truncation order")
        sp.add_argument("--mode", choices=("exact", "float"), default="exact",
                        help="float adds a numeric chain audit; exact ignores "
                             "the tolerance")
        sp.add_argument("--tolerance", type=float, default=1e-9,
                        help="float-mode residual tolerance")
        sp.add_argument("--n-max", dest="n_max", type=int, default=N_MAX_DEFAULT,
                        help="shrinking search depth")
        sp.add_argument("--radius-floor", dest="radius_floor", default=None,
                        help="smallest allowed tube radius, as p/q")
        sp.add_argument("--samples", type=int, default=200,
                        help="sample count for seeded audits")
        sp.add_argument("--seed", type=int, default=0, help="audit RNG seed")
        sp.add_argument("--out", default=None,
                        help=f"report directory (default ${OUT_DIR_ENV} or .)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fields = {k: v for k, v in vars(args).items()}
    return run(JobSpec(**fields))


if __name__ == "__main__":
    sys.exit(main())
