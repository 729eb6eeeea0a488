"""Command-line front end.

Exit codes: 0 gate passed, 1 usage or I/O error, 2 gate failed, 3 backtracking
exhausted.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import yaml

from .errors import BacktrackExhaustedError, MissingArtifactError, PurposeKGError
from .evaluation import COUNT_METRICS
from .ingest import apply_threshold_override, load_dataset, parse_purpose
from .model import PHASES, SchemaGraph
from .modeling import render_model
from .pipeline import (
    AlignmentResult,
    InceptionResult,
    IntegrationResult,
    ModelingResult,
    load_ontologies,
    run_alignment,
    run_inception,
    run_integration,
    run_modeling,
    run_pipeline,
)
from .rdf import check_base_iri, export_rdf
from .serialize import (
    PHASE_DIRS,
    Workspace,
    cleaned_from_mapping,
    cleaned_to_mapping,
    dump_yaml,
    etg_from_mapping,
    etg_to_mapping,
    etypes_to_list,
    model_from_mapping,
    model_to_mapping,
)

EXIT_OK, EXIT_ERROR, EXIT_GATE, EXIT_EXHAUSTED = 0, 1, 2, 3
WORKSPACE_ENV = "PURPOSEKG_WORKSPACE"
DEFAULT_BASE_IRI = "http://example.org/kg"
EG_FILE = "eg.nt"

log = logging.getLogger("purposekg")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is taken by gate failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def load_purpose(args):
    purpose = parse_purpose(args.purpose)
    if getattr(args, "thresholds_override", None):
        purpose = apply_threshold_override(purpose, args.thresholds_override)
    return purpose


# -- artifact writers ---------------------------------------------------------------


def write_inception(ws: Workspace, result: InceptionResult, decision) -> None:
    ws.write("inception", "elements.yaml", dump_yaml({"etypes": etypes_to_list(SchemaGraph(etypes=result.cq_elements))}))
    ws.write_json("inception", "match_reports.json", [r.to_dict() for r in result.reports])
    selection = result.selection.to_dict()
    selection["ontology_overlaps"] = {n: float(m) for n, m in sorted(result.overlaps.items())}
    ws.write_json("inception", "selection.json", selection)
    ws.write_gate(decision)


def write_modeling(ws: Workspace, result: ModelingResult, decision) -> None:
    ws.write("modeling", "model.yaml", dump_yaml(model_to_mapping(result.model)))
    ws.write("modeling", "model.txt", render_model(result.model))
    ws.write_json(
        "modeling",
        "datasets.json",
        {"selected": list(result.datasets), "error": str(result.error) if result.error else None},
    )
    ws.write_gate(decision)


def write_alignment(ws: Workspace, result: AlignmentResult, decision) -> None:
    ws.write_json("alignment", "rankings.json", [r.to_dict() for r in result.rankings])
    if result.etg is not None:
        ws.write("alignment", "etg.yaml", dump_yaml(etg_to_mapping(result.etg)))
        ws.write("alignment", "etg.txt", render_model(result.etg))
    for cleaned in result.cleaned:
        ws.write_json("alignment", f"cleaned/{cleaned.descriptor.id}.json", cleaned_to_mapping(cleaned))
    ws.write_gate(decision)


def write_integration(ws: Workspace, result: IntegrationResult, decision, base_iri: str) -> None:
    ws.write("integration", EG_FILE, export_rdf(result.eg, base_iri))
    ws.write_json("integration", "quality.json", result.quality.to_dict())
    ws.write_gate(decision)


def _writer(ws: Workspace, base_iri: str):
    writers = {
        "inception": write_inception,
        "modeling": write_modeling,
        "alignment": write_alignment,
        "integration": lambda w, r, d: write_integration(w, r, d, base_iri),
    }

    def on_decision(phase, result, decision):
        ws.clear_from(phase)
        writers[phase](ws, result, decision)

    return on_decision


# -- commands -----------------------------------------------------------------------


def _exit_for(decision) -> int:
    print(f"{decision.phase}: {decision.verdict}")
    for reason in decision.reasons:
        print(f"  {reason}")
    return EXIT_OK if decision.passed else EXIT_GATE


def cmd_phase(name: str, args) -> int:
    """Run one phase against the artifacts of the earlier ones."""
    phase = {"inception": "inception", "model": "modeling", "align": "alignment", "integrate": "integration"}[name]
    purpose = load_purpose(args)
    ws = Workspace(args.workspace)
    base_iri = check_base_iri(args.base_iri)
    with ws:
        if phase == "inception":
            result, decision = run_inception(purpose, args.allow_unaligned)
        elif phase == "modeling":
            ws.require_passed("inception")
            # inception is cheap and deterministic, so its in-memory state is rebuilt
            inception, _ = run_inception(purpose, args.allow_unaligned)
            result, decision = run_modeling(purpose, inception)
        elif phase == "alignment":
            ws.require_passed("modeling")
            model = model_from_mapping(ws.read_yaml("modeling", "model.yaml"))
            selected = ws.read_json("modeling", "datasets.json")["selected"]
            kept_ontologies = ws.read_json("inception", "selection.json")["kept_ontologies"]
            ontologies = load_ontologies(purpose)
            records = [
                load_dataset(purpose.descriptor(d), purpose.base_dir, purpose.options.date_patterns) for d in selected
            ]
            result, decision = run_alignment(
                purpose, model, [ontologies[n] for n in kept_ontologies], records, args.allow_unaligned
            )
        else:
            ws.require_passed("alignment")
            etg = etg_from_mapping(ws.read_yaml("alignment", "etg.yaml"))
            cleaned_dir = ws.path("alignment", "cleaned")
            cleaned = [
                cleaned_from_mapping(ws.read_json("alignment", f"cleaned/{p.name}"))
                for p in sorted(cleaned_dir.glob("*.json"))
            ]
            if not cleaned:
                raise MissingArtifactError(f"no cleaned datasets under {cleaned_dir}")
            result, decision = run_integration(purpose, etg, cleaned)
        _writer(ws, base_iri)(phase, result, decision)
    return _exit_for(decision)


def _history_dict(decisions) -> list[dict]:
    return [dict(d.to_dict(), step=i) for i, d in enumerate(decisions, 1)]


def cmd_run(args) -> int:
    purpose = load_purpose(args)
    base_iri = check_base_iri(args.base_iri)
    ws = Workspace(args.workspace)
    with ws:
        ws.clear_from("inception")
        try:
            result = run_pipeline(
                purpose,
                reload=lambda: load_purpose(args),
                allow_unaligned=args.allow_unaligned,
                on_decision=_writer(ws, base_iri),
            )
        except BacktrackExhaustedError as exc:
            ws.write_json(None, "history.json", _history_dict(exc.history))
            ws.write_json(None, "summary.json", {"status": "exhausted", "message": str(exc), "decisions": len(exc.history)})
            print(f"aborted: {exc}", file=sys.stderr)
            return EXIT_EXHAUSTED
        eg_text = ws.read_text("integration", EG_FILE)
        ws.write_json(None, "history.json", _history_dict(result.decisions))
        summary = {
            "status": "pass",
            "decisions": len(result.decisions),
            "entities": len(result.eg.entities),
            "triples": eg_text.count("\n"),
            "eg": f"{PHASE_DIRS['integration']}/{EG_FILE}",
            "etg_provenance": sorted({e.provenance for e in result.alignment.etg.etypes}),
            "verdicts": {d.phase: d.verdict for d in result.decisions},
        }
        ws.write_json(None, "summary.json", summary)
    print(f"pass: {summary['entities']} entities, {summary['triples']} triples in {ws.path('integration', EG_FILE)}")
    return EXIT_OK


def render_report(ws: Workspace) -> str:
    ws.ensure_not_empty()
    lines = [f"workspace {ws.root}", ""]
    history_path = ws.root / "history.json"
    if history_path.is_file():
        history = ws.read_json(None, "history.json")
    else:
        history = [dict(d.to_dict(), step=i) for i, d in enumerate(ws.gates().values(), 1)]
    lines.append("gate history")
    for entry in history:
        tail = f" -> back to {entry['backtrack_to']}" if entry["backtrack_to"] else ""
        lines.append(f"  {entry['step']:>2}. {entry['phase']:<12} {entry['verdict']}{tail}")
        for reason in entry["reasons"]:
            lines.append(f"        {reason}")
    chain = [e["phase"] + "->" + e["backtrack_to"] for e in history if e["backtrack_to"]]
    if chain:
        lines.append("  backtrack chain: " + ", ".join(chain))
    lines.append("")
    lines.append("metrics (latest decision per phase)")
    latest = {e["phase"]: e for e in history}
    for phase in PHASES:
        if phase not in latest:
            continue
        lines.append(f"  {phase}")
        for name, value in sorted(latest[phase]["metrics"].items()):
            shown = f"{int(value)}" if name in COUNT_METRICS else f"{value:.3f}"
            lines.append(f"    {name:<28} {shown}")
    quality_path = ws.path("integration", "quality.json")
    if quality_path.is_file():
        quality = ws.read_json("integration", "quality.json")
        lines.append("")
        lines.append("data quality")
        lines.append(f"  entities      {quality['entity_count']}")
        lines.append(f"  conflicts     {quality['conflict_count']}")
        lines.append(f"  null ratio    {quality['null_ratio']:.3f}")
        lines.append(f"  connectivity  {quality['connectivity']:.3f}")
        for etype, value in quality["etype_connectivity"].items():
            lines.append(f"    {etype:<20} {value:.3f}")
        for stats in quality["datasets"]:
            lines.append(
                f"  {stats['dataset']}: created {stats['entities_created']}, merged {stats['entities_merged']}, "
                f"conflicts {len(stats['conflicts'])}, nulls {stats['null_property_count']}, "
                f"unresolved links {stats['unresolved_links']}"
            )
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    sys.stdout.write(render_report(Workspace(args.workspace)))
    return EXIT_OK


def cmd_seed(args) -> int:
    """Parse and validate the inputs without running any phase."""
    purpose = load_purpose(args)
    ontologies = load_ontologies(purpose)
    for descriptor in purpose.dataset_descriptors:
        path = purpose.resolve(descriptor.path)
        if not path.is_file():
            raise MissingArtifactError(f"dataset {descriptor.id}: {path} does not exist")
    check_base_iri(args.base_iri)
    print(
        f"ok: {len(purpose.cqs)} CQs, {len(purpose.dataset_descriptors)} datasets, "
        f"{len(ontologies)} ontologies"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="purposekg", description="Purpose-driven knowledge graph construction.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, purpose=True):
        p.add_argument(
            "--workspace",
            default=os.environ.get(WORKSPACE_ENV, "workspace"),
            help=f"artifact directory (default: ${WORKSPACE_ENV} or ./workspace)",
        )
        if not purpose:
            return
        p.add_argument("--purpose", required=True, type=Path, help="purpose YAML file")
        p.add_argument("--thresholds-override", type=Path, help="YAML file overriding gate thresholds")
        p.add_argument("--allow-unaligned", action="store_true", help="accept an ETG without reference ontology")
        p.add_argument("--base-iri", default=DEFAULT_BASE_IRI, help="base IRI of exported resources")
        p.add_argument("--seed-only", action="store_true", help="parse and validate the inputs, then stop")

    for name, help_text in (
        ("inception", "collect and match resources"),
        ("model", "build the ETG model"),
        ("align", "align with reference ontologies and clean datasets"),
        ("integrate", "build and export the entity graph"),
        ("run", "run all phases with backtracking"),
    ):
        common(sub.add_parser(name, help=help_text))
    common(sub.add_parser("report", help="summarize a workspace"), purpose=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args)
        if args.seed_only:
            return cmd_seed(args)
        if args.command == "run":
            return cmd_run(args)
        return cmd_phase(args.command, args)
    except (PurposeKGError, OSError, yaml.YAMLError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
