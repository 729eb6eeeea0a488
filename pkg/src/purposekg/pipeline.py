"""Phase runners and the backtracking controller."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .alignment import (
    CleanedRecordSet,
    OntologyRanking,
    clean_dataset,
    etype_overlap,
    generate_etg,
    model_only_etg,
    select_ontologies,
)
from .errors import (
    BacktrackExhaustedError,
    MappingLossError,
    NoDatasetError,
    NoOntologyError,
)
from .evaluation import (
    data_quality,
    eval_alignment,
    eval_inception,
    eval_integration,
    eval_modeling,
)
from .inception import (
    MatchReport,
    ResourceSelection,
    collect_resources,
    extract_elements,
    match_schema,
)
from .ingest import OntologyDocument, RecordSet, load_dataset, parse_ontology
from .integration import build_eg
from .metrics import MetricValue
from .model import (
    ETG,
    PHASES,
    EntityGraph,
    ETGModel,
    EType,
    GateDecision,
    Purpose,
    SchemaGraph,
)
from .modeling import build_etg_model, select_datasets

log = logging.getLogger(__name__)


@dataclass
class InceptionResult:
    cq_elements: tuple[EType, ...]
    records: Mapping[str, RecordSet]
    reports: tuple[MatchReport, ...]
    ontologies: Mapping[str, OntologyDocument]
    overlaps: Mapping[str, MetricValue]
    selection: ResourceSelection

    def kept_records(self) -> list[RecordSet]:
        return [self.records[d] for d in self.selection.kept_datasets]

    def kept_ontologies(self) -> list[OntologyDocument]:
        return [self.ontologies[n] for n in self.selection.kept_ontologies]


@dataclass
class ModelingResult:
    model: ETGModel
    datasets: tuple[str, ...]
    error: Exception | None = None


@dataclass
class AlignmentResult:
    etg: ETG | None
    rankings: tuple[OntologyRanking, ...] = ()
    cleaned: tuple[CleanedRecordSet, ...] = ()
    error: Exception | None = None

    @property
    def ontologies(self) -> list[OntologyDocument]:
        return [r.ontology for r in self.rankings]


@dataclass
class IntegrationResult:
    eg: EntityGraph

    @property
    def quality(self):
        return data_quality(self.eg)


def load_ontologies(purpose: Purpose) -> dict[str, OntologyDocument]:
    ontologies = {}
    for ref in purpose.ontology_refs:
        document = parse_ontology(purpose.resolve(ref))
        if document.name in ontologies:
            raise ValueError(f"two ontology documents are named {document.name!r}")
        ontologies[document.name] = document
    return ontologies


def run_inception(purpose: Purpose, allow_unaligned: bool = False) -> tuple[InceptionResult, GateDecision]:
    cq_elements = extract_elements(purpose.cqs)
    records = {}
    reports = []
    for descriptor in purpose.dataset_descriptors:
        loaded = load_dataset(descriptor, purpose.base_dir, purpose.options.date_patterns)
        records[descriptor.id] = loaded
        reports.append(
            match_schema(
                cq_elements, loaded.descriptor, purpose.alias_map(descriptor.id), purpose.options.similarity_threshold
            )
        )
    ontologies = load_ontologies(purpose)
    cq_graph = SchemaGraph(etypes=cq_elements)
    options = purpose.options
    overlaps = {
        name: etype_overlap(
            onto,
            cq_graph,
            purpose.ontology_aliases,
            name_weight=options.name_weight,
            property_weight=options.property_weight,
            acceptance_threshold=options.acceptance_threshold,
        )
        for name, onto in ontologies.items()
    }
    selection = collect_resources(
        [r.descriptor for r in records.values()], reports, overlaps, purpose.thresholds
    )
    decision = eval_inception(cq_elements, reports, overlaps, purpose.thresholds, allow_unaligned)
    return InceptionResult(cq_elements, records, tuple(reports), ontologies, overlaps, selection), decision


def run_modeling(purpose: Purpose, inception: InceptionResult) -> tuple[ModelingResult, GateDecision]:
    model = build_etg_model(inception.cq_elements, inception.selection, purpose.options.extend_model)
    error = None
    try:
        kept = select_datasets(model, inception.selection, purpose.thresholds.dataset_model_coverage)
    except NoDatasetError as exc:
        kept, error = [], exc
    decision = eval_modeling(model, inception.cq_elements, kept, purpose.thresholds, error)
    return ModelingResult(model, tuple(d.id for d in kept), error), decision


def run_alignment(
    purpose: Purpose,
    model: ETGModel,
    ontologies: Sequence[OntologyDocument],
    records: Sequence[RecordSet],
    allow_unaligned: bool = False,
) -> tuple[AlignmentResult, GateDecision]:
    """Select ontologies, generate the ETG and clean the selected datasets."""
    thresholds = purpose.thresholds
    rankings: list[OntologyRanking] = []
    etg = error = None
    try:
        if ontologies or not allow_unaligned:
            rankings = select_ontologies(model, ontologies, thresholds, purpose.ontology_aliases, purpose.options)
    except NoOntologyError as exc:
        error = exc
    if rankings:
        try:
            etg = generate_etg(
                model, [r.predictions for r in rankings], [r.ontology for r in rankings], purpose.ontology_aliases
            )
        except MappingLossError as exc:
            error = exc
    elif allow_unaligned:
        etg = model_only_etg(model)
        error = None

    cleaned = ()
    if etg is not None:
        cleaned = tuple(clean_dataset(r, etg, purpose.options.date_patterns) for r in records)
    decision = eval_alignment(etg, [r.ontology for r in rankings], thresholds, allow_unaligned, error)
    return AlignmentResult(etg, tuple(rankings), cleaned, error), decision


def run_integration(
    purpose: Purpose, etg: ETG, cleaned: Sequence[CleanedRecordSet]
) -> tuple[IntegrationResult, GateDecision]:
    eg = build_eg(etg, cleaned, purpose.identity_rules)
    return IntegrationResult(eg), eval_integration(eg, purpose.cqs, purpose.thresholds)


@dataclass
class PipelineResult:
    purpose: Purpose
    decisions: tuple[GateDecision, ...]
    inception: InceptionResult
    modeling: ModelingResult
    alignment: AlignmentResult
    integration: IntegrationResult

    @property
    def eg(self) -> EntityGraph:
        return self.integration.eg


@dataclass
class _State:
    purpose: Purpose
    allow_unaligned: bool
    results: dict = field(default_factory=dict)

    def run(self, phase: str):
        p, done = self.purpose, self.results
        if phase == "inception":
            return run_inception(p, self.allow_unaligned)
        if phase == "modeling":
            return run_modeling(p, done["inception"])
        if phase == "alignment":
            inception, modeling = done["inception"], done["modeling"]
            records = [inception.records[d] for d in modeling.datasets]
            return run_alignment(p, modeling.model, inception.kept_ontologies(), records, self.allow_unaligned)
        alignment = done["alignment"]
        return run_integration(p, alignment.etg, alignment.cleaned)


def run_pipeline(
    purpose: Purpose,
    reload: Callable[[], Purpose] | None = None,
    allow_unaligned: bool = False,
    on_decision: Callable[[str, object, GateDecision], None] | None = None,
) -> PipelineResult:
    """Run the four phases, backtracking on failed gates.

    A failed gate re-enters the phase named by its ``backtrack_to`` and runs
    it, and everything after it, in full. Before each re-entry ``reload`` is
    called so edits made to the purpose (or thresholds) take effect. More than
    ``max_backtrack_iterations`` re-entries raise BacktrackExhaustedError
    with the whole decision history.
    """
    state = _State(purpose, allow_unaligned)
    history: list[GateDecision] = []
    reentries = 0
    index = 0
    while index < len(PHASES):
        phase = PHASES[index]
        result, decision = state.run(phase)
        history.append(decision)
        if on_decision is not None:
            on_decision(phase, result, decision)
        if decision.passed:
            state.results[phase] = result
            index += 1
            continue
        log.info("%s gate failed: %s", phase, "; ".join(decision.reasons))
        reentries += 1
        limit = state.purpose.thresholds.max_backtrack_iterations
        if reentries > limit:
            raise BacktrackExhaustedError(
                f"{phase} gate still failing after {limit} re-entries: " + "; ".join(decision.reasons),
                tuple(history),
            )
        if reload is not None:
            state.purpose = reload()
        index = PHASES.index(decision.backtrack_to)
        for later in PHASES[index:]:
            state.results.pop(later, None)

    done = state.results
    return PipelineResult(
        state.purpose,
        tuple(history),
        done["inception"],
        done["modeling"],
        done["alignment"],
        done["integration"],
    )
