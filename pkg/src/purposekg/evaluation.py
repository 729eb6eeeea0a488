"""The four evaluation gates and the data-quality report.

Each gate first reduces its inputs to a flat dict of named metrics and then
judges that dict against the thresholds. Judging is a pure function of the
two, so a recorded decision can be replayed with :func:`judge`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .inception import MatchReport, cq_property_categories
from .integration import IntegrationStats
from .metrics import coverage, extensiveness, sparsity
from .model import (
    ETG,
    Category,
    CompetencyQuery,
    ElementKey,
    EntityGraph,
    EType,
    GateDecision,
    GateThresholds,
    element_set_of,
    is_ontology_provenance,
)

BACKTRACK = {
    "inception": "inception",
    "modeling": "inception",
    "alignment": "modeling",
    "integration": "alignment",
}

SPARSITY_PREFIX = "sparsity:"
COUNT_METRICS = frozenset(
    {"datasets_kept", "ontologies_kept", "datasets_selected", "ontologies_selected", "cqs_answerable", "cqs_total",
     "unaligned_allowed", "etg_generated"}
)


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def _judge_inception(metrics, t: GateThresholds) -> list[str]:
    reasons = []
    for category in Category.by_reusability():
        name = f"coverage_{category}"
        if name in metrics and metrics[name] < t.coverage_for(category):
            reasons.append(f"{category} coverage {_fmt(metrics[name])} < {t.coverage_for(category)}")
    if metrics.get("datasets_kept", 0) < 1:
        reasons.append("no dataset kept")
    if metrics.get("ontologies_kept", 0) < 1 and not metrics.get("unaligned_allowed"):
        reasons.append("no reference ontology kept")
    return reasons


def _judge_modeling(metrics, t: GateThresholds) -> list[str]:
    reasons = []
    if metrics["extensiveness"] > t.extensiveness_max:
        reasons.append(f"extensiveness {_fmt(metrics['extensiveness'])} > {t.extensiveness_max}")
    if metrics.get("datasets_selected", 0) < 1:
        reasons.append("no dataset matches the model")
    return reasons


def _judge_alignment(metrics, t: GateThresholds) -> list[str]:
    reasons = []
    if not metrics.get("etg_generated", 1):
        return ["no ETG could be generated"]
    if metrics.get("ontologies_selected", 0) < 1:
        if not metrics.get("unaligned_allowed"):
            reasons.append("no ontology selected")
        return reasons
    for name, value in sorted(metrics.items()):
        if name.startswith(SPARSITY_PREFIX) and value < t.sparsity_min:
            reasons.append(f"sparsity against {name[len(SPARSITY_PREFIX):]} {_fmt(value)} < {t.sparsity_min}")
    for category, minimum in (("common", t.adoption_common), ("core", t.adoption_core)):
        name = f"adoption_{category}"
        if name in metrics and metrics[name] < minimum:
            reasons.append(f"{category} adoption {_fmt(metrics[name])} < {minimum}")
    return reasons


def _judge_integration(metrics, t: GateThresholds) -> list[str]:
    if metrics["answerability"] < t.answerability:
        return [f"answerability {_fmt(metrics['answerability'])} < {t.answerability}"]
    return []


_JUDGES = {
    "inception": _judge_inception,
    "modeling": _judge_modeling,
    "alignment": _judge_alignment,
    "integration": _judge_integration,
}


def judge(phase: str, metrics: Mapping[str, float], thresholds: GateThresholds, notes: Iterable[str] = ()) -> GateDecision:
    """Turn recorded metrics into a decision. ``notes`` only add context."""
    failures = _JUDGES[phase](metrics, thresholds)
    if failures:
        return GateDecision(phase, metrics, "fail", BACKTRACK[phase], tuple(failures) + tuple(notes))
    return GateDecision(phase, metrics, "pass", None, tuple(notes))


def replay(decision: GateDecision, thresholds: GateThresholds) -> GateDecision:
    return judge(decision.phase, decision.metrics, thresholds)


# -- gates -------------------------------------------------------------------


def report_passes(report: MatchReport, thresholds: GateThresholds) -> bool:
    return any(
        m.value > 0 and float(m) >= thresholds.coverage_for(c) for c, m in report.coverage.items()
    )


def eval_inception(
    cq_elements: Sequence[EType],
    match_reports: Sequence[MatchReport],
    ontology_overlaps: Mapping[str, object],
    thresholds: GateThresholds,
    allow_unaligned: bool = False,
) -> GateDecision:
    """Coverage of the CQ elements by the union of the kept dataset schemas,
    per category, plus at least one kept ontology."""
    categories = cq_property_categories(cq_elements)
    kept = [r for r in match_reports if report_passes(r, thresholds)]
    covered = frozenset().union(*(r.covered for r in kept))
    metrics: dict[str, float] = {}
    for category in Category.by_reusability():
        keys = {k for k, c in categories.items() if c == category}
        if keys:
            metrics[f"coverage_{category}"] = float(coverage(keys, covered))
    metrics["datasets_kept"] = len(kept)
    metrics["ontologies_kept"] = sum(
        1 for m in ontology_overlaps.values() if float(m) > 0 and float(m) >= thresholds.ontology_overlap
    )
    metrics["unaligned_allowed"] = float(allow_unaligned)
    notes = [f"kept dataset {r.dataset_id}" for r in kept]
    return judge("inception", metrics, thresholds, notes)


def eval_modeling(
    model,
    cq_elements: Sequence[EType],
    kept_datasets: Sequence,
    thresholds: GateThresholds,
    error: Exception | None = None,
) -> GateDecision:
    """How far the model extends the CQ elements, and whether any dataset fits it."""
    ext = extensiveness(element_set_of(cq_elements), element_set_of(model))
    metrics = {"extensiveness": float(ext), "datasets_selected": len(kept_datasets)}
    notes = [str(error)] if error is not None else []
    return judge("modeling", metrics, thresholds, notes)


def adoption(etg: ETG, category: Category) -> float | None:
    """Fraction of the ETG's etypes and properties of ``category`` taken from an ontology."""
    total = adopted = 0
    for etype in etg.etypes:
        items = [etype] if etype.category == category else []
        items += [p for p in etype.properties if p.category == category]
        for item in items:
            total += 1
            adopted += is_ontology_provenance(item.provenance)
    return adopted / total if total else None


def eval_alignment(
    etg: ETG,
    ontologies: Sequence,
    thresholds: GateThresholds,
    allow_unaligned: bool = False,
    error: Exception | None = None,
) -> GateDecision:
    """Sparsity against each selected ontology plus Common/Core adoption ratios."""
    metrics: dict[str, float] = {
        "ontologies_selected": len(ontologies),
        "unaligned_allowed": float(allow_unaligned),
        "etg_generated": float(etg is not None),
    }
    if etg is not None:
        etg_elements = element_set_of(etg)
        for ontology in ontologies:
            metrics[SPARSITY_PREFIX + ontology.name] = float(sparsity(etg_elements, element_set_of(ontology)))
        for category in (Category.COMMON, Category.CORE):
            value = adoption(etg, category)
            if value is not None:
                metrics[f"adoption_{category}"] = value
    notes = [str(error)] if error is not None else []
    return judge("alignment", metrics, thresholds, notes)


def _etg_etype(etg: ETG, name: str) -> str:
    mapped = etg.model_map.get(ElementKey(name))
    return mapped.etype if mapped is not None else name


def _etg_key(etg: ETG, key: ElementKey) -> ElementKey:
    return etg.model_map.get(key, key)


def answerable(eg: EntityGraph, cq: CompetencyQuery) -> bool:
    """True when every etype of the CQ has an entity filling its required properties."""
    etg = eg.etg
    required: dict[str, list[str]] = {}
    for key in cq.required_for_answer:
        translated = _etg_key(etg, key)
        required.setdefault(translated.etype, []).append(translated.prop)
    for etype in cq.elements:
        name = _etg_etype(etg, etype.name)
        props = required.get(name, [])
        if not any(
            all(e.data_values.get(p) is not None or e.object_links.get(p) for p in props)
            for e in eg.of_etype(name)
        ):
            return False
    return True


def eval_integration(eg: EntityGraph, cqs: Sequence[CompetencyQuery], thresholds: GateThresholds) -> GateDecision:
    """Fraction of CQs the graph can answer."""
    answered = [cq for cq in cqs if answerable(eg, cq)]
    missing = [cq.id for cq in cqs if cq not in answered]
    metrics = {
        "answerability": len(answered) / len(cqs) if cqs else 0.0,
        "cqs_answerable": len(answered),
        "cqs_total": len(cqs),
    }
    notes = [f"CQ {i} is not answerable" for i in missing]
    return judge("integration", metrics, thresholds, notes)


# -- data quality ----------------------------------------------------------------


@dataclass(frozen=True)
class DataQualityReport:
    datasets: tuple[IntegrationStats, ...]
    conflict_count: int
    null_ratio: float
    connectivity: float
    etype_connectivity: Mapping[str, float]
    entity_count: int

    def __post_init__(self):
        ratios = [self.null_ratio, self.connectivity, *self.etype_connectivity.values()]
        if any(not 0.0 <= r <= 1.0 for r in ratios):
            raise ValueError("data quality ratios must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "datasets": [s.to_dict() for s in self.datasets],
            "conflict_count": self.conflict_count,
            "null_ratio": self.null_ratio,
            "connectivity": self.connectivity,
            "etype_connectivity": dict(sorted(self.etype_connectivity.items())),
            "entity_count": self.entity_count,
        }


def data_quality(eg: EntityGraph) -> DataQualityReport:
    declared = nulls = linked = 0
    per_etype: dict[str, list[int]] = {}
    for entity in eg.entities:
        etype = eg.etg.etype(entity.etype)
        for prop in etype.properties:
            declared += 1
            if prop.is_object:
                nulls += not entity.object_links.get(prop.name)
            else:
                nulls += entity.data_values.get(prop.name) is None
        has_link = entity.link_count > 0
        linked += has_link
        counts = per_etype.setdefault(entity.etype, [0, 0])
        counts[0] += has_link
        counts[1] += 1
    total = len(eg.entities)
    return DataQualityReport(
        datasets=tuple(eg.integration_log),
        conflict_count=sum(len(s.conflicts) for s in eg.integration_log),
        null_ratio=nulls / declared if declared else 0.0,
        connectivity=linked / total if total else 0.0,
        etype_connectivity={name: c[0] / c[1] for name, c in sorted(per_etype.items())},
        entity_count=total,
    )
