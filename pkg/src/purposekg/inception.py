"""Inception: CQ elements, dataset schema matching and resource collection."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError
from .metrics import MetricValue, coverage
from .model import (
    AliasMap,
    Category,
    CompetencyQuery,
    DatasetDescriptor,
    ElementKey,
    EType,
    GateThresholds,
    PropertyDef,
    element_set_of,
)
from .similarity import label_similarity

log = logging.getLogger(__name__)

__all__ = [
    "AliasMap",
    "MatchReport",
    "ResourceSelection",
    "collect_resources",
    "extract_elements",
    "match_schema",
]


def _merge_property(a: PropertyDef, b: PropertyDef, owner: str) -> PropertyDef:
    if a.kind != b.kind or a.range_etype != b.range_etype:
        raise ValidationError(f"{owner}.{a.name} is annotated inconsistently across CQs")
    datatype = a.datatype
    if a.datatype != b.datatype:
        # an explicit datatype beats the implicit string default
        explicit = {a.datatype, b.datatype} - {"string", None}
        if len(explicit) != 1:
            raise ValidationError(f"{owner}.{a.name} has conflicting datatypes {a.datatype}/{b.datatype}")
        datatype = explicit.pop()
    return PropertyDef(a.name, a.kind, datatype, a.range_etype, max(a.category, b.category), "cq")


def extract_elements(cqs: Iterable[CompetencyQuery]) -> tuple[EType, ...]:
    """Union the etypes and properties annotated on ``cqs``.

    An element mentioned by several CQs takes the most reusable of their
    categories. The result does not depend on CQ order.
    """
    cqs = list(cqs)
    if not cqs:
        raise ValidationError("no competency queries to extract elements from")
    seen_ids = set()
    categories: dict[str, Category] = {}
    labels: dict[str, list[str]] = {}
    props: dict[str, dict[str, PropertyDef]] = {}
    for cq in cqs:
        if cq.id in seen_ids:
            raise ValidationError(f"duplicate CQ id {cq.id}")
        seen_ids.add(cq.id)
        declared = element_set_of(cq.elements)
        for key in cq.required_for_answer:
            if key not in declared:
                raise ValidationError(f"CQ {cq.id}: {key} is required but its etype is not annotated")
        for etype in cq.elements:
            categories[etype.name] = max(categories.get(etype.name, cq.category), cq.category)
            labels.setdefault(etype.name, []).append(etype.label)
            bucket = props.setdefault(etype.name, {})
            for prop in etype.properties:
                if prop.name in bucket:
                    bucket[prop.name] = _merge_property(bucket[prop.name], prop, etype.name)
                else:
                    bucket[prop.name] = prop
    return tuple(
        EType(name, tuple(props[name].values()), categories[name], "cq", min(labels[name]))
        for name in sorted(categories)
    )


def cq_property_categories(cq_elements: Iterable[EType]) -> dict[ElementKey, Category]:
    return {ElementKey(e.name, p.name): p.category for e in cq_elements for p in e.properties}


@dataclass(frozen=True)
class MatchReport:
    """How one dataset schema lines up with the CQ elements.

    ``pairs`` are one-to-one ``(attribute, element, method)`` triples with
    method one of ``alias``, ``name`` or ``similarity``. ``references`` name
    attributes that feed object properties and count toward coverage without
    consuming a pair.
    """

    dataset_id: str
    coverage: Mapping[Category, MetricValue]
    overall: MetricValue | None
    pairs: tuple[tuple[str, ElementKey, str], ...]
    references: tuple[tuple[str, ElementKey], ...] = ()
    extensions: tuple[tuple[str, ElementKey], ...] = ()
    unmatched_elements: tuple[ElementKey, ...] = ()
    unmatched_attributes: tuple[str, ...] = ()

    @property
    def covered(self) -> frozenset[ElementKey]:
        return frozenset(k for _, k, _ in self.pairs) | frozenset(k for _, k in self.references)

    @property
    def attribute_targets(self) -> dict[str, ElementKey]:
        return {a: k for a, k, _ in self.pairs}

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset_id,
            "coverage": {str(c): float(m) for c, m in sorted(self.coverage.items(), reverse=True)},
            "overall_coverage": float(self.overall) if self.overall else None,
            "pairs": [{"attribute": a, "element": str(k), "method": m} for a, k, m in self.pairs],
            "references": [{"attribute": a, "element": str(k)} for a, k in self.references],
            "extensions": [{"attribute": a, "element": str(k)} for a, k in self.extensions],
            "unmatched_elements": [str(k) for k in self.unmatched_elements],
            "unmatched_attributes": list(self.unmatched_attributes),
        }


def match_schema(
    cq_elements: Sequence[EType],
    descriptor: DatasetDescriptor,
    aliases: AliasMap | None = None,
    threshold: float = 0.75,
) -> MatchReport:
    """Match dataset attributes to CQ properties.

    An attribute is paired by alias first, then by equal normalized name, then
    by label similarity >= ``threshold``. Name and similarity matching run
    category by category, most reusable first.
    """
    if not cq_elements:
        raise ValidationError("match_schema needs at least one CQ element")
    aliases = aliases or AliasMap()
    if aliases.similarity_threshold is not None:
        threshold = aliases.similarity_threshold
    categories = cq_property_categories(cq_elements)
    object_props = {ElementKey(e.name, p.name) for e in cq_elements for p in e.object_properties}
    attributes = sorted(descriptor.schema)
    attribute_set = set(attributes)

    pairs: list[tuple[str, ElementKey, str]] = []
    used_attrs: set[str] = set()
    used_keys: set[ElementKey] = set()

    for attr, key in sorted(aliases.entries.items()):
        if key not in categories:
            raise ValidationError(f"dataset {descriptor.id}: alias {attr} -> {key} targets no CQ property")
        if key in used_keys:
            raise ValidationError(f"dataset {descriptor.id}: two aliases target {key}")
        if attr not in attribute_set:
            log.info("dataset %s: alias for absent attribute %r ignored", descriptor.id, attr)
            continue
        pairs.append((attr, key, "alias"))
        used_attrs.add(attr)
        used_keys.add(key)

    extensions = []
    for attr, key in sorted(aliases.extensions.items()):
        if attr in attribute_set and attr not in used_attrs:
            extensions.append((attr, key))
            used_attrs.add(attr)

    references = []
    for attr, key in sorted(aliases.references.items()):
        if key not in object_props:
            raise ValidationError(f"dataset {descriptor.id}: reference {attr} -> {key} is not a CQ object property")
        if attr in attribute_set:
            references.append((attr, key))

    by_category = {c: sorted(k for k, kc in categories.items() if kc == c) for c in Category}
    for category in Category.by_reusability():
        for key in by_category[category]:
            if key in used_keys or key.prop not in attribute_set or key.prop in used_attrs:
                continue
            pairs.append((key.prop, key, "name"))
            used_attrs.add(key.prop)
            used_keys.add(key)

    for category in Category.by_reusability():
        candidates = []
        for key in by_category[category]:
            if key in used_keys:
                continue
            for attr in attributes:
                if attr in used_attrs:
                    continue
                score = label_similarity(attr, key.prop)
                if score >= threshold:
                    candidates.append((-score, key, attr))
        for _, key, attr in sorted(candidates):
            if key in used_keys or attr in used_attrs:
                continue
            pairs.append((attr, key, "similarity"))
            used_attrs.add(attr)
            used_keys.add(key)

    covered = used_keys | {k for _, k in references}
    per_category = {}
    for category, keys in by_category.items():
        if keys:
            per_category[category] = coverage(set(keys), covered)
    overall = coverage(set(categories), covered) if categories else None
    return MatchReport(
        dataset_id=descriptor.id,
        coverage=per_category,
        overall=overall,
        pairs=tuple(sorted(pairs)),
        references=tuple(references),
        extensions=tuple(extensions),
        unmatched_elements=tuple(sorted(set(categories) - covered)),
        unmatched_attributes=tuple(a for a in attributes if a not in used_attrs and a not in dict(references)),
    )


@dataclass(frozen=True)
class ResourceSelection:
    """Datasets and ontologies kept after inception, with the reason for each call."""

    kept_datasets: tuple[str, ...]
    dropped_datasets: Mapping[str, str]
    kept_ontologies: tuple[str, ...]
    dropped_ontologies: Mapping[str, str]
    reasons: Mapping[str, str] = field(default_factory=dict)
    reports: Mapping[str, MatchReport] = field(default_factory=dict)
    descriptors: Mapping[str, DatasetDescriptor] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kept_datasets": list(self.kept_datasets),
            "dropped_datasets": dict(self.dropped_datasets),
            "kept_ontologies": list(self.kept_ontologies),
            "dropped_ontologies": dict(self.dropped_ontologies),
            "reasons": dict(self.reasons),
        }


def _fmt(value) -> str:
    return f"{float(value):.3f}"


def collect_resources(
    descriptors: Sequence[DatasetDescriptor],
    match_reports: Sequence[MatchReport],
    ontology_overlaps: Mapping[str, MetricValue],
    thresholds: GateThresholds,
) -> ResourceSelection:
    """Keep datasets that meet a category coverage minimum and ontologies that
    meet the etype-overlap minimum.

    Categories are visited most reusable first; a dataset is kept by the first
    category it satisfies.
    """
    reports = {r.dataset_id: r for r in match_reports}
    by_id = {d.id: d for d in descriptors}
    missing = set(by_id) - set(reports)
    if missing:
        raise ValidationError(f"no match report for datasets {sorted(missing)}")

    kept, reasons = [], {}
    for category in Category.by_reusability():
        minimum = thresholds.coverage_for(category)
        for dataset_id in sorted(reports, key=lambda d: by_id[d].priority):
            if dataset_id in kept:
                continue
            value = reports[dataset_id].coverage.get(category)
            if value is not None and value.value > 0 and value.value >= Fraction(str(minimum)):
                kept.append(dataset_id)
                reasons[dataset_id] = f"{category} coverage {_fmt(value)} >= {minimum}"

    dropped = {}
    for dataset_id, report in reports.items():
        if dataset_id in kept:
            continue
        if all(m.value == 0 for m in report.coverage.values()):
            dropped[dataset_id] = "no CQ overlap"
        else:
            parts = [
                f"{c} {_fmt(m)} < {thresholds.coverage_for(c)}"
                for c, m in sorted(report.coverage.items(), reverse=True)
            ]
            dropped[dataset_id] = "coverage below threshold: " + ", ".join(parts)

    kept_ontologies, dropped_ontologies = [], {}
    for name, overlap in ontology_overlaps.items():
        if overlap.value > 0 and overlap.value >= Fraction(str(thresholds.ontology_overlap)):
            kept_ontologies.append(name)
            reasons[name] = f"etype overlap {_fmt(overlap)} >= {thresholds.ontology_overlap}"
        else:
            dropped_ontologies[name] = f"etype overlap {_fmt(overlap)} < {thresholds.ontology_overlap}"

    return ResourceSelection(
        kept_datasets=tuple(sorted(kept, key=lambda d: by_id[d].priority)),
        dropped_datasets=dropped,
        kept_ontologies=tuple(kept_ontologies),
        dropped_ontologies=dropped_ontologies,
        reasons=reasons,
        reports=reports,
        descriptors=by_id,
    )
