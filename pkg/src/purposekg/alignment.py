"""Knowledge alignment: ontology selection, etype recognition, ETG generation
and dataset cleaning.

Etype recognition is a deterministic scorer::

    score(m, o) = name_weight * name_similarity(m, o)
                + property_weight * jaccard(props(m), props(o))

Name similarity is normalized Levenshtein, short-circuited to 1 by an
explicit etype alias. Property names are compared after alias substitution
and after dropping a leading ``<etype>_`` prefix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .datatypes import canonical_value, is_sentinel
from .errors import MappingLossError, NoOntologyError, ValidationError
from .ingest import OntologyDocument, RecordSet
from .metrics import MetricValue, coverage
from .model import (
    DEFAULT_DATE_PATTERNS,
    ETG,
    Category,
    DatasetDescriptor,
    ElementKey,
    ETGModel,
    EType,
    GateThresholds,
    OntologyAliases,
    PropertyDef,
    ontology_provenance,
)
from .similarity import comparable_property_names, jaccard, label_similarity

log = logging.getLogger(__name__)


def _fraction(value) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(str(value))


def name_similarity(model_etype: str, ontology_etype: str, aliases: OntologyAliases | None = None) -> Fraction:
    if aliases is not None and aliases.etypes.get(model_etype) == ontology_etype:
        return Fraction(1)
    return label_similarity(model_etype, ontology_etype)


def shared_properties(model_etype: EType, ontology_etype: EType, aliases: OntologyAliases | None = None):
    """Pairs (model property, ontology property) whose comparable names agree."""
    model_names = comparable_property_names(
        model_etype.name, model_etype.properties, aliases.properties if aliases else None
    )
    onto_names = comparable_property_names(ontology_etype.name, ontology_etype.properties)
    by_comparable: dict[str, str] = {}
    for onto_prop, comparable in sorted(onto_names.items()):
        by_comparable.setdefault(comparable, onto_prop)
    pairs, taken = [], set()
    for model_prop, comparable in sorted(model_names.items()):
        onto_prop = by_comparable.get(comparable)
        if onto_prop is not None and onto_prop not in taken:
            pairs.append((model_prop, onto_prop))
            taken.add(onto_prop)
    return pairs


def etr_score(
    model_etype: EType,
    ontology_etype: EType,
    aliases: OntologyAliases | None = None,
    name_weight=Fraction(2, 5),
    property_weight=Fraction(3, 5),
) -> Fraction:
    model_names = set(
        comparable_property_names(
            model_etype.name, model_etype.properties, aliases.properties if aliases else None
        ).values()
    )
    onto_names = set(comparable_property_names(ontology_etype.name, ontology_etype.properties).values())
    return _fraction(name_weight) * name_similarity(model_etype.name, ontology_etype.name, aliases) + _fraction(
        property_weight
    ) * jaccard(model_names, onto_names)


@dataclass(frozen=True)
class PredictionVector:
    ontology: str
    entries: tuple[tuple[str, str, Fraction], ...]
    assignments: Mapping[str, str]
    acceptance_threshold: Fraction

    def score(self, model_etype: str, ontology_etype: str) -> Fraction | None:
        for m, o, s in self.entries:
            if (m, o) == (model_etype, ontology_etype):
                return s
        return None

    def to_dict(self) -> dict:
        return {
            "ontology": self.ontology,
            "acceptance_threshold": float(self.acceptance_threshold),
            "assignments": dict(sorted(self.assignments.items())),
            "entries": [{"model": m, "ontology": o, "score": round(float(s), 6)} for m, o, s in self.entries],
        }


def etr_predict(
    model,
    ontology: OntologyDocument,
    aliases: OntologyAliases | None = None,
    name_weight=0.4,
    property_weight=0.6,
    acceptance_threshold=0.5,
) -> PredictionVector:
    """Score every (model etype, ontology etype) pair and assign greedily.

    Pairs are taken in descending score order (ties by model then ontology
    name); each etype is used at most once and pairs below the acceptance
    threshold stay unassigned.
    """
    threshold = _fraction(acceptance_threshold)
    entries = []
    for m in model.etypes:
        for o in ontology.etypes:
            entries.append((m.name, o.name, etr_score(m, o, aliases, name_weight, property_weight)))
    assignments: dict[str, str] = {}
    taken = set()
    for m, o, score in sorted(entries, key=lambda e: (-e[2], e[0], e[1])):
        if score < threshold or m in assignments or o in taken:
            continue
        assignments[m] = o
        taken.add(o)
    return PredictionVector(ontology.name, tuple(entries), assignments, threshold)


def property_shareability(
    ontology_etype: EType, model_etype: EType, aliases: OntologyAliases | None = None
) -> MetricValue:
    """Fraction of the model etype's properties that the ontology etype shares."""
    model_keys = {p.name for p in model_etype.properties}
    shared = {m for m, _ in shared_properties(model_etype, ontology_etype, aliases)}
    return coverage(model_keys, shared).renamed("property_shareability")


def etype_overlap(
    ontology: OntologyDocument,
    model,
    aliases: OntologyAliases | None = None,
    name_weight=0.4,
    property_weight=0.6,
    acceptance_threshold=0.5,
    predictions: PredictionVector | None = None,
) -> MetricValue:
    """Share of model etypes that find a counterpart in ``ontology``."""
    if predictions is None:
        predictions = etr_predict(model, ontology, aliases, name_weight, property_weight, acceptance_threshold)
    model_names = {e.name for e in model.etypes}
    return coverage(model_names, set(predictions.assignments)).renamed("etype_overlap")


@dataclass(frozen=True)
class OntologyRanking:
    ontology: OntologyDocument
    overlap: MetricValue
    shareability: Fraction
    predictions: PredictionVector
    noncontextual_overlap: float | None = None

    @property
    def name(self) -> str:
        return self.ontology.name

    def to_dict(self) -> dict:
        return {
            "ontology": self.name,
            "etype_overlap": float(self.overlap),
            "mean_property_shareability": float(self.shareability),
            "noncontextual_overlap": self.noncontextual_overlap,
            "assignments": dict(sorted(self.predictions.assignments.items())),
        }


def rank_ontology(model, ontology: OntologyDocument, aliases=None, options=None) -> OntologyRanking:
    kwargs = {}
    if options is not None:
        kwargs = dict(
            name_weight=options.name_weight,
            property_weight=options.property_weight,
            acceptance_threshold=options.acceptance_threshold,
        )
    predictions = etr_predict(model, ontology, aliases, **kwargs)
    overlap = etype_overlap(ontology, model, aliases, predictions=predictions)
    shares = [
        property_shareability(ontology.etype(o), model.etype(m), aliases).value
        for m, o in predictions.assignments.items()
        if model.etype(m).properties
    ]
    mean_share = sum(shares, Fraction(0)) / len(shares) if shares else Fraction(0)
    noncontextual = {e.name for e in model.etypes if e.category != Category.CONTEXTUAL}
    noncontextual_overlap = (
        float(coverage(noncontextual, set(predictions.assignments))) if noncontextual else None
    )
    return OntologyRanking(ontology, overlap, mean_share, predictions, noncontextual_overlap)


def select_ontologies(
    model,
    ontologies: Sequence[OntologyDocument],
    thresholds: GateThresholds,
    aliases: OntologyAliases | None = None,
    options=None,
) -> list[OntologyRanking]:
    """Rank ontologies by (etype overlap, mean shareability), best first.

    Contextual model etypes stay in the overlap denominator; the ranking only
    reports the overlap without them as a side figure.
    """
    if not ontologies:
        raise NoOntologyError("no reference ontology was provided")
    ranked = []
    for ontology in ontologies:
        ranking = rank_ontology(model, ontology, aliases, options)
        if ranking.overlap.value <= 0:
            continue
        if ranking.overlap.value < _fraction(thresholds.ontology_overlap):
            continue
        if ranking.shareability < _fraction(thresholds.ontology_shareability):
            continue
        ranked.append(ranking)
    if not ranked:
        raise NoOntologyError("no ontology meets the overlap and shareability thresholds")
    ranked.sort(key=lambda r: (-r.overlap.value, -r.shareability, r.name))
    return ranked


def generate_etg(
    model: ETGModel,
    predictions: Sequence[PredictionVector],
    ontologies: Sequence[OntologyDocument],
    aliases: OntologyAliases | None = None,
) -> ETG:
    """Compose the final ETG from the model and the ranked predictions.

    ``predictions`` are in ontology rank order; the first ontology that
    assigns a model etype wins it. Assigned etypes take the ontology name and
    the names of shared properties; everything else is carried from the model
    with provenance ``model``. Raises MappingLossError when a dataset mapping
    cannot be carried over or two elements would collapse into one name.
    """
    by_name = {o.name: o for o in ontologies}
    etype_map: dict[str, str] = {}
    adopted_from: dict[str, tuple[OntologyDocument, EType]] = {}
    for etype in model.etypes:
        for vector in predictions:
            target = vector.assignments.get(etype.name)
            if target is None:
                continue
            ontology = by_name.get(vector.ontology)
            if ontology is None:
                raise ValidationError(f"prediction refers to unknown ontology {vector.ontology!r}")
            adopted_from[etype.name] = (ontology, ontology.etype(target))
            etype_map[etype.name] = target
            break
        else:
            etype_map[etype.name] = etype.name

    clashes = _clashes(etype_map)
    if clashes:
        raise MappingLossError(_loss_message(model, clashes, "etype names collide: "))

    model_map: dict[ElementKey, ElementKey] = {}
    conflicts: list[str] = []
    etg_etypes = []
    for etype in model.etypes:
        new_name = etype_map[etype.name]
        model_map[ElementKey(etype.name)] = ElementKey(new_name)
        source = adopted_from.get(etype.name)
        shared = dict(shared_properties(etype, source[1], aliases)) if source else {}
        prop_map: dict[str, str] = {}
        props = []
        for prop in etype.properties:
            onto_prop = source[1].property(shared[prop.name]) if prop.name in shared else None
            if onto_prop is not None and onto_prop.kind != prop.kind:
                conflicts.append(
                    f"{etype.name}.{prop.name}: ontology {onto_prop.name} is a {onto_prop.kind} property; kept model"
                )
                onto_prop = None
            range_etype = etype_map.get(prop.range_etype) if prop.is_object else None
            if onto_prop is None:
                name, provenance = prop.name, "model"
            else:
                name, provenance = onto_prop.name, ontology_provenance(source[0].name)
                if not prop.is_object and onto_prop.datatype != prop.datatype:
                    conflicts.append(
                        f"{new_name}.{name}: ontology datatype {onto_prop.datatype}, model {prop.datatype}; model wins"
                    )
                if prop.is_object and onto_prop.range_etype != range_etype:
                    conflicts.append(
                        f"{new_name}.{name}: ontology range {onto_prop.range_etype}, model {range_etype}; model wins"
                    )
            prop_map[prop.name] = name
            props.append(
                PropertyDef(name, prop.kind, prop.datatype, range_etype, prop.category, provenance)
            )
        clashes = _clashes(prop_map)
        if clashes:
            lost = {ElementKey(etype.name, p): ElementKey(new_name, n) for p, n in clashes}
            raise MappingLossError(_loss_message(model, lost, f"properties of {new_name} collide: "))
        for old, new in prop_map.items():
            model_map[ElementKey(etype.name, old)] = ElementKey(new_name, new)
        if source:
            etg_etypes.append(
                EType(new_name, tuple(props), etype.category, ontology_provenance(source[0].name), source[1].label)
            )
        else:
            etg_etypes.append(EType(new_name, tuple(props), etype.category, "model", etype.label))

    mapping, references = {}, {}
    lost = []
    for target, source_map in ((mapping, model.mapping), (references, model.references)):
        for (dataset_id, attr), key in sorted(source_map.items()):
            new_key = model_map.get(key)
            if new_key is None:
                lost.append(f"{dataset_id}/{attr} -> {key}")
            else:
                target[(dataset_id, attr)] = new_key
    if lost:
        raise MappingLossError("dataset mappings lost their target: " + ", ".join(lost))

    return ETG(
        etypes=tuple(etg_etypes),
        mapping_preservation=mapping,
        references=references,
        model_map=model_map,
        datatype_conflicts=tuple(conflicts),
    )


def _clashes(name_map: Mapping) -> list:
    seen: dict[str, object] = {}
    clashes = []
    for old, new in sorted(name_map.items()):
        if new in seen:
            clashes.append((old, new))
            clashes.append((seen[new], new))
        else:
            seen[new] = old
    return clashes


def _loss_message(model: ETGModel, clashes, prefix: str) -> str:
    if isinstance(clashes, dict):
        pairs = clashes.items()
    else:
        pairs = [(ElementKey(old), ElementKey(new)) for old, new in clashes]
    lost_keys = {k for k, _ in pairs}
    parts = [f"{old} -> {new}" for old, new in sorted(pairs)]
    attrs = sorted(
        f"{d}/{a}"
        for (d, a), key in list(model.mapping.items()) + list(model.references.items())
        if key in lost_keys or ElementKey(key.etype) in lost_keys
    )
    message = prefix + ", ".join(parts)
    if attrs:
        message += "; affected dataset attributes: " + ", ".join(attrs)
    return message


def model_only_etg(model: ETGModel) -> ETG:
    """ETG equal to the model, used when alignment is skipped."""
    return generate_etg(model, [], [])


# -- dataset cleaning ------------------------------------------------------


@dataclass(frozen=True)
class RejectedValue:
    record_index: int
    attribute: str
    raw_value: str
    reason: str


@dataclass(frozen=True)
class CleanedRecordSet:
    """Records restricted to mapped attributes, values in canonical form or None."""

    descriptor: DatasetDescriptor
    records: tuple[Mapping[str, str | None], ...]
    rejected_values: tuple[RejectedValue, ...] = ()

    def __len__(self):
        return len(self.records)

    def to_dict(self) -> dict:
        return {
            "dataset": self.descriptor.id,
            "priority": self.descriptor.priority,
            "records": [dict(sorted(r.items())) for r in self.records],
            "rejected_values": [
                {"record": r.record_index, "attribute": r.attribute, "value": r.raw_value, "reason": r.reason}
                for r in self.rejected_values
            ],
        }


def clean_dataset(records: RecordSet, etg: ETG, date_patterns=DEFAULT_DATE_PATTERNS) -> CleanedRecordSet:
    """Trim, null out sentinels and bring mapped values to the ETG datatypes.

    Sentinels (``""``, ``N/A``, ``-``, ``unknown``, ``null``, any case) and
    unparseable values become None and are logged; the file never fails as a
    whole.
    """
    dataset_id = records.descriptor.id
    targets = etg.dataset_attributes(dataset_id)
    refs = etg.dataset_references(dataset_id)
    if not targets and not refs:
        raise ValidationError(f"dataset {dataset_id} has no mapping in the ETG")
    datatypes = {}
    for attr, key in targets.items():
        prop = etg.etype(key.etype).property(key.prop)
        datatypes[attr] = "string" if prop.is_object else prop.datatype
    for attr in refs:
        datatypes.setdefault(attr, "string")

    cleaned, rejected = [], []
    for index, record in enumerate(records.records):
        row: dict[str, str | None] = {}
        for attr, datatype in sorted(datatypes.items()):
            if attr not in record:
                continue
            raw = record[attr]
            if is_sentinel(raw):
                row[attr] = None
                rejected.append(RejectedValue(index, attr, raw, "sentinel"))
                continue
            try:
                row[attr] = canonical_value(raw, datatype, date_patterns)
            except ValueError as exc:
                row[attr] = None
                rejected.append(RejectedValue(index, attr, raw, str(exc)))
        cleaned.append(row)
    return CleanedRecordSet(records.descriptor, tuple(cleaned), tuple(rejected))
