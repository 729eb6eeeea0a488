"""Data integration: map cleaned records onto the ETG and merge entities.

Entity ids are ``"{etype}:{key values joined by '|'}"``. Etypes without an
identity rule fall back to all of their non-null data values, and merge with
an existing entity when every data property both sides fill agrees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .alignment import CleanedRecordSet
from .datatypes import canonical_value
from .errors import (
    EtypeUnknownError,
    MissingIdentityError,
    PurposeKGError,
    ValidationError,
)
from .model import ETG, ElementKey, Entity, EntityGraph, IdentityRule

KEY_SEPARATOR = "|"


@dataclass(frozen=True)
class Conflict:
    entity_id: str
    property: str
    kept_value: str
    discarded_value: str
    losing_dataset: str


@dataclass(frozen=True)
class IntegrationStats:
    dataset_id: str
    entities_created: int = 0
    entities_merged: int = 0
    conflicts: tuple[Conflict, ...] = ()
    null_property_count: int = 0
    connectivity: Mapping[str, float] = field(default_factory=dict)
    unresolved_links: int = 0

    def __post_init__(self):
        if min(self.entities_created, self.entities_merged, self.null_property_count, self.unresolved_links) < 0:
            raise ValueError("integration counts must be non-negative")
        if any(not 0.0 <= v <= 1.0 for v in self.connectivity.values()):
            raise ValueError("connectivity ratios must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset_id,
            "entities_created": self.entities_created,
            "entities_merged": self.entities_merged,
            "conflicts": [c.__dict__ for c in self.conflicts],
            "null_property_count": self.null_property_count,
            "connectivity": dict(sorted(self.connectivity.items())),
            "unresolved_links": self.unresolved_links,
        }


def rules_by_etype(rules: Iterable[IdentityRule], etg: ETG | None = None) -> dict[str, IdentityRule]:
    """Index rules by etype.

    Rules are written against model names; with an ``etg`` they are carried
    through its model map and checked against the declared properties.
    """
    out = {}
    for rule in rules:
        etype, keys = rule.etype, rule.key_properties
        if etg is not None:
            mapped = etg.model_map.get(ElementKey(etype))
            if mapped is not None:
                keys = tuple(_translate_prop(etg, etype, k) for k in keys)
                etype = mapped.etype
            declared = etg.etype(etype)
            if declared is None:
                raise ValidationError(f"identity rule names unknown etype {rule.etype!r}")
            for key in keys:
                if declared.property(key) is None:
                    raise ValidationError(f"identity key {etype}.{key} is not declared")
        out[etype] = IdentityRule(etype, keys)
    return out


def _translate_prop(etg: ETG, etype: str, prop: str) -> str:
    mapped = etg.model_map.get((etype, prop))
    return mapped.prop if mapped is not None else prop


def _fallback_id(etype: str, values: Mapping[str, str]) -> str:
    return f"{etype}:" + KEY_SEPARATOR.join(f"{k}={v}" for k, v in sorted(values.items()))


def entity_key(entity_id: str) -> str:
    return entity_id.split(":", 1)[1]


def map_records(cleaned: CleanedRecordSet, etg: ETG, rules: Mapping[str, IdentityRule] | Iterable[IdentityRule] = ()) -> list[Entity]:
    """Turn each cleaned record into one candidate entity per etype it fills.

    Attributes declared as references become object links to the target
    etype's entity keyed by the attribute value.
    """
    if not isinstance(rules, Mapping):
        rules = rules_by_etype(rules, etg)
    dataset_id = cleaned.descriptor.id
    targets = etg.dataset_attributes(dataset_id)
    refs = etg.dataset_references(dataset_id)
    if not targets and not refs:
        raise ValidationError(f"dataset {dataset_id} has no mapping in the ETG")
    ref_types = {}
    for attr, key in refs.items():
        range_etype = etg.etype(key.etype).property(key.prop).range_etype
        rule = rules.get(range_etype)
        if rule is None or len(rule.key_properties) != 1:
            raise ValidationError(
                f"reference {dataset_id}/{attr} targets {range_etype}, which needs a single-key identity rule"
            )
        key_prop = etg.etype(range_etype).property(rule.key_properties[0])
        ref_types[attr] = (range_etype, "string" if key_prop.is_object else key_prop.datatype)

    candidates = []
    for index, record in enumerate(cleaned.records):
        values: dict[str, dict[str, str]] = {}
        links: dict[str, dict[str, set[str]]] = {}
        for attr, key in sorted(targets.items()):
            value = record.get(attr)
            if value is not None:
                values.setdefault(key.etype, {})[key.prop] = value
        for attr, key in sorted(refs.items()):
            value = record.get(attr)
            if value is None:
                continue
            range_etype, datatype = ref_types[attr]
            try:
                value = canonical_value(value, datatype)
            except ValueError:
                pass
            target_id = f"{range_etype}:{value}"
            links.setdefault(key.etype, {}).setdefault(key.prop, set()).add(target_id)

        for etype in sorted(set(values) | set(links)):
            data = values.get(etype, {})
            obj = links.get(etype, {})
            rule = rules.get(etype)
            if rule is not None:
                parts = []
                for prop in rule.key_properties:
                    if prop in data:
                        parts.append(data[prop])
                    elif prop in obj:
                        parts.append(",".join(entity_key(t) for t in sorted(obj[prop])))
                    else:
                        parts.append(None)
                if all(p is None for p in parts):
                    raise MissingIdentityError(
                        f"dataset {dataset_id}, record {index}: {etype} has no value for identity key "
                        f"{', '.join(rule.key_properties)}"
                    )
                entity_id = f"{etype}:" + KEY_SEPARATOR.join(p or "" for p in parts)
            else:
                if not data:
                    continue
                entity_id = _fallback_id(etype, data)
            candidates.append(Entity(entity_id, etype, data, obj))
    return candidates


class _Draft:
    __slots__ = ("etype", "links", "priority", "source", "values")

    def __init__(self, etype):
        self.etype = etype
        self.values: dict[str, str] = {}
        self.priority: dict[str, int] = {}
        self.source: dict[str, str] = {}
        self.links: dict[str, set[str]] = {}


class EntityGraphBuilder:
    """Mutable accumulator for an EntityGraph; one writer at a time."""

    def __init__(self, etg: ETG):
        self.etg = etg
        self.entities: dict[str, _Draft] = {}
        self.log: list[IntegrationStats] = []

    def _find_compatible(self, candidate: Entity) -> str | None:
        for entity_id in sorted(self.entities):
            draft = self.entities[entity_id]
            if draft.etype != candidate.etype:
                continue
            shared = set(draft.values) & set(candidate.filled_values)
            if shared and all(draft.values[p] == candidate.data_values[p] for p in shared):
                return entity_id
        return None

    def null_count(self, entity_id: str) -> int:
        draft = self.entities[entity_id]
        etype = self.etg.etype(draft.etype)
        count = 0
        for prop in etype.properties:
            if prop.is_object:
                count += not draft.links.get(prop.name)
            else:
                count += draft.values.get(prop.name) is None
        return count

    def connectivity(self) -> dict[str, float]:
        totals: dict[str, int] = {}
        linked: dict[str, int] = {}
        for draft in self.entities.values():
            totals[draft.etype] = totals.get(draft.etype, 0) + 1
            if any(t in self.entities for targets in draft.links.values() for t in targets):
                linked[draft.etype] = linked.get(draft.etype, 0) + 1
        return {etype: linked.get(etype, 0) / total for etype, total in sorted(totals.items())}

    def unresolved(self, entity_ids: Iterable[str]) -> int:
        return sum(
            1
            for entity_id in entity_ids
            for targets in self.entities[entity_id].links.values()
            for t in targets
            if t not in self.entities
        )

    def freeze(self, drop_unresolved: bool = True) -> EntityGraph:
        entities = []
        for entity_id, draft in self.entities.items():
            links = {
                prop: {t for t in targets if t in self.entities or not drop_unresolved}
                for prop, targets in draft.links.items()
            }
            links = {p: t for p, t in links.items() if t}
            entities.append(Entity(entity_id, draft.etype, draft.values, links))
        return EntityGraph(self.etg, tuple(entities), tuple(self.log))


def merge_into(
    builder: EntityGraphBuilder,
    candidates: Sequence[Entity],
    rules: Mapping[str, IdentityRule],
    dataset_id: str,
    priority: int,
) -> IntegrationStats:
    """Fold candidates into the builder and report what happened.

    Same id: values are united; where both sides hold different non-null
    values the one from the higher-priority dataset (lower number) stays,
    the first one on a tie, and a conflict is logged. Null never overwrites
    and never conflicts.
    """
    created = merged = 0
    conflicts: list[Conflict] = []
    touched: set[str] = set()
    for candidate in candidates:
        if builder.etg.etype(candidate.etype) is None:
            raise EtypeUnknownError(f"candidate {candidate.id} has etype {candidate.etype!r}, absent from the ETG")
        entity_id = candidate.id
        if entity_id not in builder.entities and candidate.etype not in rules:
            entity_id = builder._find_compatible(candidate) or entity_id
        draft = builder.entities.get(entity_id)
        if draft is None:
            draft = builder.entities[entity_id] = _Draft(candidate.etype)
            created += 1
        else:
            merged += 1
        touched.add(entity_id)

        for prop, value in sorted(candidate.filled_values.items()):
            current = draft.values.get(prop)
            if current is None:
                draft.values[prop] = value
                draft.priority[prop] = priority
                draft.source[prop] = dataset_id
            elif current != value:
                if priority < draft.priority[prop]:
                    conflicts.append(Conflict(entity_id, prop, value, current, draft.source[prop]))
                    draft.values[prop] = value
                    draft.priority[prop] = priority
                    draft.source[prop] = dataset_id
                else:
                    conflicts.append(Conflict(entity_id, prop, current, value, dataset_id))
        for prop, targets in candidate.object_links.items():
            draft.links.setdefault(prop, set()).update(targets)

    stats = IntegrationStats(
        dataset_id=dataset_id,
        entities_created=created,
        entities_merged=merged,
        conflicts=tuple(conflicts),
        null_property_count=sum(builder.null_count(e) for e in touched),
        connectivity=builder.connectivity(),
        unresolved_links=builder.unresolved(touched),
    )
    builder.log.append(stats)
    return stats


def build_eg(
    etg: ETG,
    cleaned_datasets: Sequence[CleanedRecordSet],
    rules: Iterable[IdentityRule] = (),
) -> EntityGraph:
    """Integrate datasets one after another in ascending priority number."""
    if not cleaned_datasets:
        raise ValidationError("build_eg needs at least one cleaned dataset")
    indexed = rules_by_etype(rules, etg)
    builder = EntityGraphBuilder(etg)
    for cleaned in sorted(cleaned_datasets, key=lambda c: c.descriptor.priority):
        dataset_id = cleaned.descriptor.id
        try:
            candidates = map_records(cleaned, etg, indexed)
            merge_into(builder, candidates, indexed, dataset_id, cleaned.descriptor.priority)
        except PurposeKGError as exc:
            raise type(exc)(f"dataset {dataset_id}: {exc}") from exc
    return builder.freeze()
