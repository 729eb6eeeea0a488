"""Modeling: build the ETG model and finalize the dataset selection."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .errors import NoDatasetError, ValidationError
from .inception import ResourceSelection
from .metrics import MetricValue, coverage
from .model import (
    Category,
    DatasetDescriptor,
    ElementKey,
    ETGModel,
    EType,
    PropertyDef,
    element_set_of,
)


def _owner_by_prefix(attribute: str, etype_names) -> str | None:
    owners = [n for n in etype_names if attribute.startswith(f"{n}_") and len(attribute) > len(n) + 1]
    return max(owners, key=len) if owners else None


def build_etg_model(
    cq_elements: Sequence[EType],
    selection: ResourceSelection,
    extend: bool = False,
) -> ETGModel:
    """Turn CQ elements into the purpose-specific ETG model.

    With ``extend`` the unmatched attributes of kept datasets become data
    properties (provenance ``dataset``) of an existing etype: the one named by
    an ``extensions`` alias, else the etype whose name prefixes the attribute.
    Attributes with no owner are listed in ``unowned`` for review; no etype
    is ever invented.
    """
    if not cq_elements:
        raise ValidationError("cannot build a model without CQ elements")
    etypes = {e.name: e for e in cq_elements}
    added: dict[str, dict[str, PropertyDef]] = {name: {} for name in etypes}
    mapping: dict[tuple[str, str], ElementKey] = {}
    references: dict[tuple[str, str], ElementKey] = {}
    unowned: list[tuple[str, str]] = []

    for dataset_id in sorted(selection.kept_datasets):
        report = selection.reports[dataset_id]
        descriptor = selection.descriptors[dataset_id]
        for attr, key, _ in report.pairs:
            mapping[(dataset_id, attr)] = key
        for attr, key in report.references:
            references[(dataset_id, attr)] = key
        if not extend:
            continue
        todo = [(attr, key) for attr, key in report.extensions]
        for attr in report.unmatched_attributes:
            owner = _owner_by_prefix(attr, etypes)
            if owner is None:
                unowned.append((dataset_id, attr))
            else:
                todo.append((attr, ElementKey(owner, attr)))
        for attr, key in todo:
            if key.etype not in etypes:
                unowned.append((dataset_id, attr))
                continue
            category = descriptor.category_annotations.get(attr, Category.CONTEXTUAL)
            if etypes[key.etype].property(key.prop) is None:
                current = added[key.etype].get(key.prop)
                if current is not None:
                    category = max(category, current.category)
                added[key.etype][key.prop] = PropertyDef(
                    key.prop, "data", descriptor.schema.get(attr, "string"), None, category, "dataset"
                )
            mapping[(dataset_id, attr)] = key

    model_etypes = []
    for name, etype in sorted(etypes.items()):
        props = etype.properties + tuple(added[name].values())
        model_etypes.append(EType(name, props, etype.category, etype.provenance, etype.label))
    return ETGModel(etypes=tuple(model_etypes), mapping=mapping, references=references, unowned=tuple(unowned))


def dataset_model_coverage(model: ETGModel, descriptor: DatasetDescriptor) -> MetricValue:
    """Share of the dataset's attributes that land on a model property."""
    attributes = element_set_of(descriptor, "properties")
    if not attributes:
        return MetricValue("coverage", Fraction(0), 0, 0, 0)
    translated = set()
    for key in attributes:
        attr = key.prop
        target = model.mapping.get((descriptor.id, attr)) or model.references.get((descriptor.id, attr))
        translated.add(target if target is not None else key)
    return coverage(translated, element_set_of(model, "properties"))


def select_datasets(
    model: ETGModel,
    selection: ResourceSelection,
    threshold: float = 0.5,
) -> list[DatasetDescriptor]:
    """Keep the previously selected datasets that still fit the model.

    Raises NoDatasetError when nothing is left, which forces a backtrack.
    """
    kept = []
    minimum = Fraction(str(threshold))
    for dataset_id in selection.kept_datasets:
        descriptor = selection.descriptors[dataset_id]
        value = dataset_model_coverage(model, descriptor)
        if value.alpha_size and value.value > 0 and value.value >= minimum:
            kept.append(descriptor)
    if not kept:
        raise NoDatasetError("no selected dataset matches the ETG model")
    return sorted(kept, key=lambda d: d.priority)


def render_model(model) -> str:
    """Plain-text view of a schema graph: etypes, indented properties, edges."""
    lines = []
    for etype in model.etypes:
        lines.append(f"{etype.label or etype.name} [{etype.category}, {etype.provenance}]")
        for prop in etype.properties:
            kind = f"-> {prop.range_etype}" if prop.is_object else prop.datatype
            lines.append(f"    {prop.name}: {kind} [{prop.category}, {prop.provenance}]")
    if model.edges:
        lines.append("")
    for source, prop, target in sorted(model.edges):
        lines.append(f"{source} --{prop}--> {target}")
    unowned = getattr(model, "unowned", ())
    if unowned:
        lines.append("")
        lines.append("needs review (no owning etype):")
        lines.extend(f"    {d}: {a}" for d, a in unowned)
    return "\n".join(lines) + "\n"
