"""Readers for purpose documents, ontology documents and datasets.

Purpose and ontology documents are YAML. Datasets are CSV (first row is the
header), JSON (an array of objects at ``record_path``) or XML (elements at
``record_path``; leaf text nodes become attributes). Nested JSON/XML values
are flattened with ``/`` and then normalized, so ``beginmoment/date`` becomes
the attribute ``beginmoment_date``.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping

import yaml

from .datatypes import infer_datatype
from .errors import DocumentSyntaxError, RecordPathError, ValidationError
from .model import (
    DEFAULT_DATE_PATTERNS,
    AliasMap,
    Category,
    CompetencyQuery,
    DatasetDescriptor,
    EType,
    GateThresholds,
    IdentityRule,
    OntologyAliases,
    PipelineOptions,
    PropertyDef,
    Purpose,
    SchemaGraph,
    normalize_label,
    ontology_provenance,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OntologyDocument(SchemaGraph):
    name: str = ""

    def __hash__(self):
        return hash((self.name, self.etypes))


@dataclass(frozen=True)
class RecordSet:
    descriptor: DatasetDescriptor
    records: tuple[Mapping[str, str], ...] = ()

    def __post_init__(self):
        records = tuple(MappingProxyType(dict(r)) for r in self.records)
        schema = set(self.descriptor.schema)
        for i, record in enumerate(records):
            extra = set(record) - schema
            if extra:
                raise ValidationError(f"record {i} has attributes outside the schema: {sorted(extra)}")
        object.__setattr__(self, "records", records)

    def __len__(self):
        return len(self.records)


# -- YAML helpers ----------------------------------------------------------


def _read_yaml(path: Path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DocumentSyntaxError(f"not valid UTF-8: {exc}", path) from None
    return _load_yaml_text(text, path)


def _load_yaml_text(text: str, path=None) -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        column = mark.column + 1 if mark else None
        raise DocumentSyntaxError(exc.problem or str(exc), path, line, column) from None
    except yaml.YAMLError as exc:
        raise DocumentSyntaxError(str(exc), path) from None


def _expect(value, kind, where):
    if not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ValidationError(f"{where}: expected {names}, got {type(value).__name__}")
    return value


def _check_keys(data: Mapping, allowed, where):
    unknown = set(data) - set(allowed)
    if unknown:
        raise ValidationError(f"{where}: unknown keys {sorted(map(str, unknown))}")


def _property_from_yaml(entry, where, category=Category.CONTEXTUAL, provenance="cq") -> PropertyDef:
    if isinstance(entry, str):
        return PropertyDef(entry, "data", None, None, category, provenance)
    entry = _expect(entry, dict, where)
    _check_keys(entry, ("name", "datatype", "range", "category", "provenance"), where)
    if "name" not in entry:
        raise ValidationError(f"{where}: property needs a name")
    category = Category.parse(entry.get("category", category))
    if entry.get("range") is not None:
        return PropertyDef(entry["name"], "object", None, entry["range"], category, provenance)
    return PropertyDef(entry["name"], "data", entry.get("datatype"), None, category, provenance)


# -- purpose ---------------------------------------------------------------

_PURPOSE_KEYS = (
    "description",
    "cqs",
    "datasets",
    "ontologies",
    "ontology_aliases",
    "identity",
    "thresholds",
    "options",
)
_CQ_KEYS = ("id", "question", "action", "category", "etypes", "properties", "required_for_answer")
_DATASET_KEYS = (
    "id",
    "format",
    "path",
    "record_path",
    "priority",
    "categories",
    "aliases",
    "extensions",
    "references",
    "similarity_threshold",
)


def parse_purpose(path: str | Path) -> Purpose:
    """Read a purpose document; CQ order follows the file."""
    path = Path(path)
    return purpose_from_mapping(_read_yaml(path), base_dir=path.parent, source=path)


def parse_purpose_text(text: str, base_dir: str | Path = ".") -> Purpose:
    return purpose_from_mapping(_load_yaml_text(text), base_dir=Path(base_dir))


def purpose_from_mapping(data, base_dir: Path = Path("."), source=None) -> Purpose:
    where = str(source or "purpose")
    data = _expect(data, dict, where)
    _check_keys(data, _PURPOSE_KEYS, where)

    cqs = tuple(
        _cq_from_yaml(entry, f"{where}: cqs[{i}]")
        for i, entry in enumerate(_expect(data.get("cqs") or [], list, f"{where}: cqs"))
    )
    descriptors, aliases = [], {}
    for i, entry in enumerate(_expect(data.get("datasets") or [], list, f"{where}: datasets")):
        descriptor, alias_map = _dataset_from_yaml(entry, f"{where}: datasets[{i}]")
        descriptors.append(descriptor)
        if alias_map is not None:
            aliases[descriptor.id] = alias_map

    ontologies = tuple(str(p) for p in _expect(data.get("ontologies") or [], list, f"{where}: ontologies"))

    raw_aliases = _expect(data.get("ontology_aliases") or {}, dict, f"{where}: ontology_aliases")
    _check_keys(raw_aliases, ("etypes", "properties"), f"{where}: ontology_aliases")
    ontology_aliases = OntologyAliases(
        etypes=_expect(raw_aliases.get("etypes") or {}, dict, f"{where}: ontology_aliases.etypes"),
        properties=_expect(raw_aliases.get("properties") or {}, dict, f"{where}: ontology_aliases.properties"),
    )

    rules = tuple(
        IdentityRule(etype, tuple(_expect(keys, list, f"{where}: identity.{etype}")))
        for etype, keys in _expect(data.get("identity") or {}, dict, f"{where}: identity").items()
    )

    return Purpose(
        description=str(data.get("description") or ""),
        cqs=cqs,
        dataset_descriptors=tuple(descriptors),
        ontology_refs=ontologies,
        thresholds=thresholds_from_mapping(data.get("thresholds") or {}, f"{where}: thresholds"),
        aliases=aliases,
        ontology_aliases=ontology_aliases,
        identity_rules=rules,
        options=_options_from_yaml(data.get("options") or {}, f"{where}: options"),
        base_dir=Path(base_dir),
    )


def thresholds_from_mapping(data, where="thresholds", base: GateThresholds | None = None) -> GateThresholds:
    data = _expect(data, dict, where)
    names = [f.name for f in dataclasses.fields(GateThresholds)]
    _check_keys(data, names, where)
    return dataclasses.replace(base or GateThresholds(), **data)


def apply_threshold_override(purpose: Purpose, path: str | Path) -> Purpose:
    """Return ``purpose`` with thresholds overridden by the YAML file at ``path``."""
    path = Path(path)
    data = _read_yaml(path) or {}
    if isinstance(data, dict) and "thresholds" in data:
        data = data["thresholds"] or {}
    thresholds = thresholds_from_mapping(data, str(path), base=purpose.thresholds)
    return dataclasses.replace(purpose, thresholds=thresholds)


def _options_from_yaml(data, where) -> PipelineOptions:
    data = _expect(data, dict, where)
    _check_keys(data, [f.name for f in dataclasses.fields(PipelineOptions)], where)
    if "date_patterns" in data:
        data = dict(data, date_patterns=tuple(data["date_patterns"]))
    return PipelineOptions(**data)


def _cq_from_yaml(entry, where) -> CompetencyQuery:
    entry = _expect(entry, dict, where)
    _check_keys(entry, _CQ_KEYS, where)
    for key in ("id", "category", "etypes"):
        if key not in entry:
            raise ValidationError(f"{where}: missing {key!r}")
    category = Category.parse(entry["category"])

    etypes: dict[str, list[PropertyDef]] = {}
    labels: dict[str, str] = {}
    raw_etypes = entry["etypes"]
    if isinstance(raw_etypes, list):
        raw_etypes = {name: [] for name in raw_etypes}
    for name, props in _expect(raw_etypes, dict, f"{where}.etypes").items():
        key = normalize_label(name)
        labels[key] = str(name)
        etypes[key] = [
            _property_from_yaml(p, f"{where}.etypes.{name}", category)
            for p in _expect(props or [], list, f"{where}.etypes.{name}")
        ]
    for dotted in _expect(entry.get("properties") or [], list, f"{where}.properties"):
        if isinstance(dotted, dict):
            owner, _, prop = str(dotted.get("name", "")).partition(".")
            spec = dict(dotted, name=prop)
        else:
            owner, _, prop = str(dotted).partition(".")
            spec = prop
        if not prop or normalize_label(owner) not in etypes:
            raise ValidationError(f"{where}: property {dotted!r} is not attached to an annotated etype")
        etypes[normalize_label(owner)].append(_property_from_yaml(spec, f"{where}.properties", category))

    elements = tuple(EType(name, tuple(props), category, "cq", labels[name]) for name, props in etypes.items())
    return CompetencyQuery(
        id=entry["id"],
        question=str(entry.get("question") or ""),
        action=str(entry.get("action") or ""),
        category=category,
        elements=elements,
        required_for_answer=tuple(str(k) for k in entry.get("required_for_answer") or ()),
    )


def _dataset_from_yaml(entry, where) -> tuple[DatasetDescriptor, AliasMap | None]:
    entry = _expect(entry, dict, where)
    _check_keys(entry, _DATASET_KEYS, where)
    for key in ("id", "format", "path", "priority"):
        if key not in entry:
            raise ValidationError(f"{where}: missing {key!r}")
    if isinstance(entry["priority"], bool) or not isinstance(entry["priority"], int):
        raise ValidationError(f"{where}: priority must be an integer")
    descriptor = DatasetDescriptor(
        id=str(entry["id"]),
        format=str(entry["format"]).lower(),
        path=str(entry["path"]),
        record_path=str(entry.get("record_path") or ""),
        priority=entry["priority"],
        category_annotations=_expect(entry.get("categories") or {}, dict, f"{where}.categories"),
    )
    alias_keys = ("aliases", "extensions", "references", "similarity_threshold")
    if not any(k in entry for k in alias_keys):
        return descriptor, None
    alias_map = AliasMap(
        entries=_expect(entry.get("aliases") or {}, dict, f"{where}.aliases"),
        extensions=_expect(entry.get("extensions") or {}, dict, f"{where}.extensions"),
        references=_expect(entry.get("references") or {}, dict, f"{where}.references"),
        similarity_threshold=entry.get("similarity_threshold"),
    )
    return descriptor, alias_map


def _property_to_yaml(prop: PropertyDef) -> Any:
    if prop.is_object:
        return {"name": prop.name, "range": prop.range_etype}
    if prop.datatype == "string":
        return prop.name
    return {"name": prop.name, "datatype": prop.datatype}


def purpose_to_mapping(purpose: Purpose) -> dict:
    cqs = []
    for cq in purpose.cqs:
        entry = {
            "id": cq.id,
            "question": cq.question,
            "action": cq.action,
            "category": str(cq.category),
            "etypes": {e.label: [_property_to_yaml(p) for p in e.properties] for e in cq.elements},
        }
        if cq.required_for_answer:
            entry["required_for_answer"] = [str(k) for k in cq.required_for_answer]
        cqs.append(entry)

    datasets = []
    for d in purpose.dataset_descriptors:
        entry = {"id": d.id, "format": d.format, "path": d.path, "priority": d.priority}
        if d.record_path:
            entry["record_path"] = d.record_path
        if d.category_annotations:
            entry["categories"] = {k: str(v) for k, v in d.category_annotations.items()}
        alias_map = purpose.aliases.get(d.id)
        if alias_map is not None:
            entry["aliases"] = {k: str(v) for k, v in alias_map.entries.items()}
            entry["extensions"] = {k: str(v) for k, v in alias_map.extensions.items()}
            entry["references"] = {k: str(v) for k, v in alias_map.references.items()}
            if alias_map.similarity_threshold is not None:
                entry["similarity_threshold"] = alias_map.similarity_threshold
        datasets.append(entry)

    options = dataclasses.asdict(purpose.options)
    options["date_patterns"] = list(options["date_patterns"])
    return {
        "description": purpose.description,
        "cqs": cqs,
        "datasets": datasets,
        "ontologies": list(purpose.ontology_refs),
        "ontology_aliases": {
            "etypes": dict(purpose.ontology_aliases.etypes),
            "properties": {str(k): v for k, v in purpose.ontology_aliases.properties.items()},
        },
        "identity": {r.etype: list(r.key_properties) for r in purpose.identity_rules},
        "thresholds": dataclasses.asdict(purpose.thresholds),
        "options": options,
    }


def dump_purpose(purpose: Purpose) -> str:
    return yaml.safe_dump(purpose_to_mapping(purpose), sort_keys=False, allow_unicode=True)


# -- ontologies ------------------------------------------------------------


def parse_ontology(path: str | Path) -> OntologyDocument:
    path = Path(path)
    return ontology_from_mapping(_read_yaml(path), default_name=path.stem, source=path)


def ontology_from_mapping(data, default_name="ontology", source=None) -> OntologyDocument:
    """Build an OntologyDocument; extra keys written by ETG exports are ignored."""
    where = str(source or default_name)
    data = _expect(data if data is not None else {}, dict, where)
    name = str(data.get("name") or default_name)
    provenance = ontology_provenance(name)
    etypes = []
    for i, entry in enumerate(_expect(data.get("etypes") or [], list, f"{where}: etypes")):
        entry_where = f"{where}: etypes[{i}]"
        entry = _expect(entry, dict, entry_where)
        if "name" not in entry:
            raise ValidationError(f"{entry_where}: etype needs a name")
        category = Category.parse(entry.get("category", Category.CONTEXTUAL))
        props = [
            _property_from_yaml(p, entry_where, category, provenance)
            for p in _expect(entry.get("data_properties") or [], list, entry_where)
        ]
        for p in _expect(entry.get("object_properties") or [], list, entry_where):
            p = _expect(p, dict, entry_where)
            if "range" not in p:
                raise ValidationError(f"{entry_where}: object property {p.get('name')!r} needs a range")
            props.append(_property_from_yaml(p, entry_where, category, provenance))
        for prop in props:
            if prop.is_object and prop.range_etype is None:
                raise ValidationError(f"{entry_where}: object property without range")
        etypes.append(EType(entry["name"], tuple(props), category, provenance))
    return OntologyDocument(etypes=tuple(etypes), name=name)


def schema_graph_to_mapping(name: str, graph: SchemaGraph, annotate: bool = False) -> dict:
    """Serialize a schema graph in the ontology document layout.

    With ``annotate`` each etype and property also records its provenance and
    category, which :func:`parse_ontology` reads back as category and ignores
    as provenance.
    """
    etypes = []
    for etype in graph.etypes:
        entry: dict[str, Any] = {"name": etype.name}
        if annotate:
            entry["label"] = etype.label
            entry["category"] = str(etype.category)
            entry["provenance"] = etype.provenance
        data_props, object_props = [], []
        for prop in etype.properties:
            item: dict[str, Any] = {"name": prop.name}
            if prop.is_object:
                item["range"] = prop.range_etype
            else:
                item["datatype"] = prop.datatype
            if annotate:
                item["category"] = str(prop.category)
                item["provenance"] = prop.provenance
            (object_props if prop.is_object else data_props).append(item)
        entry["data_properties"] = data_props
        entry["object_properties"] = object_props
        etypes.append(entry)
    return {"name": name, "etypes": etypes}


# -- datasets --------------------------------------------------------------


def load_dataset(descriptor: DatasetDescriptor, base_dir: str | Path | None = None, date_patterns=None) -> RecordSet:
    """Load a dataset into flat attribute -> raw string records.

    Record count and order follow the source file. Column datatypes are
    inferred from every record.
    """
    path = Path(descriptor.path)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    readers = {"csv": _read_csv, "json": _read_json, "xml": _read_xml}
    raw_records = readers[descriptor.format](path, descriptor.record_path)

    records = []
    for i, raw in enumerate(raw_records):
        record: dict[str, str] = {}
        for key, value in raw.items():
            name = normalize_label(key)
            if not name:
                raise DocumentSyntaxError(f"record {i}: empty attribute name", path)
            if name in record:
                log.warning("%s: record %d: attribute %r appears more than once; keeping the first", path, i, name)
                continue
            record[name] = value
        records.append(record)

    columns: dict[str, list[str]] = {}
    for record in records:
        for name, value in record.items():
            columns.setdefault(name, []).append(value)
    patterns = tuple(date_patterns or DEFAULT_DATE_PATTERNS)
    schema = {name: infer_datatype(values, patterns) for name, values in sorted(columns.items())}
    for name in getattr(raw_records, "header", ()):
        schema.setdefault(normalize_label(name), "string")
    return RecordSet(dataclasses.replace(descriptor, schema=schema), tuple(records))


class _Rows(list):
    header: tuple[str, ...] = ()


def _read_csv(path: Path, record_path: str) -> list[dict[str, str]]:
    rows = _Rows()
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh, strict=True)
        try:
            header = next(reader, None)
            if header is None:
                raise DocumentSyntaxError("missing header row", path, 1)
            normalized = [normalize_label(h) for h in header]
            if "" in normalized or len(set(normalized)) != len(normalized):
                raise DocumentSyntaxError(f"header has empty or clashing names: {header}", path, 1)
            rows.header = tuple(header)
            for row in reader:
                if not row:
                    continue
                if len(row) > len(header):
                    raise DocumentSyntaxError(
                        f"row has {len(row)} fields, header has {len(header)}", path, reader.line_num
                    )
                rows.append(dict(zip(header, row)))
        except csv.Error as exc:
            raise DocumentSyntaxError(str(exc), path, reader.line_num) from None
    return rows


def _flatten_json(value, prefix, out):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten_json(v, f"{prefix}/{k}" if prefix else str(k), out)
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _flatten_json(v, f"{prefix}/{i}" if prefix else str(i), out)
    elif value is None:
        return
    elif isinstance(value, bool):
        out.setdefault(prefix, "true" if value else "false")
    else:
        out.setdefault(prefix, str(value))


def _read_json(path: Path, record_path: str) -> list[dict[str, str]]:
    try:
        with open(path, encoding="utf-8") as fh:
            document = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DocumentSyntaxError(exc.msg, path, exc.lineno, exc.colno) from None
    node = document
    for segment in [s for s in record_path.split("/") if s]:
        if isinstance(node, dict) and segment in node:
            node = node[segment]
        elif isinstance(node, list) and segment.isdigit() and int(segment) < len(node):
            node = node[int(segment)]
        else:
            raise RecordPathError(f"{path}: record path {record_path!r} matches nothing")
    if isinstance(node, dict):
        node = [node]
    if not isinstance(node, list):
        raise RecordPathError(f"{path}: record path {record_path!r} does not select objects")
    records = []
    for i, item in enumerate(node):
        if not isinstance(item, dict):
            raise RecordPathError(f"{path}: record {i} at {record_path!r} is not an object")
        flat: dict[str, str] = {}
        _flatten_json(item, "", flat)
        records.append(flat)
    return records


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1] if isinstance(tag, str) else ""


def _flatten_xml(element, prefix, out):
    for name, value in element.attrib.items():
        out.setdefault(f"{prefix}/{_local(name)}" if prefix else _local(name), value.strip())
    children = [c for c in element if isinstance(c.tag, str)]
    if not children:
        if prefix:
            out.setdefault(prefix, (element.text or "").strip())
        return
    for child in children:
        tag = _local(child.tag)
        _flatten_xml(child, f"{prefix}/{tag}" if prefix else tag, out)


def _read_xml(path: Path, record_path: str) -> list[dict[str, str]]:
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        line, column = exc.position
        raise DocumentSyntaxError(str(exc), path, line, column + 1) from None
    segments = [s for s in record_path.split("/") if s]
    if not segments:
        matches = [root]
    elif record_path.startswith("/"):
        matches = [root] if _local(root.tag) == segments[0] else []
        for segment in segments[1:]:
            matches = [c for m in matches for c in m if _local(c.tag) == segment]
    else:
        matches = [root]
        for segment in segments:
            matches = [c for m in matches for c in m if _local(c.tag) == segment]
    if not matches:
        raise RecordPathError(f"{path}: record path {record_path!r} matches nothing")
    records = []
    for element in matches:
        flat: dict[str, str] = {}
        _flatten_xml(element, "", flat)
        records.append(flat)
    return records


__all__ = [
    "OntologyDocument",
    "RecordSet",
    "apply_threshold_override",
    "dump_purpose",
    "load_dataset",
    "ontology_from_mapping",
    "parse_ontology",
    "parse_purpose",
    "parse_purpose_text",
    "purpose_from_mapping",
    "purpose_to_mapping",
    "schema_graph_to_mapping",
]

