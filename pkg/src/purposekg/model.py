"""Shared domain types for the pipeline.

Everything here is an immutable value object. Labels are normalized on the
way in (see :func:`normalize_label`) so that names coming from competency
queries, dataset headers and ontologies can be compared directly.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import TYPE_CHECKING, Iterable, Mapping, NamedTuple

from .errors import DanglingRangeError, ValidationError

if TYPE_CHECKING:
    from .integration import IntegrationStats

DATATYPES = ("string", "integer", "decimal", "date", "datetime", "boolean")
PHASES = ("inception", "modeling", "alignment", "integration")

_CAMEL = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_SEPARATORS = re.compile(r"[\s\-/]+")
_UNDERSCORES = re.compile(r"_+")


def normalize_label(label: str) -> str:
    """Lowercase ``label`` and turn separators into single underscores.

    camelCase boundaries also become underscores, so ``MedicationStatement``
    and ``Medication_statement`` normalize to the same key.

    >>> normalize_label("ID-PATIENT")
    'id_patient'
    >>> normalize_label("beginmoment/date")
    'beginmoment_date'
    >>> normalize_label("birthDate")
    'birth_date'
    """
    text = _CAMEL.sub("_", str(label).strip())
    text = _SEPARATORS.sub("_", text.lower())
    return _UNDERSCORES.sub("_", text).strip("_")


class Category(enum.IntEnum):
    """Reusability class; integer order is reusability order."""

    CONTEXTUAL = 1
    CORE = 2
    COMMON = 3

    @classmethod
    def parse(cls, value: "str | Category") -> "Category":
        if isinstance(value, Category):
            return value
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValidationError(f"unknown category {value!r}") from None

    @classmethod
    def by_reusability(cls) -> list["Category"]:
        """Categories from most to least reusable (processing order)."""
        return sorted(cls, reverse=True)

    def __str__(self) -> str:
        return self.name.lower()


def ontology_provenance(name: str) -> str:
    return f"ontology:{name}"


def is_ontology_provenance(provenance: str) -> bool:
    return provenance.startswith("ontology:")


def _freeze(mapping) -> Mapping:
    return MappingProxyType(dict(mapping or {}))


@dataclass(frozen=True)
class PropertyDef:
    name: str
    kind: str = "data"
    datatype: str | None = None
    range_etype: str | None = None
    category: Category = Category.CONTEXTUAL
    provenance: str = "cq"

    def __post_init__(self):
        object.__setattr__(self, "name", normalize_label(self.name))
        if not self.name:
            raise ValidationError("property name is empty")
        object.__setattr__(self, "category", Category.parse(self.category))
        if self.kind == "data":
            datatype = self.datatype or "string"
            if datatype not in DATATYPES:
                raise ValidationError(f"property {self.name!r}: unknown datatype {datatype!r}")
            if self.range_etype is not None:
                raise ValidationError(f"data property {self.name!r} cannot have a range")
            object.__setattr__(self, "datatype", datatype)
        elif self.kind == "object":
            if not self.range_etype:
                raise ValidationError(f"object property {self.name!r} needs a range etype")
            if self.datatype is not None:
                raise ValidationError(f"object property {self.name!r} cannot have a datatype")
            object.__setattr__(self, "range_etype", normalize_label(self.range_etype))
        else:
            raise ValidationError(f"property {self.name!r}: kind must be 'data' or 'object'")

    @property
    def is_object(self) -> bool:
        return self.kind == "object"


@dataclass(frozen=True)
class EType:
    """An entity type: a named bag of data and object properties.

    ``label`` keeps the original spelling for display and does not take part
    in equality.
    """

    name: str
    properties: tuple[PropertyDef, ...] = ()
    category: Category = Category.CONTEXTUAL
    provenance: str = "cq"
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", str(self.name).strip())
        object.__setattr__(self, "name", normalize_label(self.name))
        if not self.name:
            raise ValidationError("etype name is empty")
        object.__setattr__(self, "category", Category.parse(self.category))
        props = tuple(sorted(self.properties, key=lambda p: p.name))
        seen = set()
        for prop in props:
            if prop.name in seen:
                raise ValidationError(f"etype {self.name!r}: duplicate property {prop.name!r}")
            seen.add(prop.name)
        object.__setattr__(self, "properties", props)

    @property
    def property_names(self) -> frozenset[str]:
        return frozenset(p.name for p in self.properties)

    @property
    def data_properties(self) -> tuple[PropertyDef, ...]:
        return tuple(p for p in self.properties if not p.is_object)

    @property
    def object_properties(self) -> tuple[PropertyDef, ...]:
        return tuple(p for p in self.properties if p.is_object)

    # defined last: the name shadows the builtin decorator in the class body
    def property(self, name: str) -> PropertyDef | None:
        name = normalize_label(name)
        for prop in self.properties:
            if prop.name == name:
                return prop
        return None


class ElementKey(NamedTuple):
    """Key of a schema element.

    ``(etype, "")`` names an etype, ``(etype, prop)`` one of its properties and
    ``("", prop)`` a dataset attribute not attached to any etype.
    """

    etype: str
    prop: str = ""

    @classmethod
    def parse(cls, text: str) -> "ElementKey":
        etype, _, prop = str(text).partition(".")
        return cls(normalize_label(etype), normalize_label(prop))

    @property
    def is_etype(self) -> bool:
        return not self.prop

    def __str__(self) -> str:
        if not self.prop:
            return self.etype
        if not self.etype:
            return self.prop
        return f"{self.etype}.{self.prop}"


ElementSet = frozenset  # frozenset[ElementKey]

GRANULARITIES = ("etypes", "properties", "both")


def element_set_of(source, granularity: str = "both") -> frozenset[ElementKey]:
    """Collect the element keys of a schema graph, etype list or dataset schema.

    Dataset attributes become unowned property keys; an existing element set
    is filtered to the requested granularity.
    """
    if granularity not in GRANULARITIES:
        raise ValueError(f"granularity must be one of {GRANULARITIES}")
    want_etypes = granularity in ("etypes", "both")
    want_props = granularity in ("properties", "both")

    if isinstance(source, DatasetDescriptor):
        if not want_props:
            return frozenset()
        return frozenset(ElementKey("", normalize_label(a)) for a in source.schema)
    if isinstance(source, (set, frozenset)):
        return frozenset(
            k for k in source if (k.is_etype and want_etypes) or (not k.is_etype and want_props)
        )

    etypes = source.etypes if hasattr(source, "etypes") else source
    keys = set()
    for etype in etypes:
        if want_etypes:
            keys.add(ElementKey(etype.name))
        if want_props:
            keys.update(ElementKey(etype.name, p.name) for p in etype.properties)
    return frozenset(keys)


@dataclass(frozen=True)
class CompetencyQuery:
    """A competency query with its explicit element annotations.

    Every annotated etype and property inherits the query's category.
    """

    id: int
    question: str
    action: str
    category: Category
    elements: tuple[EType, ...]
    required_for_answer: tuple[ElementKey, ...] = ()

    def __post_init__(self):
        if isinstance(self.id, bool) or not isinstance(self.id, int) or self.id < 1:
            raise ValidationError(f"CQ id must be a positive integer, got {self.id!r}")
        category = Category.parse(self.category)
        object.__setattr__(self, "category", category)
        if not self.elements:
            raise ValidationError(f"CQ {self.id} has no element annotations")
        elements = []
        for etype in self.elements:
            props = tuple(
                PropertyDef(p.name, p.kind, p.datatype, p.range_etype, category, "cq")
                for p in etype.properties
            )
            elements.append(EType(etype.name, props, category, "cq", etype.label))
        object.__setattr__(self, "elements", tuple(elements))
        required = tuple(
            k if isinstance(k, ElementKey) else ElementKey.parse(k) for k in self.required_for_answer
        )
        declared = element_set_of(elements)
        for key in required:
            if key not in declared:
                raise ValidationError(f"CQ {self.id}: required element {key} is not annotated")
        object.__setattr__(self, "required_for_answer", required)


@dataclass(frozen=True)
class DatasetDescriptor:
    id: str
    format: str
    path: str
    record_path: str = ""
    priority: int = 0
    schema: Mapping[str, str] = field(default_factory=dict)
    category_annotations: Mapping[str, Category] = field(default_factory=dict)

    def __post_init__(self):
        if self.format not in ("csv", "json", "xml"):
            raise ValidationError(f"dataset {self.id!r}: unsupported format {self.format!r}")
        object.__setattr__(
            self, "schema", _freeze({normalize_label(k): v for k, v in self.schema.items()})
        )
        object.__setattr__(
            self,
            "category_annotations",
            _freeze({normalize_label(k): Category.parse(v) for k, v in self.category_annotations.items()}),
        )

    def __hash__(self):
        return hash((self.id, self.format, self.path, self.priority))


@dataclass(frozen=True)
class AliasMap:
    """Per-dataset attribute correspondences declared in the purpose.

    ``entries`` map an attribute onto an existing CQ property, ``extensions``
    onto a new property of an existing etype, and ``references`` declare an
    attribute as a foreign key feeding an object property.
    """

    entries: Mapping[str, ElementKey] = field(default_factory=dict)
    extensions: Mapping[str, ElementKey] = field(default_factory=dict)
    references: Mapping[str, ElementKey] = field(default_factory=dict)
    similarity_threshold: float | None = None

    def __post_init__(self):
        for name in ("entries", "extensions", "references"):
            raw = getattr(self, name)
            frozen = {
                normalize_label(k): v if isinstance(v, ElementKey) else ElementKey.parse(v)
                for k, v in raw.items()
            }
            object.__setattr__(self, name, _freeze(frozen))

    def __hash__(self):
        return hash((tuple(self.entries.items()), tuple(self.references.items())))


@dataclass(frozen=True)
class OntologyAliases:
    """Known model-to-ontology name correspondences, consulted before scoring."""

    etypes: Mapping[str, str] = field(default_factory=dict)
    properties: Mapping[ElementKey, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "etypes", _freeze({normalize_label(k): normalize_label(v) for k, v in self.etypes.items()})
        )
        props = {
            (k if isinstance(k, ElementKey) else ElementKey.parse(k)): normalize_label(v)
            for k, v in self.properties.items()
        }
        object.__setattr__(self, "properties", _freeze(props))

    def __hash__(self):
        return hash(tuple(self.etypes.items()))


@dataclass(frozen=True)
class IdentityRule:
    etype: str
    key_properties: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "etype", normalize_label(self.etype))
        keys = tuple(normalize_label(k) for k in self.key_properties)
        if not keys:
            raise ValidationError(f"identity rule for {self.etype!r} has no key properties")
        object.__setattr__(self, "key_properties", keys)


@dataclass(frozen=True)
class GateThresholds:
    coverage_common: float = 0.5
    coverage_core: float = 0.5
    coverage_contextual: float = 0.3
    ontology_overlap: float = 0.3
    ontology_shareability: float = 0.3
    dataset_model_coverage: float = 0.5
    extensiveness_max: float = 0.5
    sparsity_min: float = 0.05
    adoption_common: float = 0.9
    adoption_core: float = 0.5
    answerability: float = 1.0
    max_backtrack_iterations: int = 3

    def __post_init__(self):
        for name, value in self.ratios().items():
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"threshold {name}={value} is outside [0, 1]")
        iterations = self.max_backtrack_iterations
        if isinstance(iterations, bool) or not isinstance(iterations, int) or iterations < 1:
            raise ValidationError("max_backtrack_iterations must be a positive integer")

    def ratios(self) -> dict[str, float]:
        return {k: v for k, v in self.__dict__.items() if k != "max_backtrack_iterations"}

    def coverage_for(self, category: Category) -> float:
        return getattr(self, f"coverage_{category}")


DEFAULT_DATE_PATTERNS = ("iso", "%d/%m/%Y", "%m/%d/%Y", "%Y%m%d")


@dataclass(frozen=True)
class PipelineOptions:
    extend_model: bool = False
    similarity_threshold: float = 0.75
    name_weight: float = 0.4
    property_weight: float = 0.6
    acceptance_threshold: float = 0.5
    date_patterns: tuple[str, ...] = DEFAULT_DATE_PATTERNS


@dataclass(frozen=True)
class Purpose:
    description: str
    cqs: tuple[CompetencyQuery, ...]
    dataset_descriptors: tuple[DatasetDescriptor, ...]
    ontology_refs: tuple[str, ...] = ()
    thresholds: GateThresholds = field(default_factory=GateThresholds)
    aliases: Mapping[str, AliasMap] = field(default_factory=dict)
    ontology_aliases: OntologyAliases = field(default_factory=OntologyAliases)
    identity_rules: tuple[IdentityRule, ...] = ()
    options: PipelineOptions = field(default_factory=PipelineOptions)
    base_dir: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        if not self.cqs:
            raise ValidationError("a purpose needs at least one competency query")
        if not self.dataset_descriptors:
            raise ValidationError("a purpose needs at least one dataset descriptor")
        _require_unique([cq.id for cq in self.cqs], "CQ id")
        _require_unique([d.id for d in self.dataset_descriptors], "dataset id")
        _require_unique([d.priority for d in self.dataset_descriptors], "dataset priority")
        _require_unique([r.etype for r in self.identity_rules], "identity rule etype")
        unknown = set(self.aliases) - {d.id for d in self.dataset_descriptors}
        if unknown:
            raise ValidationError(f"aliases given for unknown datasets: {sorted(unknown)}")
        object.__setattr__(self, "aliases", _freeze(self.aliases))

    def __hash__(self):
        return hash((self.description, self.cqs))

    def descriptor(self, dataset_id: str) -> DatasetDescriptor:
        for d in self.dataset_descriptors:
            if d.id == dataset_id:
                return d
        raise KeyError(dataset_id)

    def alias_map(self, dataset_id: str) -> AliasMap:
        return self.aliases.get(dataset_id) or AliasMap()

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def _require_unique(values, what):
    seen = set()
    for v in values:
        if v in seen:
            raise ValidationError(f"duplicate {what}: {v!r}")
        seen.add(v)


@dataclass(frozen=True)
class SchemaGraph:
    """Etypes plus the object-property edges implied by their ranges."""

    etypes: tuple[EType, ...] = ()

    def __post_init__(self):
        etypes = tuple(sorted(self.etypes, key=lambda e: e.name))
        names = [e.name for e in etypes]
        _require_unique(names, "etype name")
        known = set(names)
        for etype in etypes:
            for prop in etype.object_properties:
                if prop.range_etype not in known:
                    raise DanglingRangeError(
                        f"{etype.name}.{prop.name} targets undeclared etype {prop.range_etype!r}"
                    )
        object.__setattr__(self, "etypes", etypes)

    @property
    def edges(self) -> frozenset[tuple[str, str, str]]:
        return frozenset(
            (e.name, p.name, p.range_etype) for e in self.etypes for p in e.object_properties
        )

    @property
    def etype_names(self) -> frozenset[str]:
        return frozenset(e.name for e in self.etypes)

    def etype(self, name: str) -> EType | None:
        name = normalize_label(name)
        for e in self.etypes:
            if e.name == name:
                return e
        return None

    def has_element(self, key: ElementKey) -> bool:
        etype = self.etype(key.etype)
        if etype is None:
            return False
        return key.is_etype or etype.property(key.prop) is not None


DatasetAttr = tuple  # (dataset id, normalized attribute)


@dataclass(frozen=True)
class ETGModel(SchemaGraph):
    """Purpose-specific schema built from CQs and datasets.

    ``mapping`` sends (dataset id, attribute) to the model element it fills;
    ``references`` to the object property it feeds. ``unowned`` lists dataset
    attributes left for manual review.
    """

    mapping: Mapping[tuple[str, str], ElementKey] = field(default_factory=dict)
    references: Mapping[tuple[str, str], ElementKey] = field(default_factory=dict)
    unowned: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "mapping", _freeze(self.mapping))
        object.__setattr__(self, "references", _freeze(self.references))
        object.__setattr__(self, "unowned", tuple(sorted(self.unowned)))

    def __hash__(self):
        return hash(self.etypes)


@dataclass(frozen=True)
class ETG(SchemaGraph):
    """Final, shareable schema.

    Element provenance lives on each EType/PropertyDef (``ontology:<name>`` or
    ``model``). ``model_map`` sends every model element key to its ETG key.
    """

    mapping_preservation: Mapping[tuple[str, str], ElementKey] = field(default_factory=dict)
    references: Mapping[tuple[str, str], ElementKey] = field(default_factory=dict)
    model_map: Mapping[ElementKey, ElementKey] = field(default_factory=dict)
    datatype_conflicts: tuple[str, ...] = ()

    def __post_init__(self):
        super().__post_init__()
        for name in ("mapping_preservation", "references", "model_map"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        object.__setattr__(self, "datatype_conflicts", tuple(self.datatype_conflicts))

    def __hash__(self):
        return hash(self.etypes)

    def translate(self, model_key: ElementKey) -> ElementKey | None:
        return self.model_map.get(model_key)

    def dataset_attributes(self, dataset_id: str) -> dict[str, ElementKey]:
        return {a: k for (d, a), k in self.mapping_preservation.items() if d == dataset_id}

    def dataset_references(self, dataset_id: str) -> dict[str, ElementKey]:
        return {a: k for (d, a), k in self.references.items() if d == dataset_id}


@dataclass(frozen=True)
class Entity:
    id: str
    etype: str
    data_values: Mapping[str, str | None] = field(default_factory=dict)
    object_links: Mapping[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "data_values", _freeze(self.data_values))
        object.__setattr__(
            self, "object_links", _freeze({k: frozenset(v) for k, v in self.object_links.items()})
        )

    def __hash__(self):
        return hash(self.id)

    @property
    def link_count(self) -> int:
        return sum(len(v) for v in self.object_links.values())

    @property
    def filled_values(self) -> dict[str, str]:
        return {k: v for k, v in self.data_values.items() if v is not None}


@dataclass(frozen=True)
class EntityGraph:
    etg: ETG
    entities: tuple[Entity, ...] = ()
    integration_log: tuple["IntegrationStats", ...] = ()

    def __post_init__(self):
        entities = tuple(sorted(self.entities, key=lambda e: e.id))
        _require_unique([e.id for e in entities], "entity id")
        ids = {e.id for e in entities}
        for entity in entities:
            if self.etg.etype(entity.etype) is None:
                raise ValidationError(f"entity {entity.id} has unknown etype {entity.etype!r}")
            for prop, targets in entity.object_links.items():
                missing = set(targets) - ids
                if missing:
                    raise ValidationError(f"entity {entity.id}.{prop} links to missing {sorted(missing)}")
        object.__setattr__(self, "entities", entities)
        object.__setattr__(self, "integration_log", tuple(self.integration_log))

    def __hash__(self):
        return hash(self.entities)

    def entity(self, entity_id: str) -> Entity | None:
        for e in self.entities:
            if e.id == entity_id:
                return e
        return None

    def of_etype(self, etype: str) -> list[Entity]:
        etype = normalize_label(etype)
        return [e for e in self.entities if e.etype == etype]


@dataclass(frozen=True)
class GateDecision:
    phase: str
    metrics: Mapping[str, float]
    verdict: str
    backtrack_to: str | None = None
    reasons: tuple[str, ...] = ()

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")
        if self.verdict not in ("pass", "fail"):
            raise ValueError("verdict must be 'pass' or 'fail'")
        if self.verdict == "fail" and self.backtrack_to not in PHASES:
            raise ValueError("a failing decision needs a backtrack target")
        if self.verdict == "pass" and self.backtrack_to is not None:
            raise ValueError("a passing decision has no backtrack target")
        object.__setattr__(self, "metrics", _freeze({k: float(v) for k, v in self.metrics.items()}))
        object.__setattr__(self, "reasons", tuple(self.reasons))

    def __hash__(self):
        return hash((self.phase, self.verdict, tuple(sorted(self.metrics.items()))))

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "verdict": self.verdict,
            "backtrack_to": self.backtrack_to,
            "metrics": dict(sorted(self.metrics.items())),
            "reasons": list(self.reasons),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "GateDecision":
        return cls(
            phase=data["phase"],
            metrics=data.get("metrics", {}),
            verdict=data["verdict"],
            backtrack_to=data.get("backtrack_to"),
            reasons=tuple(data.get("reasons", ())),
        )


def most_reusable(categories: Iterable[Category]) -> Category:
    return max(categories)
