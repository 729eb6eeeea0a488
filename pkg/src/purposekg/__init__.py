"""Purpose-driven construction of knowledge graphs from heterogeneous datasets.

The pipeline runs four gated phases: inception (competency queries and
resource matching), modeling (ETG model), alignment (reference ontologies,
ETG and dataset cleaning) and integration (entity graph and RDF export).
"""

from . import errors
from .alignment import clean_dataset, etr_predict, generate_etg, select_ontologies
from .evaluation import (
    DataQualityReport,
    data_quality,
    eval_alignment,
    eval_inception,
    eval_integration,
    eval_modeling,
)
from .inception import collect_resources, extract_elements, match_schema
from .ingest import load_dataset, parse_ontology, parse_purpose
from .integration import build_eg, map_records, merge_into
from .metrics import (
    MetricValue,
    coverage,
    etype_overlap,
    extensiveness,
    property_shareability,
    sparsity,
)
from .model import (
    ETG,
    Category,
    CompetencyQuery,
    DatasetDescriptor,
    ElementKey,
    Entity,
    EntityGraph,
    ETGModel,
    EType,
    GateDecision,
    GateThresholds,
    IdentityRule,
    PropertyDef,
    Purpose,
)
from .modeling import build_etg_model, select_datasets
from .pipeline import run_pipeline
from .rdf import export_rdf

__version__ = "0.1.0"

__all__ = [
    "Category",
    "CompetencyQuery",
    "DataQualityReport",
    "DatasetDescriptor",
    "ETG",
    "ETGModel",
    "EType",
    "ElementKey",
    "Entity",
    "EntityGraph",
    "GateDecision",
    "GateThresholds",
    "IdentityRule",
    "MetricValue",
    "PropertyDef",
    "Purpose",
    "build_eg",
    "build_etg_model",
    "clean_dataset",
    "collect_resources",
    "coverage",
    "data_quality",
    "errors",
    "etr_predict",
    "etype_overlap",
    "eval_alignment",
    "eval_inception",
    "eval_integration",
    "eval_modeling",
    "export_rdf",
    "extensiveness",
    "extract_elements",
    "generate_etg",
    "load_dataset",
    "map_records",
    "match_schema",
    "merge_into",
    "parse_ontology",
    "parse_purpose",
    "property_shareability",
    "run_pipeline",
    "select_datasets",
    "select_ontologies",
    "sparsity",
]
