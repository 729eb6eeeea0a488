"""Workspace layout and artifact (de)serialization.

One subdirectory per phase holds that phase's outputs; nothing written here
carries a timestamp, so equal runs leave byte-identical files.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Mapping

import yaml

from .alignment import CleanedRecordSet, RejectedValue
from .errors import (
    EmptyWorkspaceError,
    MissingArtifactError,
    ValidationError,
    WorkspaceLockedError,
)
from .model import (
    ETG,
    DatasetDescriptor,
    ElementKey,
    ETGModel,
    EType,
    GateDecision,
    PropertyDef,
    SchemaGraph,
)

PHASE_DIRS = {
    "inception": "01_inception",
    "modeling": "02_modeling",
    "alignment": "03_alignment",
    "integration": "04_integration",
}
GATE_FILE = "gate.json"


def dump_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def dump_yaml(data: Any) -> str:
    return yaml.safe_dump(data, sort_keys=False, allow_unicode=True, default_flow_style=False)


# -- schema graphs ---------------------------------------------------------------


def etypes_to_list(graph: SchemaGraph) -> list[dict]:
    out = []
    for etype in graph.etypes:
        props = []
        for prop in etype.properties:
            item: dict[str, Any] = {"name": prop.name, "kind": prop.kind}
            if prop.is_object:
                item["range"] = prop.range_etype
            else:
                item["datatype"] = prop.datatype
            item["category"] = str(prop.category)
            item["provenance"] = prop.provenance
            props.append(item)
        out.append(
            {
                "name": etype.name,
                "label": etype.label,
                "category": str(etype.category),
                "provenance": etype.provenance,
                "properties": props,
            }
        )
    return out


def _etypes_from_list(entries) -> tuple[EType, ...]:
    etypes = []
    for entry in entries or []:
        props = tuple(
            PropertyDef(
                p["name"],
                p.get("kind", "data"),
                p.get("datatype") if p.get("kind", "data") == "data" else None,
                p.get("range"),
                p.get("category", "contextual"),
                p.get("provenance", "model"),
            )
            for p in entry.get("properties") or []
        )
        etypes.append(
            EType(entry["name"], props, entry.get("category", "contextual"), entry.get("provenance", "model"), entry.get("label", ""))
        )
    return tuple(etypes)


def _pairs_to_list(mapping: Mapping[tuple[str, str], ElementKey]) -> list[dict]:
    return [{"dataset": d, "attribute": a, "element": str(k)} for (d, a), k in sorted(mapping.items())]


def _pairs_from_list(entries) -> dict[tuple[str, str], ElementKey]:
    return {(e["dataset"], e["attribute"]): ElementKey.parse(e["element"]) for e in entries or []}


def model_to_mapping(model: ETGModel) -> dict:
    return {
        "etypes": etypes_to_list(model),
        "mapping": _pairs_to_list(model.mapping),
        "references": _pairs_to_list(model.references),
        "unowned": [{"dataset": d, "attribute": a} for d, a in model.unowned],
    }


def model_from_mapping(data: Mapping) -> ETGModel:
    try:
        return ETGModel(
            etypes=_etypes_from_list(data.get("etypes")),
            mapping=_pairs_from_list(data.get("mapping")),
            references=_pairs_from_list(data.get("references")),
            unowned=tuple((e["dataset"], e["attribute"]) for e in data.get("unowned") or []),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValidationError(f"malformed model document: {exc}") from exc


def etg_to_mapping(etg: ETG) -> dict:
    return {
        "etypes": etypes_to_list(etg),
        "mapping_preservation": _pairs_to_list(etg.mapping_preservation),
        "references": _pairs_to_list(etg.references),
        "model_map": [{"model": str(m), "etg": str(e)} for m, e in sorted(etg.model_map.items())],
        "datatype_conflicts": list(etg.datatype_conflicts),
    }


def etg_from_mapping(data: Mapping) -> ETG:
    try:
        return ETG(
            etypes=_etypes_from_list(data.get("etypes")),
            mapping_preservation=_pairs_from_list(data.get("mapping_preservation")),
            references=_pairs_from_list(data.get("references")),
            model_map={ElementKey.parse(e["model"]): ElementKey.parse(e["etg"]) for e in data.get("model_map") or []},
            datatype_conflicts=tuple(data.get("datatype_conflicts") or ()),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValidationError(f"malformed ETG document: {exc}") from exc


# -- cleaned datasets ------------------------------------------------------------


def cleaned_to_mapping(cleaned: CleanedRecordSet) -> dict:
    d = cleaned.descriptor
    data = cleaned.to_dict()
    data["descriptor"] = {
        "id": d.id,
        "format": d.format,
        "path": d.path,
        "record_path": d.record_path,
        "priority": d.priority,
        "schema": dict(sorted(d.schema.items())),
    }
    return data


def cleaned_from_mapping(data: Mapping) -> CleanedRecordSet:
    try:
        descriptor = DatasetDescriptor(**data["descriptor"])
        rejected = tuple(
            RejectedValue(r["record"], r["attribute"], r["value"], r["reason"]) for r in data.get("rejected_values", [])
        )
        return CleanedRecordSet(descriptor, tuple(dict(r) for r in data["records"]), rejected)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed cleaned dataset: {exc}") from exc


# -- workspace ---------------------------------------------------------------------


class Workspace:
    """Directory holding the artifacts of one purpose's runs."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock_fd: int | None = None

    def phase_dir(self, phase: str) -> Path:
        return self.root / PHASE_DIRS[phase]

    def path(self, phase: str, name: str) -> Path:
        return self.phase_dir(phase) / name

    def write(self, phase: str | None, name: str, text: str) -> Path:
        target = self.root / name if phase is None else self.path(phase, name)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
        return target

    def write_json(self, phase: str | None, name: str, data: Any) -> Path:
        return self.write(phase, name, dump_json(data))

    def read_text(self, phase: str | None, name: str) -> str:
        target = self.root / name if phase is None else self.path(phase, name)
        if not target.is_file():
            raise MissingArtifactError(f"missing artifact {target}; run the earlier phases first")
        return target.read_text(encoding="utf-8")

    def read_json(self, phase: str | None, name: str) -> Any:
        return json.loads(self.read_text(phase, name))

    def read_yaml(self, phase: str | None, name: str) -> Any:
        return yaml.safe_load(self.read_text(phase, name))

    def clear_from(self, phase: str) -> None:
        """Remove the artifacts of ``phase`` and every later phase."""
        names = list(PHASE_DIRS)
        for later in names[names.index(phase):]:
            directory = self.phase_dir(later)
            if directory.is_dir():
                for path in sorted(directory.rglob("*"), reverse=True):
                    path.rmdir() if path.is_dir() else path.unlink()
                directory.rmdir()

    def write_gate(self, decision: GateDecision) -> Path:
        return self.write_json(decision.phase, GATE_FILE, decision.to_dict())

    def read_gate(self, phase: str) -> GateDecision:
        return GateDecision.from_dict(self.read_json(phase, GATE_FILE))

    def require_passed(self, phase: str) -> GateDecision:
        decision = self.read_gate(phase)
        if not decision.passed:
            raise MissingArtifactError(f"the {phase} gate did not pass; rerun {phase} first")
        return decision

    def gates(self) -> dict[str, GateDecision]:
        return {p: self.read_gate(p) for p in PHASE_DIRS if self.path(p, GATE_FILE).is_file()}

    def ensure_not_empty(self) -> None:
        if not self.root.is_dir() or not any(self.phase_dir(p).is_dir() for p in PHASE_DIRS):
            raise EmptyWorkspaceError(f"workspace {self.root} holds no phase artifacts")

    # the lock is a file created exclusively; a stale one must be removed by hand
    def lock(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        lock_path = self.root / ".lock"
        try:
            self._lock_fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise WorkspaceLockedError(f"workspace {self.root} is in use (remove {lock_path} if stale)") from None
        os.write(self._lock_fd, str(os.getpid()).encode())

    def unlock(self) -> None:
        if self._lock_fd is not None:
            os.close(self._lock_fd)
            self._lock_fd = None
            (self.root / ".lock").unlink(missing_ok=True)

    def __enter__(self):
        self.lock()
        return self

    def __exit__(self, *exc):
        self.unlock()
