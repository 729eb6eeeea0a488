"""Deterministic N-Triples export of an EntityGraph.

IRIs::

    {base}/etype/{etype}
    {base}/prop/{etype}/{property}
    {base}/entity/{etype}/{idhash}

``idhash`` is the 64-bit FNV-1a hash of the entity key (the id without its
etype prefix), in 16 hex digits, so raw identifiers never appear in IRIs.
Output lines are sorted, making the file byte-identical for equal graphs.
"""

from __future__ import annotations

import re
from urllib.parse import quote, urlsplit

from .errors import InvalidBaseIriError
from .integration import entity_key
from .model import EntityGraph

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
XSD = "http://www.w3.org/2001/XMLSchema#"
XSD_TYPES = {
    "integer": XSD + "integer",
    "decimal": XSD + "decimal",
    "date": XSD + "date",
    "datetime": XSD + "dateTime",
    "boolean": XSD + "boolean",
}

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_IRI_FORBIDDEN = re.compile(r'[\x00-\x20<>"{}|^`\\]')


def fnv1a_64(data: bytes) -> int:
    value = _FNV_OFFSET
    for byte in data:
        value ^= byte
        value = (value * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return value


def idhash(entity_id: str) -> str:
    return f"{fnv1a_64(entity_key(entity_id).encode('utf-8')):016x}"


def check_base_iri(base_iri: str) -> str:
    """Validate an absolute base IRI and strip trailing slashes."""
    if not isinstance(base_iri, str) or _IRI_FORBIDDEN.search(base_iri):
        raise InvalidBaseIriError(f"invalid base IRI {base_iri!r}")
    parts = urlsplit(base_iri)
    if not parts.scheme or not re.fullmatch(r"[A-Za-z][A-Za-z0-9+.\-]*", parts.scheme):
        raise InvalidBaseIriError(f"base IRI {base_iri!r} is not absolute")
    if parts.scheme in ("http", "https") and not parts.netloc:
        raise InvalidBaseIriError(f"base IRI {base_iri!r} has no host")
    if parts.query or parts.fragment:
        raise InvalidBaseIriError(f"base IRI {base_iri!r} must not carry a query or fragment")
    return base_iri.rstrip("/")


def _segment(name: str) -> str:
    return quote(name, safe="_-.~")


def _escape(text: str) -> str:
    out = []
    for ch in text:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return "".join(out)


def literal(value: str, datatype: str | None) -> str:
    tag = XSD_TYPES.get(datatype or "string")
    quoted = f'"{_escape(value)}"'
    return f"{quoted}^^<{tag}>" if tag else quoted


def export_triples(eg: EntityGraph, base_iri: str) -> list[str]:
    base = check_base_iri(base_iri)
    iris = {}
    for entity in eg.entities:
        iri = f"{base}/entity/{_segment(entity.etype)}/{idhash(entity.id)}"
        if iri in iris.values():
            raise ValueError(f"idhash collision for {entity.id}")
        iris[entity.id] = iri

    lines = []
    for entity in eg.entities:
        subject = f"<{iris[entity.id]}>"
        etype = eg.etg.etype(entity.etype)
        lines.append(f"{subject} <{RDF_TYPE}> <{base}/etype/{_segment(entity.etype)}> .")
        for prop, value in entity.data_values.items():
            if value is None:
                continue
            declared = etype.property(prop)
            predicate = f"<{base}/prop/{_segment(entity.etype)}/{_segment(prop)}>"
            lines.append(f"{subject} {predicate} {literal(value, declared.datatype)} .")
        for prop, targets in entity.object_links.items():
            predicate = f"<{base}/prop/{_segment(entity.etype)}/{_segment(prop)}>"
            for target in targets:
                lines.append(f"{subject} {predicate} <{iris[target]}> .")
    return sorted(lines)


def export_rdf(eg: EntityGraph, base_iri: str) -> str:
    """Render the graph as an N-Triples document (UTF-8 text, one triple per line)."""
    lines = export_triples(eg, base_iri)
    return "".join(line + "\n" for line in lines)
