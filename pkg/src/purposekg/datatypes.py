"""Literal parsing shared by schema inference and dataset cleaning."""

from __future__ import annotations

import re
from datetime import date, datetime
from decimal import Decimal, InvalidOperation
from typing import Iterable

from .model import DEFAULT_DATE_PATTERNS

SENTINELS = frozenset({"", "n/a", "-", "unknown", "null"})

_INTEGER = re.compile(r"[+-]?\d+")
_DECIMAL = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")
_TRUE = {"true", "yes", "1"}
_FALSE = {"false", "no", "0"}


def is_sentinel(value: str | None) -> bool:
    return value is None or value.strip().lower() in SENTINELS


def parse_date(text: str, patterns: Iterable[str] = DEFAULT_DATE_PATTERNS) -> date | None:
    """Parse ``text`` with the first pattern that matches all of it.

    ``"iso"`` stands for ISO-8601 (``YYYY-MM-DD``); other entries are
    :func:`~datetime.datetime.strptime` formats.
    """
    text = text.strip()
    for pattern in patterns:
        try:
            if pattern == "iso":
                return date.fromisoformat(text)
            if pattern == "%Y%m%d" and not (len(text) == 8 and text.isdigit()):
                continue
            return datetime.strptime(text, pattern).date()
        except ValueError:
            continue
    return None


def parse_datetime(text: str, patterns: Iterable[str] = DEFAULT_DATE_PATTERNS) -> datetime | None:
    text = text.strip()
    iso = text[:-1] + "+00:00" if text.endswith("Z") else text
    if "T" in iso or " " in iso:
        try:
            return datetime.fromisoformat(iso)
        except ValueError:
            pass
    day = parse_date(text, patterns)
    if day is None:
        return None
    return datetime(day.year, day.month, day.day)


def canonical_value(text: str, datatype: str, patterns: Iterable[str] = DEFAULT_DATE_PATTERNS) -> str:
    """Return the canonical lexical form of ``text`` for ``datatype``.

    Raises ``ValueError`` when the value does not parse.
    """
    text = text.strip()
    if datatype == "string":
        return text
    if datatype == "integer":
        if not _INTEGER.fullmatch(text):
            raise ValueError(f"not an integer: {text!r}")
        return str(int(text))
    if datatype == "decimal":
        if not _DECIMAL.fullmatch(text):
            raise ValueError(f"not a decimal: {text!r}")
        try:
            return str(Decimal(text))
        except InvalidOperation:
            raise ValueError(f"not a decimal: {text!r}") from None
    if datatype == "boolean":
        lowered = text.lower()
        if lowered in _TRUE:
            return "true"
        if lowered in _FALSE:
            return "false"
        raise ValueError(f"not a boolean: {text!r}")
    if datatype == "date":
        parsed = parse_date(text, patterns)
        if parsed is None:
            raise ValueError(f"no date pattern matches {text!r}")
        return parsed.isoformat()
    if datatype == "datetime":
        parsed = parse_datetime(text, patterns)
        if parsed is None:
            raise ValueError(f"no datetime pattern matches {text!r}")
        return parsed.isoformat()
    raise ValueError(f"unknown datatype {datatype!r}")


def infer_datatype(values: Iterable[str | None], patterns: Iterable[str] = DEFAULT_DATE_PATTERNS) -> str:
    """Infer a column type from every non-sentinel value.

    All values parse as dates -> ``date``; all integers -> ``integer``;
    anything else (including an all-empty column) -> ``string``.
    """
    patterns = tuple(patterns)
    present = [v.strip() for v in values if not is_sentinel(v)]
    if not present:
        return "string"
    if all(parse_date(v, patterns) is not None for v in present):
        return "date"
    if all(_INTEGER.fullmatch(v) for v in present):
        return "integer"
    return "string"
