"""String similarity used by the schema matcher and the etype scorer.

Scores are exact fractions so threshold comparisons have no rounding slop.
"""

from __future__ import annotations

from fractions import Fraction
from typing import AbstractSet

from .model import normalize_label


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


def label_similarity(a: str, b: str) -> Fraction:
    """1 - distance / longer length, over normalized labels; two empties score 1."""
    a, b = normalize_label(a), normalize_label(b)
    longest = max(len(a), len(b))
    if longest == 0:
        return Fraction(1)
    return 1 - Fraction(levenshtein(a, b), longest)


def jaccard(a: AbstractSet, b: AbstractSet) -> Fraction:
    union = len(a | b)
    if union == 0:
        return Fraction(1)
    return Fraction(len(a & b), union)


def comparable_property_names(etype_name: str, properties, aliases=None) -> dict[str, str]:
    """Map each property name to the name used when comparing etypes.

    An alias wins; otherwise a leading ``<etype>_`` prefix is dropped, so
    ``patient_identifier`` on ``patient`` compares as ``identifier``.
    """
    aliases = aliases or {}
    prefix = f"{etype_name}_"
    out = {}
    for prop in properties:
        name = prop.name if hasattr(prop, "name") else str(prop)
        alias = aliases.get((etype_name, name))
        if alias:
            out[name] = alias
        elif name.startswith(prefix) and len(name) > len(prefix):
            out[name] = name[len(prefix):]
        else:
            out[name] = name
    return out
