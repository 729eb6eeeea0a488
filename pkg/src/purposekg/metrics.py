"""Set-ratio metrics over element sets, in exact rational arithmetic.

coverage       |a & b| / |a|
extensiveness  (|b| - |a & b|) / (|a| + |b| - |a & b|)
sparsity       (|a| + |b| - 2|a & b|) / (|a| + |b| - |a & b|)

The two ontology-selection metrics (etype overlap, property shareability)
are coverages computed over matched etypes and shared property names.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import AbstractSet

from .errors import EmptyAlphaError, EmptyUniverseError

METRIC_NAMES = ("coverage", "extensiveness", "sparsity", "etype_overlap", "property_shareability")


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: Fraction
    alpha_size: int
    beta_size: int
    intersection_size: int

    def __post_init__(self):
        if self.name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.name!r}")
        if not 0 <= self.value <= 1:
            raise ValueError(f"{self.name} value {self.value} outside [0, 1]")
        if self.intersection_size > min(self.alpha_size, self.beta_size):
            raise ValueError("intersection larger than an operand")

    def __float__(self):
        return float(self.value)

    def renamed(self, name: str) -> "MetricValue":
        return MetricValue(name, self.value, self.alpha_size, self.beta_size, self.intersection_size)


def _sizes(alpha: AbstractSet, beta: AbstractSet) -> tuple[int, int, int]:
    return len(alpha), len(beta), len(alpha & beta)


def coverage(alpha: AbstractSet, beta: AbstractSet) -> MetricValue:
    a, b, i = _sizes(alpha, beta)
    if a == 0:
        raise EmptyAlphaError("coverage is undefined for an empty alpha set")
    return MetricValue("coverage", Fraction(i, a), a, b, i)


def extensiveness(alpha: AbstractSet, beta: AbstractSet) -> MetricValue:
    a, b, i = _sizes(alpha, beta)
    if a + b - i == 0:
        raise EmptyUniverseError("extensiveness is undefined when both sets are empty")
    return MetricValue("extensiveness", Fraction(b - i, a + b - i), a, b, i)


def sparsity(alpha: AbstractSet, beta: AbstractSet) -> MetricValue:
    a, b, i = _sizes(alpha, beta)
    if a + b - i == 0:
        raise EmptyUniverseError("sparsity is undefined when both sets are empty")
    return MetricValue("sparsity", Fraction(a + b - 2 * i, a + b - i), a, b, i)


def etype_overlap(ontology, model, aliases=None, **options) -> MetricValue:
    """Share of model etypes recognized in ``ontology``; see the alignment module."""
    from .alignment import etype_overlap as _overlap

    return _overlap(ontology, model, aliases, **options)


def property_shareability(ontology_etype, model_etype, aliases=None) -> MetricValue:
    """Share of a model etype's properties also found on ``ontology_etype``."""
    from .alignment import property_shareability as _shareability

    return _shareability(ontology_etype, model_etype, aliases)
