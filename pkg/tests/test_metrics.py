from fractions import Fraction

import oracles
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from purposekg.errors import EmptyAlphaError, EmptyUniverseError
from purposekg.metrics import MetricValue, coverage, extensiveness, sparsity
from purposekg.model import ElementKey

elements = st.frozensets(st.integers(0, 40), max_size=30)
nonempty = st.frozensets(st.integers(0, 40), min_size=1, max_size=30)


def test_coverage_worked_values():
    assert coverage({"a", "b", "c", "d"}, {"b", "c", "e"}).value == Fraction(1, 2)
    cq2 = {ElementKey("medication", p) for p in ("medication_subject", "medication_date", "drug_identifier")}
    cq2 |= {ElementKey("drug", "coding_system"), ElementKey("drug", "code_value")}
    dataset = {
        ElementKey("patient", "patient_identifier"),
        ElementKey("patient", "name"),
        ElementKey("patient", "surname"),
        ElementKey("drug", "code_value"),
        ElementKey("medication", "medication_date"),
        ElementKey("medication", "medication_text_note"),
    }
    value = coverage(cq2, dataset)
    assert value.value == Fraction(2, 5)
    assert (value.alpha_size, value.beta_size, value.intersection_size) == (5, 6, 2)


def test_extensiveness_and_sparsity_worked_values():
    assert extensiveness({"a", "b", "c"}, {"c", "d"}).value == Fraction(1, 4)
    assert sparsity({"a", "b", "c"}, {"c", "d"}).value == Fraction(3, 4)
    assert extensiveness({"a", "b"}, {"a", "b"}).value == 0
    assert extensiveness(set(), {"x"}).value == 1
    assert sparsity({"a"}, {"b"}).value == 1


def test_empty_inputs_raise():
    with pytest.raises(EmptyAlphaError):
        coverage(set(), {"a"})
    with pytest.raises(ZeroDivisionError):
        coverage(set(), set())
    with pytest.raises(EmptyUniverseError):
        extensiveness(set(), set())
    with pytest.raises(EmptyUniverseError):
        sparsity(set(), set())


def test_metric_value_rejects_bad_fields():
    with pytest.raises(ValueError):
        MetricValue("coverage", Fraction(3, 2), 2, 2, 2)
    with pytest.raises(ValueError):
        MetricValue("coverage", Fraction(1, 2), 1, 4, 2)
    with pytest.raises(ValueError):
        MetricValue("precision", Fraction(1, 2), 2, 2, 1)
    assert float(MetricValue("sparsity", Fraction(1, 4), 3, 2, 1)) == 0.25


@given(nonempty, elements)
def test_coverage_matches_oracle(a, b):
    assert coverage(a, b).value == oracles.coverage(a, b)
    assert 0 <= coverage(a, b).value <= 1
    assert (coverage(a, b).value == 1) == (a <= b)


@given(elements, elements)
def test_ext_spr_match_oracle_and_identity(a, b):
    if not a and not b:
        return
    ext_ab, ext_ba, spr = extensiveness(a, b).value, extensiveness(b, a).value, sparsity(a, b).value
    assert ext_ab == oracles.extensiveness(a, b)
    assert spr == oracles.sparsity(a, b)
    assert ext_ab + ext_ba == spr
    assert spr == sparsity(b, a).value
    assert (spr == 0) == (a == b)
    assert 0 <= ext_ab <= 1 and 0 <= spr <= 1


@settings(max_examples=50)
@given(nonempty)
def test_self_identities(s):
    assert coverage(s, s).value == 1
    assert sparsity(s, s).value == 0
