from fractions import Fraction

import oracles
from hypothesis import given
from hypothesis import strategies as st

from purposekg.model import PropertyDef
from purposekg.similarity import (
    comparable_property_names,
    jaccard,
    label_similarity,
    levenshtein,
)

words = st.text(alphabet="abcde_", max_size=9)


@given(words, words)
def test_levenshtein_matches_recursive_oracle(a, b):
    assert levenshtein(a, b) == oracles.edit_distance(a, b)


@given(words, words)
def test_label_similarity_bounds_and_symmetry(a, b):
    s = label_similarity(a, b)
    assert 0 <= s <= 1
    assert s == label_similarity(b, a)


def test_label_similarity_values():
    # one deletion over 18 characters
    assert label_similarity("careplan-category", "Care_plan_category") == Fraction(17, 18)
    assert label_similarity("Patient", "patient") == 1
    assert label_similarity("CarePlan", "care_plan") == 1


def test_jaccard():
    assert jaccard({"a", "b"}, {"b", "c"}) == Fraction(1, 3)
    assert jaccard(set(), set()) == 1
    assert jaccard({"a"}, set()) == 0


def test_comparable_names_strip_owner_prefix_and_apply_aliases():
    props = [PropertyDef("patient_identifier"), PropertyDef("name"), PropertyDef("patient")]
    names = comparable_property_names("patient", props, {("patient", "name"): "given_name"})
    assert names == {"patient_identifier": "identifier", "name": "given_name", "patient": "patient"}
