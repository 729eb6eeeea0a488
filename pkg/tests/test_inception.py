from fractions import Fraction

import pytest
from conftest import EHR
from hypothesis import given, settings
from hypothesis import strategies as st

from purposekg.errors import ValidationError
from purposekg.inception import collect_resources, extract_elements, match_schema
from purposekg.ingest import load_dataset, parse_purpose
from purposekg.metrics import MetricValue
from purposekg.model import (
    AliasMap,
    Category,
    CompetencyQuery,
    DatasetDescriptor,
    ElementKey,
    EType,
    GateThresholds,
    PropertyDef,
)


def _cq(i, category, **etypes):
    return CompetencyQuery(
        i, f"q{i}", "a", category, tuple(EType(n, tuple(PropertyDef(p) for p in props)) for n, props in etypes.items())
    )


def _descriptor(*attrs, id="d", priority=1):
    return DatasetDescriptor(id, "csv", f"{id}.csv", priority=priority, schema={a: "string" for a in attrs})


def test_elements_take_most_reusable_category(ehr_purpose):
    elements = {e.name: e for e in extract_elements(ehr_purpose.cqs)}
    assert elements["medication"].category is Category.CORE
    medication = elements["medication"]
    assert medication.property("medication_date").category is Category.CORE
    assert medication.property("medication_text_note").category is Category.CONTEXTUAL
    assert medication.property("medication_date").datatype == "datetime"
    assert elements["translation"].category is Category.CONTEXTUAL


def test_shared_property_gets_max_category():
    cqs = [_cq(1, "contextual", Patient=["name"]), _cq(2, "common", Patient=["name", "age"])]
    patient = extract_elements(cqs)[0]
    assert patient.category is Category.COMMON
    assert patient.property("name").category is Category.COMMON


EHR_CQS = parse_purpose(EHR / "purpose.yaml").cqs


@settings(max_examples=30)
@given(st.permutations([0, 1, 2]))
def test_extraction_is_order_independent(order):
    cqs = [EHR_CQS[i] for i in order]
    assert extract_elements(cqs) == extract_elements(EHR_CQS)


def test_inconsistent_annotations_rejected():
    a = CompetencyQuery(1, "q", "a", "core", (EType("M", (PropertyDef("s", "object", range_etype="P"),)), EType("P")))
    b = CompetencyQuery(2, "q", "a", "core", (EType("M", (PropertyDef("s"),)),))
    with pytest.raises(ValidationError):
        extract_elements([a, b])
    with pytest.raises(ValidationError):
        extract_elements([])
    with pytest.raises(ValidationError):
        extract_elements([a, a])


def test_match_methods_in_order():
    elements = extract_elements([_cq(1, "common", Patient=["name", "surname", "care_plan_category"])])
    descriptor = _descriptor("firstname", "surname", "careplan-category", "noise")
    report = match_schema(elements, descriptor, AliasMap({"firstname": "Patient.name"}))
    assert set(report.pairs) == {
        ("firstname", ElementKey("patient", "name"), "alias"),
        ("surname", ElementKey("patient", "surname"), "name"),
        ("careplan_category", ElementKey("patient", "care_plan_category"), "similarity"),
    }
    assert report.unmatched_attributes == ("noise",)
    assert report.coverage[Category.COMMON].value == 1


def test_similarity_threshold_is_inclusive_and_configurable():
    elements = extract_elements([_cq(1, "core", Drug=["abcd"])])
    # one substitution in four characters -> similarity exactly 0.75
    assert match_schema(elements, _descriptor("abcx")).pairs
    assert not match_schema(elements, _descriptor("abcx"), threshold=0.8).pairs
    assert not match_schema(elements, _descriptor("abcx"), AliasMap(similarity_threshold=0.9)).pairs


def test_more_reusable_category_claims_attribute_first():
    elements = extract_elements([_cq(1, "contextual", A=["codes"]), _cq(2, "common", B=["coder"])])
    report = match_schema(elements, _descriptor("code"))
    # both score 0.8 against "code"; the Common property is processed first
    assert report.pairs == (("code", ElementKey("b", "coder"), "similarity"),)


def test_references_count_toward_coverage(ehr_purpose, ehr_dir):
    elements = extract_elements(ehr_purpose.cqs)
    loaded = load_dataset(ehr_purpose.descriptor("d1"), ehr_dir)
    report = match_schema(elements, loaded.descriptor, ehr_purpose.alias_map("d1"))
    assert report.coverage[Category.COMMON].value == Fraction(3, 6)
    assert report.coverage[Category.CORE].value == Fraction(4, 5)
    assert report.coverage[Category.CONTEXTUAL].value == Fraction(1, 4)
    assert ("cd_atc", ElementKey("drug", "code_value"), "alias") in report.pairs
    assert ("cd_atc", ElementKey("medication", "drug_identifier")) in report.references


def test_bad_aliases():
    elements = extract_elements([_cq(1, "core", Drug=["code"])])
    with pytest.raises(ValidationError):
        match_schema(elements, _descriptor("x"), AliasMap({"x": "Drug.colour"}))
    with pytest.raises(ValidationError):
        match_schema(elements, _descriptor("x", "y"), AliasMap({"x": "Drug.code", "y": "Drug.code"}))
    with pytest.raises(ValidationError):
        match_schema(elements, _descriptor("x"), AliasMap(references={"x": "Drug.code"}))


attribute_names = st.lists(st.sampled_from(["name", "surname", "dob", "code", "addr", "zip", "city"]), unique=True)


@given(attribute_names, st.sampled_from(["name", "surname", "dob", "code"]))
def test_alias_to_uncovered_property_never_lowers_coverage(attrs, target):
    elements = extract_elements([_cq(1, "core", P=["name", "surname", "dob", "code"])])
    descriptor = _descriptor(*(attrs + ["extra_col"]))
    before = match_schema(elements, descriptor)
    key = ElementKey("p", target)
    if key in before.covered:
        return
    after = match_schema(elements, descriptor, AliasMap({"extra_col": key}))
    assert after.overall.value >= before.overall.value


def _report(elements, descriptor):
    return match_schema(elements, descriptor)


def test_collect_resources_reasons():
    elements = extract_elements([_cq(1, "common", P=["a", "b"]), _cq(2, "contextual", Q=["c", "d", "e", "f"])])
    good = _descriptor("a", id="good", priority=1)
    weak = _descriptor("c", id="weak", priority=2)
    none = _descriptor("zzz", id="none", priority=3)
    reports = [_report(elements, d) for d in (good, weak, none)]
    overlaps = {"o1": MetricValue("etype_overlap", Fraction(1, 2), 2, 1, 1), "o2": MetricValue("etype_overlap", Fraction(0), 2, 0, 0)}
    selection = collect_resources([good, weak, none], reports, overlaps, GateThresholds())
    assert selection.kept_datasets == ("good",)
    assert selection.dropped_datasets["none"] == "no CQ overlap"
    assert selection.dropped_datasets["weak"].startswith("coverage below threshold")
    assert selection.kept_ontologies == ("o1",)
    assert "o2" in selection.dropped_ontologies
    with pytest.raises(ValidationError):
        collect_resources([good, weak], reports[:1], {}, GateThresholds())
