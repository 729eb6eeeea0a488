from fractions import Fraction

import oracles
import pytest

from purposekg.alignment import (
    clean_dataset,
    etr_predict,
    etype_overlap,
    generate_etg,
    model_only_etg,
    property_shareability,
    select_ontologies,
)
from purposekg.errors import MappingLossError, NoOntologyError
from purposekg.ingest import OntologyDocument, RecordSet
from purposekg.model import (
    DatasetDescriptor,
    ElementKey,
    ETGModel,
    EType,
    GateThresholds,
    OntologyAliases,
    PropertyDef,
)
from purposekg.pipeline import run_inception, run_modeling


def _sim(a, b):
    return 1 - Fraction(oracles.edit_distance(a, b), max(len(a), len(b)))


def _et(name, *props, **objects):
    defs = [PropertyDef(p) for p in props] + [PropertyDef(k, "object", range_etype=v) for k, v in objects.items()]
    return EType(name, tuple(defs))


@pytest.fixture
def ehr_alignment_inputs(ehr_purpose):
    inception, _ = run_inception(ehr_purpose)
    modeling, _ = run_modeling(ehr_purpose, inception)
    return ehr_purpose, modeling.model, inception.kept_ontologies()


def test_fixture_scores(ehr_alignment_inputs):
    purpose, model, (fhir,) = ehr_alignment_inputs
    vector = etr_predict(model, fhir, purpose.ontology_aliases)
    w_name, w_prop = Fraction(2, 5), Fraction(3, 5)
    # aliased etype names score 1; property sets counted by hand
    expected = {
        ("patient", "patient"): w_name + w_prop * Fraction(4, 6),
        ("medication", "medication_statement"): w_name + w_prop * Fraction(5, 7),
        ("drug", "medication"): w_name + w_prop * Fraction(2, 5),
        ("care_plan", "care_plan"): w_name + w_prop * Fraction(1, 4),
        ("vital_signs", "observation"): w_name + w_prop * Fraction(1, 5),
    }
    for (m, o), score in expected.items():
        assert vector.score(m, o) == score
    assert float(vector.score("patient", "patient")) == pytest.approx(0.8)
    assert vector.assignments == {
        "care_plan": "care_plan",
        "drug": "medication",
        "medication": "medication_statement",
        "patient": "patient",
        "vital_signs": "observation",
    }
    assert all(s < Fraction(1, 2) for m, _, s in vector.entries if m == "translation")
    translation_vs_plan = w_name * _sim("translation", "care_plan") + w_prop * Fraction(0, 6)
    assert vector.score("translation", "care_plan") == translation_vs_plan


def test_fixture_overlap_and_shareability(ehr_alignment_inputs):
    purpose, model, (fhir,) = ehr_alignment_inputs
    assert etype_overlap(fhir, model, purpose.ontology_aliases).value == Fraction(5, 6)
    (ranking,) = select_ontologies(model, [fhir], purpose.thresholds, purpose.ontology_aliases)
    assert ranking.shareability == 1
    assert ranking.noncontextual_overlap == pytest.approx(1.0)


def test_small_overlap():
    model = ETGModel(
        etypes=(
            _et("Person", "name", "birth_date"),
            _et("Address", "street", "city"),
            _et("Order", "total", "date"),
            _et("Unicorn", "horn_length"),
        )
    )
    ontology = OntologyDocument(
        etypes=(_et("Person", "name", "birth_date"), _et("Address", "street", "city", "zip"), _et("Order", "total")),
        name="o",
    )
    assert etype_overlap(ontology, model).value == Fraction(3, 4)
    assert etype_overlap(OntologyDocument(etypes=(), name="empty"), model).value == 0


def test_property_shareability_examples():
    person = _et("Person", "name", "birth_date")
    assert property_shareability(_et("Person", "name", "birth_date", "gender"), person).value == 1
    assert property_shareability(_et("Human", "name"), person).value == Fraction(1, 2)
    assert property_shareability(_et("Thing", "weight"), person).value == 0
    aliases = OntologyAliases(properties={"Person.birth_date": "dob"})
    assert property_shareability(_et("Person", "dob"), person, aliases).value == Fraction(1, 2)


def test_no_ontology():
    model = ETGModel(etypes=(_et("Person", "name"),))
    with pytest.raises(NoOntologyError):
        select_ontologies(model, [], GateThresholds())
    with pytest.raises(NoOntologyError):
        select_ontologies(model, [OntologyDocument(etypes=(_et("Rock", "mass"),), name="geo")], GateThresholds())


def test_generated_etg_provenance(ehr_alignment_inputs):
    purpose, model, (fhir,) = ehr_alignment_inputs
    vector = etr_predict(model, fhir, purpose.ontology_aliases)
    etg = generate_etg(model, [vector], [fhir], purpose.ontology_aliases)
    assert etg.etype_names == {"patient", "medication_statement", "medication", "care_plan", "observation", "translation"}
    patient = etg.etype("patient")
    assert patient.provenance == "ontology:fhir"
    assert {p.name: p.provenance for p in patient.properties} == {
        "identifier": "ontology:fhir",
        "given_name": "ontology:fhir",
        "family_name": "ontology:fhir",
        "birth_date": "ontology:fhir",
    }
    assert etg.etype("translation").provenance == "model"
    assert etg.model_map[ElementKey("drug", "code_value")] == ElementKey("medication", "code_value")
    assert etg.model_map[ElementKey("medication", "drug_identifier")] == ElementKey("medication_statement", "medication")
    statement = etg.etype("medication_statement")
    assert statement.property("medication").range_etype == "medication"
    assert statement.property("subject").range_etype == "patient"
    assert etg.datatype_conflicts == ()
    # every dataset attribute keeps a target
    assert set(etg.mapping_preservation) == set(model.mapping)


def test_mapping_loss_on_name_collision():
    model = ETGModel(
        etypes=(_et("Medication", "code", "form"), _et("Drug", "label")),
        mapping={("d", "code"): ElementKey("medication", "code"), ("d", "label"): ElementKey("drug", "label")},
    )
    ontology = OntologyDocument(etypes=(_et("Drug", "code", "form"),), name="o")
    aliases = OntologyAliases(etypes={"Medication": "Drug"})
    vector = etr_predict(model, ontology, aliases)
    assert vector.assignments == {"medication": "drug"}
    with pytest.raises(MappingLossError) as info:
        generate_etg(model, [vector], [ontology], aliases)
    assert "d/label" in str(info.value) and "d/code" in str(info.value)


def test_model_only_etg_keeps_everything():
    model = ETGModel(etypes=(_et("Person", "name"),), mapping={("d", "n"): ElementKey("person", "name")})
    etg = model_only_etg(model)
    assert [e.name for e in etg.etypes] == ["person"]
    assert all(e.provenance == "model" and all(p.provenance == "model" for p in e.properties) for e in etg.etypes)
    assert etg.mapping_preservation == model.mapping


def test_clean_dataset_nulls_and_rejects():
    model = ETGModel(
        etypes=(EType("Person", (PropertyDef("name"), PropertyDef("born", datatype="date"), PropertyDef("age", datatype="integer"))),),
        mapping={("d", c): ElementKey("person", p) for c, p in (("n", "name"), ("b", "born"), ("a", "age"))},
    )
    etg = model_only_etg(model)
    descriptor = DatasetDescriptor("d", "csv", "d.csv", priority=1, schema={"n": "string", "b": "date", "a": "integer", "x": "string"})
    records = RecordSet(
        descriptor,
        (
            {"n": "  Ada ", "b": "12/03/1950", "a": "71", "x": "dropped"},
            {"n": "N/A", "b": "not a date", "a": "-", "x": ""},
        ),
    )
    cleaned = clean_dataset(records, etg)
    assert cleaned.records[0] == {"n": "Ada", "b": "1950-03-12", "a": "71"}
    assert cleaned.records[1] == {"n": None, "b": None, "a": None}
    assert [(r.record_index, r.attribute, r.reason == "sentinel") for r in cleaned.rejected_values] == [
        (1, "a", True),
        (1, "b", False),
        (1, "n", True),
    ]
