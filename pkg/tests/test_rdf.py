import oracles
import pytest
import rdflib
import scenarios
from hypothesis import given
from hypothesis import strategies as st

from purposekg.errors import InvalidBaseIriError
from purposekg.integration import build_eg
from purposekg.rdf import check_base_iri, export_rdf, fnv1a_64, idhash, literal


def _graph():
    columns = scenarios.person_columns("people") | {("orders", "no"): "order.number", ("orders", "sum"): "order.total"}
    etg = scenarios.etg(columns, {("orders", "cust"): "order.customer"})
    people = scenarios.dataset("people", 1, [{"id": "1", "name": 'Ada "A"\nL'}, {"id": "2", "name": None}])
    orders = scenarios.dataset("orders", 2, [{"no": "A", "sum": "3.5", "cust": "1"}])
    return build_eg(etg, [people, orders], scenarios.RULES)


def test_fnv_published_vectors():
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8
    assert idhash("patient:a") == "af63dc4c8601ec8c"


def test_export_counts_and_parses():
    eg = _graph()
    text = export_rdf(eg, "http://example.org/kg/")
    assert text.endswith("\n")
    lines = text.splitlines()
    assert len(lines) == oracles.expected_triples(eg.entities)
    assert lines == sorted(lines)
    graph = oracles.parse_ntriples(text)
    assert len(graph) == len(lines)
    names = {str(o) for _, p, o in graph if str(p).endswith("/prop/person/name")}
    assert names == {'Ada "A"\nL'}
    totals = [o for _, p, o in graph if str(p).endswith("/prop/order/total")]
    assert totals == [rdflib.Literal("3.5", datatype=rdflib.XSD.decimal)]
    order_iri = f"http://example.org/kg/entity/order/{idhash('order:A')}"
    person_iri = f"http://example.org/kg/entity/person/{idhash('person:1')}"
    assert (rdflib.URIRef(order_iri), rdflib.URIRef("http://example.org/kg/prop/order/customer"), rdflib.URIRef(person_iri)) in graph


def test_export_is_deterministic():
    assert export_rdf(_graph(), "urn:x:kg") == export_rdf(_graph(), "urn:x:kg")


@pytest.mark.parametrize(
    "iri", ["example.org/kg", "http://", "http://ex.org/kg?x=1", "http://ex.org/#f", "http://ex org/", "", "1http://x"]
)
def test_invalid_base_iri(iri):
    with pytest.raises(InvalidBaseIriError):
        check_base_iri(iri)


def test_base_iri_normalized():
    assert check_base_iri("http://example.org/kg//") == "http://example.org/kg"
    assert check_base_iri("urn:example:kg") == "urn:example:kg"


def test_literals():
    assert literal("x", "string") == '"x"'
    assert literal("1950-03-12", "date") == '"1950-03-12"^^<http://www.w3.org/2001/XMLSchema#date>'
    assert literal("2021-03-12T08:00:00", "datetime").endswith("#dateTime>")
    assert literal("a\\b\t", None) == '"a\\\\b\\t"'


@given(st.text(max_size=30))
def test_any_string_literal_round_trips(value):
    line = f"<urn:s> <urn:p> {literal(value, 'string')} .\n"
    (triple,) = oracles.parse_ntriples(line)
    assert str(triple[2]) == value
