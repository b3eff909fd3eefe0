import numpy as np
import pytest

from hetgl import (GraphValidationError, HeteroGraph, NodeTypeSet,
                   RelationSchema, SchemaError, single_type_schema)


@pytest.fixture
def schema():
    nts = NodeTypeSet(("A", "B"), {"A": 2, "B": 3})
    return RelationSchema(nts, ("r1", "r2", "r3"),
                          {"r1": ("A", "B"), "r2": ("A", "B"), "r3": ("A", "A")})


class TestNodeTypeSet:
    def test_duplicate_names_rejected(self):
        with pytest.raises(SchemaError):
            NodeTypeSet(("A", "A"), {"A": 1})

    def test_empty_name_rejected(self):
        with pytest.raises(SchemaError):
            NodeTypeSet(("A", ""), {"A": 1, "": 1})

    def test_class_count_must_be_positive(self):
        with pytest.raises(SchemaError):
            NodeTypeSet(("A",), {"A": 0})

    def test_missing_count_rejected(self):
        with pytest.raises(SchemaError):
            NodeTypeSet(("A", "B"), {"A": 1})


class TestRelationSchema:
    def test_relations_between_declaration_order(self, schema):
        assert schema.relations_between("A", "B") == ("r1", "r2")
        assert schema.relations_between("B", "A") == ("r1", "r2")
        assert schema.relations_between("A", "A") == ("r3",)
        assert schema.relations_between("B", "B") == ()

    def test_inverse_index_is_preimage_of_endpoints(self, schema):
        # reconstruct the cell map from the endpoint map and compare
        rebuilt = {}
        for r in schema.relations:
            rebuilt.setdefault(frozenset(schema.endpoints[r]), []).append(r)
        for pair, rels in rebuilt.items():
            a, b = (tuple(pair) * 2)[:2]
            assert schema.relations_between(a, b) == tuple(rels)
        # every relation appears in exactly one cell
        counts = {r: 0 for r in schema.relations}
        for rels in rebuilt.values():
            for r in rels:
                counts[r] += 1
        assert all(c == 1 for c in counts.values())

    def test_unknown_endpoint_type_rejected(self):
        nts = NodeTypeSet(("A",), {"A": 1})
        with pytest.raises(SchemaError):
            RelationSchema(nts, ("r1",), {"r1": ("A", "Z")})

    def test_duplicate_relation_rejected(self):
        nts = NodeTypeSet(("A",), {"A": 1})
        with pytest.raises(SchemaError):
            RelationSchema(nts, ("r1", "r1"), {"r1": ("A", "A")})

    def test_unknown_relation_index(self, schema):
        with pytest.raises(SchemaError):
            schema.relation_index("nope")


class TestHeteroGraph:
    def test_edges_canonicalized_and_sorted(self, schema):
        g = HeteroGraph(schema, ("A", "B", "A"),
                        ((2, 0, "r3", 1.0), (1, 0, "r1", 2.0)))
        assert g.edges == ((0, 1, "r1", 2.0), (0, 2, "r3", 1.0))

    def test_self_loop_rejected(self, schema):
        with pytest.raises(GraphValidationError):
            HeteroGraph(schema, ("A", "A"), ((0, 0, "r3", 1.0),))

    def test_inadmissible_relation_rejected(self, schema):
        with pytest.raises(GraphValidationError):
            HeteroGraph(schema, ("A", "A"), ((0, 1, "r1", 1.0),))

    def test_duplicate_triple_rejected(self, schema):
        with pytest.raises(GraphValidationError):
            HeteroGraph(schema, ("A", "B"),
                        ((0, 1, "r1", 1.0), (1, 0, "r1", 2.0)))

    def test_one_relation_per_pair(self, schema):
        with pytest.raises(GraphValidationError):
            HeteroGraph(schema, ("A", "B"),
                        ((0, 1, "r1", 1.0), (0, 1, "r2", 2.0)))

    def test_nonpositive_weight_rejected(self, schema):
        with pytest.raises(GraphValidationError):
            HeteroGraph(schema, ("A", "B"), ((0, 1, "r1", 0.0),))

    def test_label_range_checked(self, schema):
        HeteroGraph(schema, ("A", "B"), (), labels=(1, 2))
        with pytest.raises(GraphValidationError):
            HeteroGraph(schema, ("A", "B"), (), labels=(2, 0))

    def test_unknown_node_type_rejected(self, schema):
        with pytest.raises(SchemaError):
            HeteroGraph(schema, ("A", "Z"), ())

    def test_degrees(self, schema):
        g = HeteroGraph(schema, ("A", "B", "A"),
                        ((0, 1, "r1", 2.0), (0, 2, "r3", 1.0)))
        assert np.allclose(g.degrees(), [3.0, 2.0, 1.0])


def test_single_type_schema_helper():
    s = single_type_schema(3)
    assert s.relations == ("rel0", "rel1", "rel2")
    assert s.relations_between("node", "node") == ("rel0", "rel1", "rel2")
