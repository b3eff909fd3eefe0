import json

import numpy as np
import pytest

from hetgl import (GraphValidationError, HeteroGraph, NodeTypeSet,
                   RelationSchema, SolverConfig, enumerate_candidates, fit)
from hetgl import io as hio


@pytest.fixture
def schema():
    nts = NodeTypeSet(("A", "B"), {"A": 2, "B": 1})
    return RelationSchema(nts, ("r1", "r2"),
                          {"r1": ("A", "B"), "r2": ("A", "A")})


@pytest.fixture
def dataset_dir(tmp_path, schema):
    g = HeteroGraph(schema, ("A", "B", "A"),
                    ((0, 1, "r1", 1.25), (0, 2, "r2", 0.5)),
                    labels=(1, 0, 0))
    X = np.array([[0.5, -1.0], [2.0, 0.25], [-0.125, 3.0]])
    hio.save_dataset(tmp_path, g, X)
    return tmp_path


class TestRoundTrip:
    def test_minimal_round_trip_is_identity(self, dataset_dir, tmp_path):
        data = hio.load_dataset(dataset_dir)
        out = tmp_path / "again"
        hio.save_dataset(out, data.graph, data.signals)
        data2 = hio.load_dataset(out)
        assert data2.graph.edges == data.graph.edges
        assert data2.graph.node_types == data.graph.node_types
        assert data2.graph.labels == data.graph.labels
        assert np.array_equal(data2.signals, data.signals)
        assert data2.schema.relations == data.schema.relations

    def test_schema_declaration_order_preserved(self, dataset_dir):
        data = hio.load_dataset(dataset_dir)
        assert data.schema.relations == ("r1", "r2")

    def test_embeddings_round_trip(self, tmp_path, schema):
        E = np.array([[0.25, 0.5, 0.0], [1.0, 0.0, 0.125]])
        hio.save_embeddings(tmp_path / "embeddings.csv", E, schema)
        back = hio.load_embeddings(tmp_path / "embeddings.csv", schema)
        assert np.array_equal(back, E)


class TestLoaderErrors:
    def test_unknown_node_id_in_edges_names_row(self, dataset_dir):
        path = dataset_dir / "edges.csv"
        path.write_text("u,v,relation,weight\nn0,n1,r1,1.0\nn0,ghost,r1,2.0\n")
        with pytest.raises(GraphValidationError, match="row 3.*ghost"):
            hio.load_dataset(dataset_dir)

    def test_feature_count_mismatch_names_both_counts(self, dataset_dir):
        path = dataset_dir / "features.csv"
        path.write_text("id,f0\nn0,1.0\nn1,2.0\n")
        with pytest.raises(GraphValidationError, match="2 feature rows for 3 nodes"):
            hio.load_dataset(dataset_dir)

    def test_duplicate_node_id(self, dataset_dir):
        (dataset_dir / "nodes.csv").write_text(
            "id,type,label\nn0,A,0\nn0,A,1\nn2,B,0\n")
        with pytest.raises(GraphValidationError, match="duplicate node id"):
            hio.load_dataset(dataset_dir)

    def test_unknown_node_type(self, dataset_dir):
        (dataset_dir / "nodes.csv").write_text("id,type\nn0,Z\n")
        with pytest.raises(GraphValidationError, match="unknown node type"):
            hio.load_dataset(dataset_dir)

    def test_unknown_relation(self, dataset_dir):
        (dataset_dir / "edges.csv").write_text(
            "u,v,relation,weight\nn0,n1,bogus,1.0\n")
        with pytest.raises(GraphValidationError, match="unknown relation"):
            hio.load_dataset(dataset_dir)

    def test_bad_weight(self, dataset_dir):
        (dataset_dir / "edges.csv").write_text(
            "u,v,relation,weight\nn0,n1,r1,heavy\n")
        with pytest.raises(GraphValidationError, match="not a number"):
            hio.load_dataset(dataset_dir)

    def test_bad_label(self, dataset_dir):
        (dataset_dir / "nodes.csv").write_text("id,type,label\nn0,A,x\n")
        with pytest.raises(GraphValidationError, match="not an integer"):
            hio.load_dataset(dataset_dir)

    def test_invariants_checked_on_load(self, dataset_dir):
        # duplicate pair with two relations violates one-relation-per-pair
        (dataset_dir / "edges.csv").write_text(
            "u,v,relation,weight\nn0,n2,r2,1.0\nn2,n0,r2,2.0\n")
        with pytest.raises(GraphValidationError):
            hio.load_dataset(dataset_dir)

    def test_malformed_schema(self, tmp_path):
        (tmp_path / "schema.json").write_text(json.dumps({"node_types": {}}))
        with pytest.raises(GraphValidationError, match="malformed schema"):
            hio.load_schema(tmp_path / "schema.json")


class TestResults:
    def test_learned_edges_above_threshold_only(self, tmp_path, schema):
        cands = enumerate_candidates(("A", "B", "A"), schema)
        w = np.array([0.6, 0.0, 0.2])[:cands.size]
        hio.save_learned_edges(tmp_path / "learned_edges.csv", cands, w,
                               threshold=0.1)
        lines = (tmp_path / "learned_edges.csv").read_text().strip().split("\n")
        assert lines[0] == "u,v,relation,weight,score"
        assert len(lines) == 1 + int((w > 0.1).sum())

    def test_save_result_writes_everything(self, tmp_path):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((6, 5))
        from hetgl import single_type_schema
        res = fit(X, ("node",) * 6, single_type_schema(1), SolverConfig(seed=0))
        from hetgl.metrics import EvalReport
        report = EvalReport({"auc": 0.9}, {"rel0": 0.9}, seed=0, config={})
        hio.save_result(tmp_path, res, report, threshold=0.0)
        assert (tmp_path / "learned_edges.csv").exists()
        assert (tmp_path / "embeddings.csv").exists()
        payload = json.loads((tmp_path / "metrics.json").read_text())
        assert payload["metrics"]["auc"] == 0.9
