import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from hetgl import DivergenceError, MetaPath, SolverConfig
from hetgl import experiments as ex
from hetgl.generate import (DGPConfig, SynthesisSpec, WattsStrogatzParams)
from hetgl.types import GraphValidationError, single_type_schema


def tiny_spec(tmp_path=None, trials=2, K=16, methods=("ir", "homogeneous")):
    synth = replace(ex.default_synthetic_spec(n_dims=K),
                    backbone=WattsStrogatzParams(16, 2, 0.1))
    return ex.ExperimentSpec(synthetic=synth, trials=trials, base_seed=3,
                             methods=methods,
                             out_dir=str(tmp_path) if tmp_path else None)


class TestRunExperiment:
    def test_rerun_is_deterministic(self, tmp_path):
        spec = tiny_spec(tmp_path / "a", trials=1)
        t1 = ex.run_experiment(spec)
        t2 = ex.run_experiment(replace(spec, out_dir=str(tmp_path / "b")))
        for r1, r2 in zip(t1.rows, t2.rows):
            for key in r1:
                if key == "runtime_s":
                    continue
                assert r1[key] == r2[key]
        for name in ("metrics.json", "learned_edges.csv"):
            f1 = next((tmp_path / "a").rglob(name))
            f2 = next((tmp_path / "b").rglob(name))
            assert f1.read_bytes() == f2.read_bytes()

    def test_aggregates_recomputable_from_rows(self):
        table = ex.run_experiment(tiny_spec(trials=3, methods=("ir",)))
        rows = [r for r in table.rows if r["error"] is None]
        assert len(rows) == 3
        for agg in table.aggregates():
            vals = np.array([r[agg["metric"]] for r in rows
                             if r["method"] == agg["method"]])
            assert agg["mean"] == pytest.approx(vals.mean(), rel=1e-12)
            expected_std = vals.std(ddof=1) if len(vals) > 1 else 0.0
            assert agg["std"] == pytest.approx(expected_std, rel=1e-12, abs=1e-15)
            assert agg["n"] == len(vals)

    def test_shuffled_trial_order_gives_identical_aggregate(self):
        spec = tiny_spec(trials=3, methods=("ir",))
        table = ex.run_experiment(spec)
        rows = []
        for seed in (5, 3, 4):  # permuted execution order
            row, _, _ = ex.run_trial(spec, "ir", seed)
            rows.append(row)
        shuffled = ex.ResultTable(tuple(rows))
        a1 = [{k: v for k, v in a.items()} for a in table.aggregates()]
        a2 = [{k: v for k, v in a.items()} for a in shuffled.aggregates()]
        assert a1 == a2

    def test_failed_trial_recorded_not_fatal(self, monkeypatch):
        spec = tiny_spec(trials=2, methods=("ir",))
        real_fit = ex.fit

        def flaky(X, types, schema, config):
            if config.seed == spec.base_seed:
                raise DivergenceError("boom", step_size=0.1, iteration=1)
            return real_fit(X, types, schema, config)

        monkeypatch.setattr(ex, "fit", flaky)
        table = ex.run_experiment(spec)
        errors = [r["error"] for r in table.rows]
        assert errors[0] is not None and errors[1] is None

    def test_all_trials_failed_raises(self, monkeypatch):
        spec = tiny_spec(trials=2, methods=("ir",))

        def broken(*args, **kwargs):
            raise DivergenceError("boom")

        monkeypatch.setattr(ex, "fit", broken)
        with pytest.raises(ex.AllTrialsFailedError):
            ex.run_experiment(spec)

    def test_trial_count_validated(self):
        with pytest.raises(GraphValidationError):
            tiny_spec(trials=0)

    def test_resolved_config_written_and_round_trips(self, tmp_path):
        spec = tiny_spec(tmp_path, trials=1)
        ex.run_experiment(spec)
        raw = json.loads((tmp_path / "resolved_config.json").read_text())
        back = ex.spec_from_config(raw)
        assert back.synthetic == spec.synthetic
        assert back.solver == spec.solver
        assert back.trials == spec.trials


class TestSdorSweep:
    def test_achieved_value_forwarded(self):
        # fixed-M construction: M=4, target 0.33 -> s=2 -> achieved 1/3
        synth = SynthesisSpec(WattsStrogatzParams(12, 2, 0.1),
                              single_type_schema(2), 10, 4, None,
                              DGPConfig(nu=0.01))
        spec = ex.ExperimentSpec(synthetic=synth, trials=1, base_seed=0,
                                 methods=("ir", "homogeneous"),
                                 metrics=("auc",))
        rows = ex.sdor_sweep(spec, [0.33], fixed_union=False)
        assert rows[0]["achieved"] == pytest.approx(1 / 3)
        assert rows[0]["auc_ir"] is not None

    def test_infeasible_target_skipped_with_note(self):
        synth = SynthesisSpec(WattsStrogatzParams(12, 2, 0.1),
                              single_type_schema(2), 10, 7, None,
                              DGPConfig(nu=0.01))
        spec = ex.ExperimentSpec(synthetic=synth, trials=1,
                                 methods=("ir", "homogeneous"))
        rows = ex.sdor_sweep(spec, [0.0], fixed_union=False)
        assert rows[0]["note"] == "infeasible"

    def test_requires_two_relations(self):
        synth = SynthesisSpec(WattsStrogatzParams(12, 2, 0.1),
                              single_type_schema(3), 10, 4, None,
                              DGPConfig(nu=0.01))
        spec = ex.ExperimentSpec(synthetic=synth, trials=1)
        with pytest.raises(GraphValidationError):
            ex.sdor_sweep(spec, [0.0])

    def test_fixed_union_uses_growing_support(self, tmp_path):
        spec = tiny_spec(trials=1, methods=("ir", "homogeneous"))
        rows = ex.sdor_sweep(replace(spec, out_dir=str(tmp_path)), [0.0, 1.0])
        assert rows[0]["achieved"] == 0.0
        assert rows[1]["achieved"] == 1.0
        assert (tmp_path / "sweep_sdor.csv").exists()


class TestPearson:
    def test_hand_pairs(self):
        # r for (1,2),(2,4),(3,6) is exactly 1; anti-correlated is -1
        assert ex.pearson([1, 2, 3], [2, 4, 6])[0] == pytest.approx(1.0)
        assert ex.pearson([1, 2, 3], [6, 4, 2])[0] == pytest.approx(-1.0)
        r, degenerate = ex.pearson([1.0, 2.0, 4.0], [1.0, 3.0, 2.0])
        x = np.array([1.0, 2.0, 4.0]) - 7 / 3
        y = np.array([1.0, 3.0, 2.0]) - 2.0
        assert r == pytest.approx(float(x @ y / np.sqrt((x @ x) * (y @ y))))
        assert degenerate is False

    def test_degenerate_flagged_as_zero(self):
        r, degenerate = ex.pearson([1, 2, 3], [5, 5, 5])
        assert r == 0.0 and degenerate is True


class TestSubgraphTools:
    def test_bfs_ball_and_induced_subgraph(self):
        from hetgl import HeteroGraph, NodeTypeSet, RelationSchema
        nts = NodeTypeSet(("node",), {"node": 2})
        schema = RelationSchema(nts, ("rel0",), {"rel0": ("node", "node")})
        edges = tuple((i, i + 1, "rel0", 1.0) for i in range(9))
        g = HeteroGraph(schema, ("node",) * 10, edges,
                        labels=tuple(i % 2 for i in range(10)))
        ball = ex.bfs_ball(g, root=4, size=5)
        assert len(ball) == 5 and 4 in ball
        sub = ex.induced_subgraph(g, ball)
        assert sub.n_nodes == 5
        assert all(r == "rel0" for (_, _, r, _) in sub.edges)
        assert sub.labels == tuple(g.labels[i] for i in ball)


class TestRhrStudy:
    def test_graded_corpus_gives_positive_correlation(self):
        corpus = ex.graded_homophily_corpus(
            (0.5, 0.66, 0.82, 0.98), nodes_per_level=40, n_dims=90, seed=1)
        meta = MetaPath(("A", "A"), ("link",))
        result = ex.rhr_correlation_study(corpus, meta, n_subgraphs=8, size=40,
                                          solver=SolverConfig(), base_seed=0)
        assert len(result.pairs) >= 4
        assert result.pearson_r > 0.2
        assert result.degenerate is False

    def test_requires_labels(self):
        from hetgl.generate import GroundTruth, synthesize
        plain = synthesize(tiny_spec(trials=1).synthetic, 0)
        unlabeled = GroundTruth(plain.graph, None, plain.signals, {}, 0, None, 0)
        with pytest.raises(GraphValidationError):
            ex.rhr_correlation_study(unlabeled,
                                     MetaPath(("A", "A"), ("intra",)), 3, 10)


class TestStandardize:
    def test_centered_unit_scale(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((20, 6)) * np.array([1, 5, 0.2, 3, 1, 1]) + 4.0
        S = ex.standardize_signals(X)
        assert np.allclose(S.mean(axis=0), 0.0, atol=1e-12)
        assert np.linalg.norm(S) / np.sqrt(S.size) == pytest.approx(1.0)

    def test_constant_dimension_safe(self):
        X = np.ones((5, 3))
        S = ex.standardize_signals(X)
        assert np.allclose(S, 0.0)
