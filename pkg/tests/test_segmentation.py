from __future__ import annotations

import json

import numpy as np
import pytest

from advis.evaluation import nmi
from advis.hsi import PointCloud
from advis.modes import rank_modes
from advis.segmentation import (BudgetExceededError, GroundTruthOracle,
                                Pipeline, Provenance, RunConfig, Segmentation,
                                advis_label_modes, dvis_label_modes,
                                export_segmentation, propagate, run_advis,
                                run_dvis)
from advis.synthetic import gaussian_blobs
from conftest import random_connected_operator
from oracles import propagate_bruteforce


def blob_cloud(seed, n=600, dim=10, k=3):
    X, gt = gaussian_blobs(n, dim, k, seed=seed)
    return PointCloud(points=X, pixel_index=np.zeros((n, 2), dtype=np.int32),
                      gt=gt)


def blob_config(seed, budget=3, **overrides):
    base = dict(n_neighbors=100, n_classes=3, sigma0=2.0, time=8,
                budget=budget, purity_runs=2, seed=seed)
    base.update(overrides)
    return RunConfig(**base)


class TestOracle:
    def test_memoized_and_logged(self):
        oracle = GroundTruthOracle(np.array([1, 2, 3]), budget=2)
        assert oracle.query(1) == 2
        assert oracle.query(1) == 2  # repeat is free
        assert oracle.n_queries == 1
        assert oracle.query(2) == 3
        assert oracle.log == [(1, 2), (2, 3)]

    def test_budget_enforced(self):
        oracle = GroundTruthOracle(np.array([1, 2, 3]), budget=1)
        oracle.query(0)
        with pytest.raises(BudgetExceededError):
            oracle.query(1)

    def test_rejects_unlabeled_gt(self):
        with pytest.raises(ValueError):
            GroundTruthOracle(np.array([0, 1]))


class TestModeLabeling:
    def ranking(self, n=10):
        zeta = np.linspace(1.0, 0.1, n)
        dt = np.ones(n)
        return rank_modes(zeta, dt), zeta

    def test_dvis_top_k(self):
        ranking, _ = self.ranking()
        seg = dvis_label_modes(ranking, 3)
        np.testing.assert_array_equal(seg.labels[ranking.ordering[:3]], [1, 2, 3])
        assert (seg.labels[ranking.ordering[3:]] == 0).all()
        assert (seg.provenance[ranking.ordering[:3]] == Provenance.MODE).all()

    def test_dvis_k_equals_n(self):
        ranking, _ = self.ranking(5)
        seg = dvis_label_modes(ranking, 5)
        assert seg.complete

    def test_dvis_k1(self):
        ranking, _ = self.ranking()
        seg = dvis_label_modes(ranking, 1)
        assert (seg.labels > 0).sum() == 1
        assert seg.labels[ranking.ordering[0]] == 1

    def test_advis_zero_budget_equals_dvis(self):
        ranking, _ = self.ranking()
        oracle = GroundTruthOracle(np.arange(10) % 3 + 1)
        a = advis_label_modes(ranking, 3, 0, oracle)
        d = dvis_label_modes(ranking, 3)
        np.testing.assert_array_equal(a.labels, d.labels)
        assert oracle.n_queries == 0
        assert (a.provenance[a.labels > 0] == Provenance.FALLBACK).all()

    def test_advis_queries_top_ranked_in_order(self):
        ranking, _ = self.ranking()
        gt = np.arange(10) % 3 + 1
        oracle = GroundTruthOracle(gt)
        seg = advis_label_modes(ranking, 3, 4, oracle)
        assert [p for p, _ in oracle.log] == ranking.ordering[:4].tolist()
        queried = ranking.ordering[:4]
        np.testing.assert_array_equal(seg.labels[queried], gt[queried])
        assert (seg.provenance[queried] == Provenance.QUERIED).all()

    def test_advis_fallback_covers_missing_classes(self):
        ranking, _ = self.ranking()
        gt = np.ones(10, dtype=int)  # oracle always answers class 1
        seg = advis_label_modes(ranking, 3, 2, GroundTruthOracle(gt))
        fallback = ranking.ordering[2:4]
        np.testing.assert_array_equal(sorted(seg.labels[fallback]), [2, 3])
        assert (seg.provenance[fallback] == Provenance.FALLBACK).all()
        counts = seg.provenance_counts()
        assert counts["queried"] == 2 and counts["fallback"] == 2

    def test_advis_no_fallback_when_covered(self):
        ranking, _ = self.ranking()
        gt = np.array([1, 2, 3] * 4)[:10]
        seg = advis_label_modes(ranking, 3, 5, GroundTruthOracle(gt))
        assert seg.provenance_counts()["fallback"] == 0

    def test_advis_rejects_out_of_range_answer(self):
        ranking, _ = self.ranking()
        gt = np.full(10, 7)
        with pytest.raises(ValueError, match="outside"):
            advis_label_modes(ranking, 3, 1, GroundTruthOracle(gt))

    def test_budget_plus_fallback_overflow(self):
        ranking, _ = self.ranking(3)
        gt = np.ones(3, dtype=int)
        with pytest.raises(ValueError, match="exceed"):
            advis_label_modes(ranking, 3, 2, GroundTruthOracle(gt))


class TestPropagate:
    def test_single_seed_floods(self, rng):
        X, graph, op = random_connected_operator(rng, 20)
        zeta = rng.random(20)
        labels = np.zeros(20, dtype=np.int32)
        top = int(np.lexsort((np.arange(20), -zeta))[0])
        labels[top] = 1
        partial = Segmentation(labels=labels,
                               provenance=(labels > 0).astype(np.int8),
                               n_classes=1)
        seg = propagate(partial, zeta, op, 2)
        assert (seg.labels == 1).all()

    def test_all_labeled_noop(self, rng):
        X, graph, op = random_connected_operator(rng, 12)
        labels = rng.integers(1, 3, size=12).astype(np.int32)
        partial = Segmentation(labels=labels.copy(),
                               provenance=np.ones(12, dtype=np.int8),
                               n_classes=2)
        seg = propagate(partial, rng.random(12), op, 2)
        np.testing.assert_array_equal(seg.labels, labels)

    @pytest.mark.parametrize("n,t", [(25, 2), (60, 4), (100, 8)])
    def test_matches_bruteforce(self, rng, n, t):
        X, graph, op = random_connected_operator(rng, n)
        zeta = rng.random(n)
        labels = np.zeros(n, dtype=np.int32)
        # label the zeta-maximizer and one random other pixel
        order = np.lexsort((np.arange(n), -zeta))
        labels[order[0]] = 1
        labels[order[n // 2]] = 2
        partial = Segmentation(labels=labels,
                               provenance=(labels > 0).astype(np.int8),
                               n_classes=2)
        seg = propagate(partial, zeta, op, t)
        expected = propagate_bruteforce(labels, zeta, op, t)
        np.testing.assert_array_equal(seg.labels, expected)

    def test_matches_bruteforce_with_zeta_ties(self, rng):
        X, graph, op = random_connected_operator(rng, 40)
        zeta = rng.integers(0, 4, size=40).astype(float)
        labels = np.zeros(40, dtype=np.int32)
        order = np.lexsort((np.arange(40), -zeta))
        labels[order[0]] = 1
        labels[order[20]] = 2
        partial = Segmentation(labels=labels,
                               provenance=(labels > 0).astype(np.int8),
                               n_classes=2)
        seg = propagate(partial, zeta, op, 3)
        expected = propagate_bruteforce(labels, zeta, op, 3)
        np.testing.assert_array_equal(seg.labels, expected)

    def test_unreachable_maximizer_aborts(self, rng):
        X, graph, op = random_connected_operator(rng, 10)
        zeta = np.arange(10, dtype=float)
        labels = np.zeros(10, dtype=np.int32)
        labels[int(np.argmin(zeta))] = 1  # only a low-zeta pixel labeled
        partial = Segmentation(labels=labels,
                               provenance=(labels > 0).astype(np.int8),
                               n_classes=1)
        with pytest.raises(RuntimeError, match="zeta"):
            propagate(partial, zeta, op, 2)

    def test_precomputed_distances_identical(self, rng):
        from advis.graph import pairwise_diffusion_distances

        X, graph, op = random_connected_operator(rng, 30)
        zeta = rng.random(30)
        labels = np.zeros(30, dtype=np.int32)
        order = np.lexsort((np.arange(30), -zeta))
        labels[order[0]] = 1
        labels[order[10]] = 2
        partial = Segmentation(labels=labels,
                               provenance=(labels > 0).astype(np.int8),
                               n_classes=2)
        direct = propagate(partial, zeta, op, 2)
        cached = propagate(partial, zeta, op, 2,
                           dists=pairwise_diffusion_distances(op, 2))
        np.testing.assert_array_equal(direct.labels, cached.labels)
        np.testing.assert_array_equal(direct.parents, cached.parents)

    def test_monotone_trust_chain(self, rng):
        X, graph, op = random_connected_operator(rng, 50)
        zeta = rng.random(50)
        labels = np.zeros(50, dtype=np.int32)
        order = np.lexsort((np.arange(50), -zeta))
        labels[order[0]] = 1
        labels[order[25]] = 2
        partial = Segmentation(labels=labels,
                               provenance=(labels > 0).astype(np.int8),
                               n_classes=2)
        seg = propagate(partial, zeta, op, 2)
        for x in range(50):
            if seg.provenance[x] != Provenance.PROPAGATED:
                continue
            # walk parent links to a seed; zeta must never decrease
            current = x
            for _ in range(51):
                parent = seg.parents[current]
                assert parent >= 0
                assert zeta[parent] >= zeta[current]
                current = parent
                if seg.provenance[current] != Provenance.PROPAGATED:
                    break
            else:
                pytest.fail("propagation chain did not reach a seed")


class TestFullRuns:
    def test_exact_recovery_three_blobs(self):
        for seed in range(3):
            cloud = blob_cloud(seed)
            seg = run_advis(cloud, blob_config(seed),
                            GroundTruthOracle(cloud.gt, budget=3))
            assert nmi(seg.labels, cloud.gt) == 1.0

    def test_advis_zero_budget_matches_dvis(self):
        for seed in range(2):
            cloud = blob_cloud(seed)
            dvis = run_dvis(cloud, blob_config(seed, budget=0))
            advis = run_advis(cloud, blob_config(seed, budget=0),
                              GroundTruthOracle(cloud.gt))
            np.testing.assert_array_equal(dvis.labels, advis.labels)

    def test_full_budget_returns_ground_truth(self):
        cloud = blob_cloud(1, n=120)
        config = blob_config(1, budget=120, n_neighbors=50)
        seg = run_advis(cloud, config, GroundTruthOracle(cloud.gt))
        np.testing.assert_array_equal(seg.labels, cloud.gt)
        assert seg.provenance_counts()["propagated"] == 0

    def test_budget_accounting(self):
        cloud = blob_cloud(2)
        oracle = GroundTruthOracle(cloud.gt, budget=7)
        pipe = Pipeline(cloud, blob_config(2, budget=7))
        seg = pipe.run_advis(oracle)
        assert oracle.n_queries == 7
        z, ranking = pipe.seed_state(2)
        assert [p for p, _ in oracle.log] == ranking.ordering[:7].tolist()
        counts = seg.provenance_counts()
        assert counts["queried"] == 7
        assert counts["queried"] + counts["fallback"] + counts["propagated"] == 600

    def test_deterministic_given_seed(self):
        cloud = blob_cloud(3)
        a = run_dvis(cloud, blob_config(3))
        b = run_dvis(cloud, blob_config(3))
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_pipeline_reuse_matches_fresh_runs(self):
        cloud = blob_cloud(4)
        pipe = Pipeline(cloud, blob_config(4))
        cached = [pipe.run_advis(GroundTruthOracle(cloud.gt), budget=b)
                  for b in (0, 3, 5)]
        for b, seg in zip((0, 3, 5), cached):
            fresh = run_advis(cloud, blob_config(4, budget=b),
                              GroundTruthOracle(cloud.gt))
            np.testing.assert_array_equal(seg.labels, fresh.labels)

    def test_material_count_override_skips_estimation(self, monkeypatch):
        import advis.unmixing

        cloud = blob_cloud(0, n=120)

        def fail(*args, **kwargs):
            raise AssertionError("estimator should not run when overridden")

        monkeypatch.setattr(advis.unmixing, "hysime", fail)
        pipe = Pipeline(cloud, blob_config(0, n_neighbors=50,
                                           num_materials=4))
        assert pipe.num_materials == 4

    def test_top_k_modes_hit_distinct_blobs(self):
        for seed in range(4):
            cloud = blob_cloud(seed)
            pipe = Pipeline(cloud, blob_config(seed))
            _, ranking = pipe.seed_state(seed)
            top = ranking.ordering[:3]
            assert len(set(cloud.gt[top].tolist())) == 3


class TestExport:
    def test_raster_and_manifest(self, tmp_path):
        cloud = blob_cloud(0, n=60)
        config = blob_config(0, n_neighbors=20, budget=2)
        oracle = GroundTruthOracle(cloud.gt, budget=2)
        seg = run_advis(cloud, config, oracle)
        cloud2 = PointCloud(points=cloud.points,
                            pixel_index=np.stack([np.arange(60) // 10,
                                                  np.arange(60) % 10],
                                                 axis=1).astype(np.int32),
                            gt=cloud.gt)
        export_segmentation(tmp_path / "run", seg, cloud2, (6, 10),
                            config=config, query_log=oracle.log)
        from advis.hsi import load_labels

        raster = load_labels(tmp_path / "run.raw")
        assert raster.labels.shape == (6, 10)
        assert (raster.labels > 0).all()
        manifest = json.loads((tmp_path / "run.json").read_text())
        assert manifest["config"]["budget"] == 2
        assert manifest["provenance_counts"]["queried"] == 2
        assert len(manifest["query_log"]) == 2
