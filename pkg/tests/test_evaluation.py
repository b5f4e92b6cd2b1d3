from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advis.evaluation import (SweepResult, budget_sweep, default_palette,
                              format_results, nmi, read_results,
                              render_labels, write_results)
from advis.hsi import PointCloud
from advis.segmentation import RunConfig
from advis.synthetic import gaussian_blobs
from oracles import nmi_contingency


class TestNmi:
    def test_relabeled_partitions_score_one(self):
        assert nmi([1, 1, 2, 2], [2, 2, 1, 1]) == 1.0

    def test_identity_scores_one_exactly(self, rng):
        a = rng.integers(1, 5, size=200)
        a[0:4] = [1, 2, 3, 4]
        assert nmi(a, a) == 1.0

    def test_constant_vs_balanced_scores_zero(self):
        assert nmi([1, 1, 1, 1], [1, 1, 2, 2]) == 0.0

    def test_small_case_matches_contingency(self):
        a = np.array([1, 1, 2])
        b = np.array([1, 2, 2])
        assert nmi(a, b) == pytest.approx(nmi_contingency(a, b), abs=1e-15)

    def test_random_pairs_match_contingency(self, rng):
        for _ in range(100):
            n = int(rng.integers(5, 60))
            a = rng.integers(1, 6, size=n)
            b = rng.integers(1, 6, size=n)
            assert nmi(a, b) == pytest.approx(nmi_contingency(a, b), abs=1e-12)

    def test_symmetric(self, rng):
        a = rng.integers(1, 4, size=50)
        b = rng.integers(1, 5, size=50)
        assert nmi(a, b) == nmi(b, a)

    def test_label_ids_irrelevant(self, rng):
        a = rng.integers(1, 4, size=80)
        b = rng.integers(1, 4, size=80)
        assert nmi(a, b) == nmi(a * 10, b + 7)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            nmi([], [])
        with pytest.raises(ValueError):
            nmi([0, 1], [1, 1])
        with pytest.raises(ValueError):
            nmi([1, 2], [1, 2, 3])

    def test_alternate_normalizers(self, rng):
        a = rng.integers(1, 4, size=100)
        b = rng.integers(1, 4, size=100)
        for norm in ("arithmetic", "geometric", "max"):
            value = nmi(a, b, normalizer=norm)
            assert 0.0 <= value <= 1.0
        assert nmi(a, b, "max") <= nmi(a, b, "geometric") + 1e-12

    @given(st.integers(2, 5), st.integers(0, 9999))
    @settings(max_examples=40, deadline=None)
    def test_range_property(self, k, seed):
        rng = np.random.default_rng(seed)
        a = rng.integers(1, k + 1, size=30)
        b = rng.integers(1, k + 1, size=30)
        assert 0.0 <= nmi(a, b) <= 1.0


def small_sweep_inputs(seed=0, n=120, n_neighbors=50):
    X, gt = gaussian_blobs(n, 10, 3, seed=seed)
    cloud = PointCloud(points=X, pixel_index=np.zeros((n, 2), dtype=np.int32),
                       gt=gt)
    config = RunConfig(n_neighbors=n_neighbors, n_classes=3, sigma0=2.0,
                       time=8, purity_runs=2)
    return cloud, config


class TestBudgetSweep:
    def test_shape_and_budget_zero_degeneracy(self):
        cloud, config = small_sweep_inputs()
        results = budget_sweep(cloud, [0, 3], config, seeds=[0, 1])
        assert len(results) == 4
        for row in results:
            if row.budget == 0:
                assert row.nmi_advis == row.nmi_dvis

    def test_exact_recovery_cell(self):
        cloud, config = small_sweep_inputs(seed=2, n=600, n_neighbors=100)
        results = budget_sweep(cloud, [3], config, seeds=[2])
        assert results[0].nmi_advis == 1.0

    def test_deterministic_modulo_runtime(self):
        cloud, config = small_sweep_inputs(seed=1)
        a = budget_sweep(cloud, [0, 2, 4], config, seeds=[0, 1])
        b = budget_sweep(cloud, [0, 2, 4], config, seeds=[0, 1])
        assert format_results(a, "csv", include_runtime=False) == \
            format_results(b, "csv", include_runtime=False)

    def test_requires_ground_truth(self):
        cloud, config = small_sweep_inputs()
        bare = PointCloud(points=cloud.points, pixel_index=cloud.pixel_index)
        with pytest.raises(ValueError, match="ground-truth"):
            budget_sweep(bare, [1], config, seeds=[0])

    def test_requires_budgets(self):
        cloud, config = small_sweep_inputs()
        with pytest.raises(ValueError, match="budgets"):
            budget_sweep(cloud, [], config, seeds=[0])


class TestEmit:
    def rows(self):
        return [
            SweepResult(budget=10, nmi_advis=0.8123456789012345,
                        nmi_dvis=0.65, seed=0, runtime=1.25),
            SweepResult(budget=20, nmi_advis=1 / 3, nmi_dvis=2 / 7, seed=1,
                        runtime=0.5),
        ]

    def test_csv_roundtrip(self, tmp_path):
        path = tmp_path / "sweep.csv"
        write_results(self.rows(), path)
        assert read_results(path) == self.rows()

    def test_json_roundtrip(self, tmp_path):
        path = tmp_path / "sweep.json"
        write_results(self.rows(), path)
        assert read_results(path) == self.rows()

    def test_empty_is_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_results([], path)
        lines = path.read_text().strip().splitlines()
        assert lines == ["budget,nmi_advis,nmi_dvis,seed,runtime"]
        assert read_results(path) == []


class TestRender:
    def test_indexed_png(self, tmp_path):
        from PIL import Image

        raster = np.array([[0, 1], [2, 3]], dtype=np.int32)
        path = tmp_path / "labels.png"
        render_labels(raster, default_palette(3), path)
        image = Image.open(path)
        assert image.mode == "P"
        assert image.size == (2, 2)
        np.testing.assert_array_equal(np.asarray(image), raster)

    def test_palette_too_small(self, tmp_path):
        with pytest.raises(ValueError, match="palette"):
            render_labels(np.array([[5]]), default_palette(3),
                          tmp_path / "x.png")

    def test_palette_sizes(self):
        assert len(default_palette(6)) == 7
        assert len(set(default_palette(12))) == 13
