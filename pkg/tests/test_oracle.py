import time

import numpy as np
import pytest

from charts import Chart, build_atlas
from estimator import build_estimator, choose_n
from geometry import Circle, Noise, SampleSet, Sphere, draw_sample_set, make_target, sample_inputs
from oracle import (
    cardinality_check,
    cell_membership,
    cell_membership_batch,
    indicator_crosscheck,
    lemma1_check,
    lemma1_exact,
    lemma2_check,
    partition_local_average,
    proposition1_check,
)


@pytest.fixture(scope="module")
def circle_atlas():
    return build_atlas(Circle(0.9), seed=0)


class TestReferences:
    def test_membership_matches_estimator_cells(self, circle_atlas):
        points = np.array(sample_inputs(Circle(0.9), 50, seed=5))
        atlas = circle_atlas.ensure_assigned(points)
        sample = SampleSet(points, np.zeros(50), bound=1.0)
        est = build_estimator(atlas, sample, 4)
        for x, cells in zip(points, est.table.memberships):
            assert cell_membership(atlas, 4, x) == cells

    def test_point_outside_box_has_no_cells(self, circle_atlas):
        assert cell_membership(circle_atlas, 3, [1.5, 0.0]) == []

    def test_membership_evaluates_each_chart_once(self, circle_atlas, monkeypatch):
        points = np.array(sample_inputs(Circle(0.9), 2000, seed=6))
        atlas = circle_atlas.ensure_assigned(points)
        calls = []
        original = Chart.evaluate

        def counting(self, pts):
            calls.append(len(pts))
            return original(self, pts)

        monkeypatch.setattr(Chart, "evaluate", counting)
        cells = cell_membership_batch(atlas, 5, points)
        assert len(calls) <= atlas.size
        assert sum(calls) >= len(points)
        assert all(cells)

    def test_single_sample_average(self, circle_atlas):
        x = Circle(0.9).embed([0.5])
        atlas = circle_atlas.ensure_assigned([x])
        assert partition_local_average(atlas, 2, SampleSet([x], [0.7], bound=1.0), x) == 0.7

    def test_empty_sample_set(self, circle_atlas):
        x = Circle(0.9).embed([0.5])
        empty = SampleSet(np.zeros((0, 2)), np.zeros(0), bound=1.0)
        assert partition_local_average(circle_atlas, 2, empty, x) == 0.0

    def test_interior_mode_equals_partition_average(self, circle_atlas):
        circle, target = Circle(0.9), make_target("sine")
        rng = np.random.default_rng(0)
        for case in range(200):
            m = int(rng.integers(1, 1001))
            n = int(rng.integers(1, 7))
            sample = draw_sample_set(circle, target, Noise("uniform", 0.2), m, seed=case)
            x = np.array(sample_inputs(circle, 1, seed=1000 + case))
            atlas = circle_atlas.ensure_assigned(np.vstack([sample.points, x]))
            est = build_estimator(atlas, sample, n)
            assert est.predict(x[0], "interior") == partition_local_average(atlas, n, sample, x[0])


class TestLemma1:
    def test_exact_values(self):
        assert lemma1_exact(1, 1.0) == pytest.approx(1.0)
        assert lemma1_exact(1, 0.5) == pytest.approx(0.5)

    def test_grid_cell_probability(self):
        report = lemma1_check(200, 1 / 12, 100_000, seed=0)
        assert report.passed
        assert report.estimate <= report.bound
        assert abs(report.estimate - report.details["exact"]) <= 4 * report.std_error

    @pytest.mark.parametrize("m, p", [(1, 1.0), (10, 0.3), (1000, 0.001)])
    def test_bound_holds(self, m, p):
        report = lemma1_check(m, p, 10_000, seed=1)
        assert report.details["exact"] <= report.bound
        assert report.passed

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            lemma1_check(10, 0.0, 10_000, seed=0)
        with pytest.raises(ValueError):
            lemma1_check(10, 0.5, 100, seed=0)


class TestLemma2:
    @staticmethod
    def builder(atlas):
        def build(design):
            return build_estimator(atlas.ensure_assigned(design.points), design, choose_n(len(design), 1.0, 1))

        return build

    def test_noiseless_has_no_variance(self, circle_atlas):
        report = lemma2_check(
            self.builder(circle_atlas), Circle(0.9), make_target("sine"), Noise("none"), 50, 100, seed=0
        )
        assert report.details["variance"] < 1e-20
        assert report.passed
        assert report.details["decomposition_passed"]
        assert report.details["lhs"] == pytest.approx(report.details["bias2"])

    def test_cross_term_vanishes(self, circle_atlas):
        report = lemma2_check(
            self.builder(circle_atlas), Circle(0.9), make_target("sine"), Noise("uniform", 0.2), 50, 20_000, seed=3
        )
        assert report.kind == "identity"
        assert report.details["variance"] > 0
        assert abs(report.estimate) <= 3 * report.std_error
        assert report.passed
        assert abs(report.details["residual"]) <= 3 * report.details["residual_std_error"] + 1e-12
        assert report.details["decomposition_passed"]


class TestStructuralChecks:
    def test_localization_networks(self):
        report = proposition1_check(20_000, seed=0)
        assert report.passed
        assert report.estimate == 0.0

    @pytest.mark.parametrize("manifold", [Circle(0.9), Sphere(0.9)], ids=["circle", "sphere"])
    def test_indicators_and_cardinality(self, manifold):
        atlas = build_atlas(manifold, seed=0)
        points = np.array(sample_inputs(manifold, 500, seed=8))
        atlas = atlas.ensure_assigned(points)
        assert indicator_crosscheck(atlas, 3, points).passed
        report = cardinality_check(atlas, 3, points)
        assert report.passed
        assert report.bound == 2 ** (manifold.ambient_dim + manifold.intrinsic_dim)


@pytest.mark.slow
def test_crosscheck_at_full_size_is_fast():
    start = time.perf_counter()
    for manifold in (Circle(0.9), Sphere(0.9)):
        points = np.array(sample_inputs(manifold, 100_000, seed=11))
        atlas = build_atlas(manifold, seed=0).ensure_assigned(points)
        n = choose_n(1024, 1.0, manifold.intrinsic_dim)
        assert indicator_crosscheck(atlas, n, points).passed
    assert time.perf_counter() - start < 30.0
