import numpy as np
import pytest

from charts import Atlas, Chart, build_atlas
from estimator import (
    CellIndex,
    DeepNetEstimator,
    EstimatorBuildError,
    build_estimator,
    cell_indicators,
    choose_n,
    lambda_sets,
    predict_feedback,
    predict_interior,
    predict_literal,
    smoother_matrix,
)
from geometry import Circle, Noise, SampleSet, Segment, Sphere, draw_sample_set, make_target, sample_inputs
from netcore import UnassignedCubeError, composite_cell_eval

SEG = Segment([-0.8, 0.3], [1.0, 0.0], 1.6)


def on_segment(*xs):
    return np.array([[x, 0.3] for x in xs])


def segment_atlas(points, center=0.0, delta=0.8):
    """One chart over the horizontal segment with q* = 1; the chart coordinate is (x - center) / delta."""
    chart = Chart(np.array([center, 0.3]), delta, manifold=SEG).with_constants(1 / delta, 1 / delta)
    return Atlas((chart,), 1.0, 1, {}, SEG, "fixed").ensure_assigned(points)


def segment_estimator(xs, ys, n, queries=(), **kwargs):
    points = on_segment(*xs)
    atlas = segment_atlas(np.vstack([points, on_segment(*queries)]) if queries else points)
    return build_estimator(atlas, SampleSet(points, ys, bound=5.0), n, **kwargs)


@pytest.fixture(scope="module")
def circle_setup():
    circle = Circle(0.9)
    sample = draw_sample_set(circle, make_target("sine"), Noise("uniform", 0.2), 500, seed=1)
    atlas = build_atlas(circle, seed=0).ensure_assigned(sample.points)
    queries = np.array(sample_inputs(circle, 200, seed=2))
    est = build_estimator(atlas, sample, choose_n(500, 1.0, 1)).extended(queries)
    return est, sample, queries


class TestChooseN:
    @pytest.mark.parametrize("m, s, d, expected", [(1000, 1.0, 1, 10), (1, 1.0, 1, 1), (16384, 1.0, 1, 26)])
    def test_values(self, m, s, d, expected):
        assert choose_n(m, s, d) == expected

    @pytest.mark.parametrize("m, scale, expected", [(64, 0.5, 2), (1000, 0.5, 5), (16384, 0.5, 13), (1000, 2.0, 20)])
    def test_scaled_values(self, m, scale, expected):
        assert choose_n(m, 1.0, 1, scale) == expected

    def test_invalid(self):
        with pytest.raises(ValueError):
            choose_n(10, 1.0, 1, 0.0)
        with pytest.raises(ValueError):
            choose_n(0, 1.0, 1)
        with pytest.raises(ValueError):
            choose_n(10, 1.5, 1)


class TestHandExamples:
    def test_single_cell_per_sample(self):
        est = segment_estimator([-0.4, 0.4], [1.0, 3.0], 1)
        x = on_segment(-0.4)[0]
        assert predict_literal(est, x) == 0.5
        assert predict_interior(est, x) == 1.0
        assert predict_feedback(est, x) == 1.0

    def test_cell_mean(self):
        est = segment_estimator([-0.4, -0.2], [1.0, 3.0], 1, queries=[-0.3])
        assert predict_interior(est, on_segment(-0.3)[0]) == 2.0

    def test_empty_cell_predicts_zero(self):
        est = segment_estimator([-0.4, -0.2], [1.0, 3.0], 1, queries=[0.4])
        x = on_segment(0.4)[0]
        preds = est.predict_modes([x], ["literal", "interior", "feedback"])
        assert {mode: values.tolist() for mode, values in preds.items()} == {
            "literal": [0.0],
            "interior": [0.0],
            "feedback": [0.0],
        }

    def test_empty_sample_set(self):
        atlas = segment_atlas(on_segment(-0.4))
        est = build_estimator(atlas, SampleSet(np.zeros((0, 2)), np.zeros(0), bound=1.0), 1)
        assert est.m == 0
        for mode in ("literal", "interior", "feedback"):
            assert est.predict(on_segment(-0.4)[0], mode) == 0.0

    def test_chart_face_sample_shrinks_literal(self):
        # chart coordinate -0.5 sits on the face between cells k=1 and k=2 at n=2
        est = segment_estimator([-0.4, -0.6, -0.2], [1.0, 3.0, 5.0], 2, queries=[-0.7])
        assert est.table.memberships[0] == [CellIndex((1, 2), (1,)), CellIndex((1, 2), (2,))]
        x = on_segment(-0.7)[0]
        assert predict_interior(est, x) == 2.0
        assert predict_feedback(est, x) == 2.0
        assert predict_literal(est, x) == 1.0

        sets = lambda_sets(est, x)
        assert (sets.size_x, sets.size_xs, sets.size_xs_prime) == (1, 3, 2)
        assert sets.summary()["lambda_xs_cells"] == 2

    def test_ambient_face_sample_has_two_memberships(self):
        points = on_segment(0.0, -0.4)
        atlas = segment_atlas(points, center=0.1, delta=0.9)
        est = build_estimator(atlas, SampleSet(points, [2.0, 4.0], bound=5.0), 1)
        assert est.table.memberships[0] == [CellIndex((1, 2), (1,)), CellIndex((2, 2), (1,))]
        assert est.table.total_count == 3
        assert predict_interior(est, points[0]) == pytest.approx(8.0 / 3.0)


class TestCompositeCell:
    def test_fires_at_cell_center(self):
        atlas = segment_atlas(on_segment(-0.4, 0.4))
        assert composite_cell_eval(atlas, (1, 2), (1,), 1, on_segment(-0.4)[0]) == 1

    def test_gate_excludes_other_cube(self):
        atlas = segment_atlas(on_segment(-0.4, 0.4))
        x = on_segment(0.4)[0]
        assert composite_cell_eval(atlas, (1, 2), (2,), 1, x) == 1
        assert composite_cell_eval(atlas, (1, 2), (2,), 1, x, gated=True) == 0

    def test_unassigned_cube(self):
        atlas = segment_atlas(on_segment(-0.4))
        with pytest.raises(UnassignedCubeError):
            composite_cell_eval(atlas, (1, 1), (1,), 1, on_segment(-0.4)[0])

    @pytest.mark.parametrize("manifold", [Circle(0.9), Sphere(0.9)], ids=["circle", "sphere"])
    def test_cells_sharing_a_cube_are_disjoint(self, manifold):
        points = np.array(sample_inputs(manifold, 5000, seed=12))
        atlas = build_atlas(manifold, seed=0).ensure_assigned(points)
        for n in (1, 3, 8):
            for cells in cell_indicators(atlas, n, points):
                cubes = [cell.j for cell in cells]
                assert cells
                assert len(cubes) == len(set(cubes))


class TestBuild:
    def test_sample_outside_box(self):
        atlas = segment_atlas(on_segment(-0.4))
        with pytest.raises(EstimatorBuildError):
            build_estimator(atlas, SampleSet([[1.5, 0.3]], [0.0], bound=1.0), 1)

    def test_sample_in_unassigned_cube(self):
        atlas = segment_atlas(on_segment(-0.4))
        with pytest.raises(EstimatorBuildError):
            build_estimator(atlas, SampleSet(on_segment(0.4), [0.0], bound=1.0), 1)

    def test_invalid_mode(self):
        with pytest.raises(ValueError):
            segment_estimator([-0.4], [1.0], 1, mode="median")

    def test_accounting_identity(self, circle_setup):
        est, sample, _ = circle_setup
        assert est.table.total_count == sum(len(cells) for cells in est.table.memberships)
        total_y = sum(len(cells) * y for cells, y in zip(est.table.memberships, sample.values))
        assert sum(est.table.sums.values()) == pytest.approx(total_y)

    def test_canonical_accumulation_ignores_sample_order(self, circle_setup):
        est, sample, queries = circle_setup
        perm = np.random.default_rng(3).permutation(len(sample))
        shuffled = SampleSet(sample.points[perm], sample.values[perm], sample.bound)
        a = build_estimator(est.atlas, sample, est.n, accumulation="canonical")
        b = build_estimator(est.atlas, shuffled, est.n, accumulation="canonical")
        for mode in ("literal", "interior", "feedback"):
            assert np.array_equal(a.predict_batch(queries, mode), b.predict_batch(queries, mode))


class TestPrediction:
    def test_bounded_by_m(self, circle_setup):
        est, sample, queries = circle_setup
        for values in est.predict_modes(queries, ["literal", "interior", "feedback"]).values():
            assert np.all(np.abs(values) <= sample.bound)

    def test_gated_feedback_equals_interior(self, circle_setup):
        est, _, queries = circle_setup
        preds = est.predict_modes(queries, ["interior", "feedback"])
        assert preds["feedback"] == pytest.approx(preds["interior"], rel=1e-12, abs=1e-12)

    def test_lambda_size_limit(self, circle_setup):
        est, _, queries = circle_setup
        for sets in est.lambda_sets_batch(queries):
            assert 1 <= sets.size_x <= 2 ** (2 + 1)
            assert sets.size_xs_prime <= sets.size_xs

    def test_ungated_cells_contain_gated_cells(self, circle_setup):
        est, _, queries = circle_setup
        for gated, ungated in zip(est.firing_cells(queries, gated=True), est.firing_cells(queries, gated=False)):
            assert set(gated) <= set(ungated)

    @pytest.mark.parametrize("mode", ["interior", "feedback", "literal"])
    def test_smoother_matrix(self, circle_setup, mode):
        est, sample, queries = circle_setup
        weights = smoother_matrix(est, queries, mode)
        assert weights.shape == (len(queries), len(sample))
        assert np.all(weights >= 0)
        if mode != "literal":
            sums = weights.sum(axis=1)
            assert np.all(np.isclose(sums, 1.0) | (sums == 0.0))
        assert weights @ sample.values == pytest.approx(est.predict_batch(queries, mode), abs=1e-12)

    def test_ungated_literal_runs(self, circle_setup):
        est, sample, queries = circle_setup
        ungated = build_estimator(est.atlas, sample, est.n, gated=False)
        values = ungated.predict_batch(queries[:20], "literal")
        assert np.all(np.abs(values) <= sample.bound)

    def test_serialization_round_trip(self, circle_setup):
        est, _, queries = circle_setup
        restored = DeepNetEstimator.from_dict(est.to_dict("atlas-id"), est.atlas)
        assert restored.n == est.n
        for mode in ("literal", "interior", "feedback"):
            assert np.array_equal(restored.predict_batch(queries, mode), est.predict_batch(queries, mode))
