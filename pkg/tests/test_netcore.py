import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netcore import (
    GridSpec,
    LocalizationNet,
    active_cubes,
    center_coordinate,
    cube_indicator_oracle,
    grid_centers,
    grid_indices,
    heaviside,
    localization_eval,
    localization_eval_batch,
    square_rectifier,
)


@pytest.mark.parametrize("t, expected", [(-0.5, 0), (0.0, 1), (2.3, 1)])
def test_heaviside(t, expected):
    assert heaviside(t) == expected


@pytest.mark.parametrize("t, expected", [(-1.0, 0.0), (2.0, 4.0), (0.0, 0.0)])
def test_square_rectifier(t, expected):
    assert square_rectifier(t) == expected


@pytest.mark.parametrize("activation", [heaviside, square_rectifier])
def test_nan_rejected(activation):
    with pytest.raises(ValueError):
        activation(float("nan"))


def test_grid_centers():
    assert grid_centers(GridSpec(1, 1))[:, 0].tolist() == [-0.5, 0.5]
    assert grid_centers(GridSpec(2, 1))[:, 0].tolist() == [-0.75, -0.25, 0.25, 0.75]
    centers = grid_centers(GridSpec(1, 2))
    assert centers.shape == (4, 2)
    assert sorted(map(tuple, centers.tolist())) == [(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)]
    assert len(grid_indices(GridSpec(3, 2))) == GridSpec(3, 2).count == 36


class TestLocalizationNet:
    def test_center_and_boundary(self):
        net = LocalizationNet(1, 1, (1,))
        assert localization_eval(net, [-0.5]) == 1
        assert localization_eval(net, [0.0]) == 1
        assert localization_eval(net, [0.25]) == 0

    def test_two_dimensional_cube(self):
        net = LocalizationNet(2, 2, (1, 2))
        assert net([-0.9, -0.1]) == 1
        assert net([-0.9, 0.1]) == 0

    def test_inner_sum_levels(self):
        net = LocalizationNet(2, 2, (1, 2))
        assert net.inner_sum([-0.75, -0.25]) == 0.5
        assert net.inner_sum([0.9, 0.9]) <= -0.5

    def test_index_range_checked(self):
        with pytest.raises(ValueError):
            LocalizationNet(1, 2, (5,))
        with pytest.raises(ValueError):
            LocalizationNet(2, 2, (1,))

    @settings(max_examples=500)
    @given(st.data())
    def test_matches_direct_test(self, data):
        r = data.draw(st.integers(1, 3))
        q = data.draw(st.integers(1, 8))
        j = tuple(data.draw(st.lists(st.integers(1, 2 * q), min_size=r, max_size=r)))
        xi = data.draw(st.lists(st.floats(-1.2, 1.2, allow_nan=False), min_size=r, max_size=r))
        assert LocalizationNet(r, q, j)(xi) == cube_indicator_oracle(r, q, j, xi)

    @settings(max_examples=200)
    @given(st.data())
    def test_matches_direct_test_on_faces(self, data):
        r = data.draw(st.integers(1, 3))
        q = data.draw(st.integers(1, 8))
        j = tuple(data.draw(st.lists(st.integers(1, 2 * q), min_size=r, max_size=r)))
        xi = list(center_coordinate(np.array(j), q))
        axis = data.draw(st.integers(0, r - 1))
        xi[axis] += data.draw(st.sampled_from([-1.0, 1.0])) / (2 * q)
        net = LocalizationNet(r, q, j)
        assert net(xi) == cube_indicator_oracle(r, q, j, xi)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(0)
        q = 3
        indices = rng.integers(1, 2 * q + 1, size=(500, 2))
        points = rng.uniform(-1.1, 1.1, size=(500, 2))
        batch = localization_eval_batch(q, indices, points)
        scalar = [LocalizationNet(2, q, tuple(j))(x) for j, x in zip(indices.tolist(), points)]
        assert batch.tolist() == scalar


class TestActiveCubes:
    def test_interior_point(self):
        assert active_cubes([[0.3, -0.7]], 1) == [[(2, 1)]]

    def test_face_point_hits_both_cubes(self):
        assert active_cubes([[0.0]], 1) == [[(1,), (2,)]]

    def test_corner_point(self):
        assert len(active_cubes([[0.0, 0.0]], 2)[0]) == 4

    def test_outside_box(self):
        assert active_cubes([[1.5, 0.0]], 2) == [[]]

    @settings(max_examples=100)
    @given(st.lists(st.floats(-0.99, 0.99, allow_nan=False), min_size=2, max_size=2), st.integers(1, 6))
    def test_every_point_of_the_box_has_a_cube(self, x, q):
        hits = active_cubes([x], q)[0]
        assert 1 <= len(hits) <= 4
        assert all(cube_indicator_oracle(2, q, j, x) == 1 for j in hits)
