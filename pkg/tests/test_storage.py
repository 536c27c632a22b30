import numpy as np
import pytest

from geometry import Circle, Noise, draw_sample_set, make_target
from harness import ArtifactStore, fit_estimator, load_config, predict_queries


@pytest.fixture
def store(tmp_path):
    return ArtifactStore(tmp_path / "store")


@pytest.fixture(scope="module")
def sample():
    return draw_sample_set(Circle(0.9), make_target("sine"), Noise("uniform", 0.2), 100, seed=2)


def test_directories_created(store):
    for kind in ("datasets", "atlases", "estimators", "predictions", "results"):
        assert (store.root / kind).is_dir()


def test_dataset_round_trip(store, sample):
    dataset_id = store.save_dataset(sample)
    assert store.save_dataset(sample) == dataset_id
    loaded = store.load_dataset(dataset_id)
    assert np.array_equal(loaded.points, sample.points)
    assert np.array_equal(loaded.values, sample.values)
    assert loaded.bound == sample.bound
    assert loaded.manifold["kind"] == "circle"


def test_estimator_round_trip(store, sample):
    est = fit_estimator(load_config(), sample)
    estimator_id, atlas_id = store.save_estimator(est)
    assert [a["id"] for a in store.list_artifacts("atlases")] == [atlas_id]
    restored = store.load_estimator(estimator_id)
    queries = sample.points[:20]
    assert np.array_equal(restored.predict_batch(queries), est.predict_batch(queries))
    assert restored.atlas.q_star == est.atlas.q_star


def test_predictions_and_results(store, sample):
    est = fit_estimator(load_config(), sample)
    rows = predict_queries(est, sample.points[:3], "feedback")
    predictions_id = store.save_predictions(rows)
    assert store.list_artifacts("predictions")[0]["id"] == predictions_id
    store.save_result("rates-abc", {"slope": -0.6})
    assert store.load_result("rates-abc") == {"slope": -0.6}


def test_missing_artifact(store):
    with pytest.raises(FileNotFoundError):
        store.load_estimator("nope")


def test_unknown_kind(store):
    with pytest.raises(ValueError):
        store._path("models", "x")
