import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

from harness import (
    ExperimentError,
    RatePoint,
    RateResult,
    emit_results,
    fit_estimator,
    fit_slope,
    generate_dataset,
    load_config,
    load_dataset,
    predict_queries,
    read_queries,
    run_dimension_comparison,
    run_feedback_comparison,
    run_rate_sweep,
    run_rate_sweeps,
    run_verification,
    theoretical_slope,
    trial_seed,
    write_predictions,
)

SMALL = {"m_values": [64, 128], "trials": 2, "test_points": 128}


def small_config(**overrides):
    return load_config(**{**SMALL, **overrides})


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("LOCALNET_SEED", "LOCALNET_M_VALUES", "LOCALNET_TRIALS", "LOCALNET_MODES"):
        monkeypatch.delenv(name, raising=False)


class TestConfig:
    def test_defaults(self):
        config = load_config()
        assert config.m_values == [2 ** k for k in range(8, 15)]
        assert config.trials == 20
        assert config.modes == ["feedback"]

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"manifold": {"kind": "sphere"}, "trials": 5}))
        config = load_config(path, trials=3)
        assert config.manifold.kind == "sphere"
        assert config.trials == 3

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("LOCALNET_SEED", "7")
        monkeypatch.setenv("LOCALNET_M_VALUES", "[256,512]")
        config = load_config()
        assert config.seed == 7
        assert config.m_values == [256, 512]

    @pytest.mark.parametrize(
        "bad",
        [
            {"m_values": [512, 256]},
            {"m_values": []},
            {"trials": 0},
            {"modes": ["median"]},
            {"target": {"s": 1.5}},
            {"distribution": {"kind": "boundary-atom", "p_atom": 1.5}},
            {"manifold": {"kind": "product-embedding"}},
        ],
    )
    def test_invalid(self, bad):
        with pytest.raises(ValidationError):
            load_config(**bad)

    def test_fingerprint(self):
        assert small_config().fingerprint() == small_config().fingerprint()
        assert small_config().fingerprint() != small_config(seed=1).fingerprint()

    def test_ambient_dim_wraps_product_embedding(self):
        manifold = load_config(manifold={"kind": "circle", "ambient_dim": 5}).manifold.build()
        assert (manifold.intrinsic_dim, manifold.ambient_dim) == (1, 5)


class TestHelpers:
    def test_trial_seed(self):
        assert trial_seed(0, 64, 1) == trial_seed(0, 64, 1)
        assert trial_seed(0, 64, 1) != trial_seed(0, 64, 2)
        assert trial_seed(0, 64, 1) != trial_seed(0, 64, 1, "test")
        assert 0 <= trial_seed(5, 1024, 19) < 2 ** 64

    def test_theoretical_slope(self):
        assert theoretical_slope(1.0, 1) == pytest.approx(-2 / 3)
        assert theoretical_slope(0.5, 2) == pytest.approx(-1 / 3)

    def test_fit_slope_exact_line(self):
        m = [2 ** k for k in range(6, 11)]
        mse = [3.0 * x ** -0.5 for x in m]
        slope, intercept = fit_slope(m, mse)
        assert slope == pytest.approx(-0.5)
        assert intercept == pytest.approx(math.log2(3.0))

    def test_fit_slope_zero_mse(self):
        slope, intercept = fit_slope([64, 128], [0.1, 0.0])
        assert math.isnan(slope) and math.isnan(intercept)

    def test_monotone_fraction(self):
        points = [RatePoint(m, 1, mse, 0.0) for m, mse in zip([64, 128, 256, 512, 1024, 2048], [5, 4, 4.5, 3, 2, 1])]
        result = RateResult("feedback", points, -1.0, 0.0, -2 / 3)
        assert result.monotone_fraction == pytest.approx(0.8)
        assert result.to_dict()["mse_monotone_fraction"] == pytest.approx(0.8)
        assert RateResult("feedback", points[:1], math.nan, math.nan, -2 / 3).monotone_fraction == 1.0


class TestSweeps:
    def test_zero_error_leaves_slope_undefined(self, tmp_path):
        config = small_config(
            target={"kind": "constant", "params": {"value": 0.0}}, noise={"kind": "none"}, bound=1.0
        )
        result = run_rate_sweep(config)
        assert result.mse == [0.0, 0.0]
        assert not result.slope_defined
        path = emit_results(result, tmp_path / "r.json")
        assert json.loads(path.read_text())["slope"] is None

    def test_reproducible_bytes(self, tmp_path):
        config = small_config(modes=["literal", "feedback"])
        a = emit_results(run_rate_sweeps(config), tmp_path / "a.json")
        b = emit_results(run_rate_sweeps(config), tmp_path / "b.json")
        assert a.read_bytes() == b.read_bytes()

    def test_more_trials_keep_earlier_ones(self):
        short = run_rate_sweep(small_config(trials=2))
        long = run_rate_sweep(small_config(trials=4))
        for a, b in zip(short.points, long.points):
            assert b.trial_mse[:2] == a.trial_mse

    def test_points_and_slopes(self):
        results = run_rate_sweeps(small_config(modes=["literal", "interior", "feedback"]))
        assert set(results) == {"literal", "interior", "feedback"}
        feedback = results["feedback"]
        assert [p.m for p in feedback.points] == [64, 128]
        assert [p.n_used for p in feedback.points] == [2, 3]
        assert feedback.theoretical_slope == pytest.approx(-2 / 3)
        assert feedback.mse == pytest.approx(results["interior"].mse)

    def test_n_scale_sets_the_partition_constant(self):
        plain = run_rate_sweep(small_config(n_scale=1.0))
        assert [p.n_used for p in plain.points] == [4, 6]

    def test_csv_output(self, tmp_path):
        path = emit_results(run_rate_sweeps(small_config()), tmp_path / "r.csv", "csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "series,m,n_used,mse_mean,mse_std,log2_m,log_mse"
        assert len(lines) == 3
        assert lines[1].startswith("feedback,64,2,")

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            emit_results(run_rate_sweeps(small_config(m_values=[64], trials=1)), tmp_path / "r.txt", "yaml")

    def test_failing_trial_names_its_coordinates(self, monkeypatch):
        def broken(*args, **kwargs):
            raise RuntimeError("boom")

        monkeypatch.setattr("harness.harness.build_estimator", broken)
        with pytest.raises(ExperimentError, match="m=64, trial=0"):
            run_rate_sweep(small_config(m_values=[64], trials=1))


class TestComparisons:
    def test_feedback_needs_boundary_atoms(self):
        with pytest.raises(ExperimentError):
            run_feedback_comparison(small_config())

    def test_boundary_atoms_split_samples(self):
        config = small_config(distribution={"kind": "boundary-atom", "p_atom": 0.5})
        comparison = run_feedback_comparison(config)
        assert comparison.literal.mode == "literal"
        ratios = comparison.feedback.diagnostics["lambda_prime_ratio"]
        assert all(r < 1 for r in ratios)
        assert all(0 <= w <= config.trials for w in comparison.feedback_wins)
        assert len(comparison.ratio) == 2

    def test_dimension_comparison_shares_intrinsic_draws(self):
        low = small_config(manifold={"kind": "circle", "ambient_dim": 3})
        high = small_config(manifold={"kind": "circle", "ambient_dim": 10})
        a, b = generate_dataset(low, 64, seed=5), generate_dataset(high, 64, seed=5)
        assert np.array_equal(a.intrinsic, b.intrinsic)
        comparison = run_dimension_comparison(small_config(manifold={"kind": "circle", "ambient_dim": 3}), 10)
        assert comparison.low.label == "D=3"
        assert comparison.high.label == "D=10"


class TestDatasetsAndPredictions:
    def test_generate_fit_predict(self, tmp_path):
        config = small_config()
        sample = generate_dataset(config, 200, seed=3)
        path = sample.to_csv(tmp_path / "data.csv")
        loaded = load_dataset(config, path)
        assert loaded.bound == pytest.approx(1.2)
        est = fit_estimator(config, loaded)
        assert est.n == 3

        queries = read_queries(path)[:10]
        rows = predict_queries(est, queries, "interior")
        assert len(rows) == 10
        assert set(rows[0]) == {"x_1", "x_2", "prediction", "mode", "lambda_x", "lambda_xs", "lambda_xs_prime"}
        assert all(abs(r["prediction"]) <= loaded.bound for r in rows)
        out = write_predictions(rows, tmp_path / "pred.csv")
        assert out.read_text().splitlines()[0] == "x_1,x_2,prediction,mode,lambda_x,lambda_xs,lambda_xs_prime"

    def test_boundary_atom_dataset(self):
        config = small_config(distribution={"kind": "boundary-atom", "p_atom": 1.0})
        sample = generate_dataset(config, 20, seed=1)
        assert len(sample) == 20

    def test_write_nothing(self, tmp_path):
        with pytest.raises(ValueError):
            write_predictions([], tmp_path / "p.csv")


def test_quick_verification():
    reports = run_verification(seed=0, quick=True)
    names = [r.name for r in reports]
    assert names[0] == "proposition1"
    assert "indicator-crosscheck[circle]" in names
    assert "cardinality[sphere]" in names
    lemma1 = [r for r in reports if r.name.startswith("lemma1")]
    assert len(lemma1) == 12
    assert all(r.trials >= 10_000 for r in lemma1)
    assert all(r.passed for r in lemma1)
    assert all(r.details["exact_agrees"] for r in lemma1)
    deterministic = [r for r in reports if r.kind == "identity" and r.std_error == 0.0]
    assert deterministic and all(r.passed for r in deterministic)
    assert all(r.passed for r in reports if r.name.startswith("cardinality"))


@pytest.mark.slow
class TestLearningCurves:
    def test_rate_slope_on_circle(self):
        config = load_config(
            manifold={"kind": "circle", "ambient_dim": 3}, noise={"kind": "uniform", "amplitude": 0.2}
        )
        result = run_rate_sweep(config, "feedback")
        assert -1.0 <= result.slope <= -0.4
        assert result.monotone_fraction >= 0.8

    def test_slope_does_not_depend_on_ambient_dimension(self):
        config = load_config(manifold={"kind": "circle", "ambient_dim": 3})
        comparison = run_dimension_comparison(config, 10)
        assert comparison.low.slope <= -0.4
        assert comparison.high.slope <= -0.4
        assert comparison.slope_difference < 0.2

    def test_feedback_beats_literal_under_boundary_atoms(self):
        config = load_config(distribution={"kind": "boundary-atom", "p_atom": 0.3}, m_values=[4096])
        comparison = run_feedback_comparison(config)
        assert comparison.feedback_wins[0] >= 18
