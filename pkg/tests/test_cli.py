import json

from typer.testing import CliRunner

from cli import app

runner = CliRunner()


def test_gen_fit_predict(tmp_path):
    data, est, pred = tmp_path / "data.csv", tmp_path / "est.json", tmp_path / "pred.csv"

    result = runner.invoke(app, ["gen", "--out", str(data), "--m", "200", "--seed", "3"])
    assert result.exit_code == 0, result.output
    assert data.read_text().splitlines()[0] == "x_1,x_2,y"

    result = runner.invoke(app, ["fit", "--data", str(data), "--out", str(est)])
    assert result.exit_code == 0, result.output
    payload = json.loads(est.read_text())
    assert set(payload) == {"atlas", "estimator"}
    assert payload["estimator"]["n"] == 3

    result = runner.invoke(
        app, ["predict", "--est", str(est), "--queries", str(data), "--mode", "interior", "--out", str(pred)]
    )
    assert result.exit_code == 0, result.output
    lines = pred.read_text().splitlines()
    assert len(lines) == 201
    assert lines[0].startswith("x_1,x_2,prediction,mode")


def test_unknown_mode(tmp_path):
    data, est = tmp_path / "data.csv", tmp_path / "est.json"
    runner.invoke(app, ["gen", "--out", str(data), "--m", "50"])
    runner.invoke(app, ["fit", "--data", str(data), "--out", str(est)])
    result = runner.invoke(
        app, ["predict", "--est", str(est), "--queries", str(data), "--mode", "median", "--out", str(tmp_path / "p.csv")]
    )
    assert result.exit_code == 1
    assert "mode must be one of" in result.output


def test_feedback_comparison_needs_atoms(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"m_values": [64], "trials": 1, "test_points": 32}))
    result = runner.invoke(app, ["compare-feedback", "--config", str(config), "--out", str(tmp_path / "r.json")])
    assert result.exit_code == 1
    assert "boundary-atom" in result.output


def test_rates_csv(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"m_values": [64, 128], "trials": 1, "test_points": 64}))
    out = tmp_path / "r.csv"
    result = runner.invoke(app, ["rates", "--config", str(config), "--out", str(out), "--format", "csv"])
    assert result.exit_code == 0, result.output
    assert out.read_text().splitlines()[0].startswith("series,m,n_used")
