from mcp.server.fastmcp import FastMCP
from harness import (
    ArtifactStore,
    emit_results,
    fit_estimator,
    generate_dataset,
    load_config,
    predict_queries,
    result_payload,
    run_feedback_comparison,
    run_rate_sweeps,
    run_verification,
)
import os
import json
import logging
import traceback
from dotenv import load_dotenv

load_dotenv()

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s | %(levelname)s | %(message)s',
    datefmt='%H:%M:%S'
)

# Initialize the MCP server
mcp = FastMCP("localnet")

# Artifacts live under LOCALNET_DATA_DIR (default ~/.localnet)
data_dir = os.path.expanduser(os.getenv("LOCALNET_DATA_DIR", "~/.localnet"))
store = ArtifactStore(data_dir)


def _config(config_json: str):
    return load_config(**(json.loads(config_json) if config_json.strip() else {}))


@mcp.tool()
def generate_dataset_tool(config_json: str = "", m: int = 1024, seed: int = 0) -> str:
    """
    Draw a sample set on the configured manifold and store it.

    Examples:
        generate_dataset_tool(config_json='{"manifold": {"kind": "sphere"}}', m=2048)

    Args:
        config_json: experiment configuration as JSON (defaults for omitted fields)
        m: number of samples
        seed: generating seed

    Returns:
        JSON with the dataset id, m and the bound M
    """
    try:
        sample = generate_dataset(_config(config_json), m, seed)
        dataset_id = store.save_dataset(sample)
        return json.dumps({"dataset_id": dataset_id, "m": len(sample), "M": sample.bound}, indent=2)
    except Exception as e:
        return f"Error generating dataset:\n{str(e)}\n\n{traceback.format_exc()}"


@mcp.tool()
def fit_estimator_tool(dataset_id: str, config_json: str = "") -> str:
    """
    Build the atlas and the deep-net estimator for a stored dataset.

    Args:
        dataset_id: id returned by generate_dataset_tool
        config_json: the configuration the dataset was generated with

    Returns:
        JSON with estimator and atlas ids, n, q* and the number of non-empty cells
    """
    try:
        est = fit_estimator(_config(config_json), store.load_dataset(dataset_id))
        estimator_id, atlas_id = store.save_estimator(est)
        response = {
            "estimator_id": estimator_id,
            "atlas_id": atlas_id,
            "n": est.n,
            "q_star": est.atlas.q_star,
            "charts": est.atlas.size,
            "cells": len(est.table.counts),
        }
        return json.dumps(response, indent=2)
    except Exception as e:
        return f"Error fitting estimator:\n{str(e)}\n\n{traceback.format_exc()}"


@mcp.tool()
def predict(estimator_id: str, queries_json: str, mode: str = "feedback") -> str:
    """
    Predict at query points with a stored estimator.

    Examples:
        predict(estimator_id="3f2a...", queries_json="[[0.9, 0.0], [0.0, 0.9]]", mode="interior")

    Args:
        estimator_id: id returned by fit_estimator_tool
        queries_json: JSON list of ambient points
        mode: literal, interior or feedback

    Returns:
        JSON with one row per query (prediction and Lambda-set sizes) and the stored predictions id
    """
    try:
        rows = predict_queries(store.load_estimator(estimator_id), json.loads(queries_json), mode)
        return json.dumps({"predictions_id": store.save_predictions(rows), "rows": rows}, indent=2)
    except Exception as e:
        return f"Error predicting:\n{str(e)}\n\n{traceback.format_exc()}"


@mcp.tool()
def run_rates(config_json: str = "") -> str:
    """
    Learning-curve sweep of the configured modes; the result is stored under its fingerprint.

    Args:
        config_json: experiment configuration as JSON

    Returns:
        JSON rate results (per-m mean MSE, fitted and theoretical slopes)
    """
    try:
        config = _config(config_json)
        results = run_rate_sweeps(config)
        payload = result_payload(results)
        store.save_result(f"rates-{config.fingerprint()}", payload)
        if config.output:
            emit_results(results, config.output)
        return json.dumps(payload, indent=2, sort_keys=True)
    except Exception as e:
        return f"Error running rate sweep:\n{str(e)}\n\n{traceback.format_exc()}"


@mcp.tool()
def compare_feedback(config_json: str, baseline: str = "literal") -> str:
    """
    Baseline mode against feedback on the same boundary-atom data.

    Args:
        config_json: configuration with distribution.kind = "boundary-atom"
        baseline: mode to compare against (literal by default)

    Returns:
        JSON comparison with per-m MSE ratio and feedback win counts
    """
    try:
        config = _config(config_json)
        payload = result_payload(run_feedback_comparison(config, baseline))
        store.save_result(f"feedback-{config.fingerprint()}", payload)
        return json.dumps(payload, indent=2, sort_keys=True)
    except Exception as e:
        return f"Error comparing feedback:\n{str(e)}\n\n{traceback.format_exc()}"


@mcp.tool()
def verify(seed: int = 0, quick: bool = True) -> str:
    """
    Property and Monte-Carlo checks of the construction.

    Args:
        seed: master seed
        quick: smaller sample sizes

    Returns:
        JSON array of reports
    """
    try:
        return json.dumps(result_payload(run_verification(seed, quick)), indent=2)
    except Exception as e:
        return f"Error during verification:\n{str(e)}\n\n{traceback.format_exc()}"


if __name__ == "__main__":
    mcp.run()
