"""
File-based artifact store for datasets, atlases, estimators, predictions and results.

Artifacts are addressed by the md5 of their canonical JSON content and kept
under {root}/{kind}/{id}.json (datasets and predictions as {id}.csv).
"""

import hashlib
import json
import logging
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from charts import Atlas
from estimator import DeepNetEstimator
from geometry import SampleSet

from .harness import write_predictions

logger = logging.getLogger("Storage")

KINDS = ("datasets", "atlases", "estimators", "predictions", "results")


class ArtifactStore:
    """
    Stores experiment artifacts with file-based persistence.

    Writes are serialized through one lock; reads of finished files need none.
    """

    def __init__(self, root: Union[str, Path]):
        """
        Initialize the store.

        Args:
            root: directory under which every artifact kind gets a subdirectory
        """
        self.root = Path(root).expanduser()
        self.lock = threading.Lock()
        for kind in KINDS:
            (self.root / kind).mkdir(parents=True, exist_ok=True)

    @staticmethod
    def _content_id(payload: Any) -> str:
        canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.md5(canonical.encode("utf-8")).hexdigest()

    def _path(self, kind: str, artifact_id: str, suffix: str = ".json") -> Path:
        if kind not in KINDS:
            raise ValueError(f"Unknown artifact kind: {kind}")
        return self.root / kind / f"{artifact_id}{suffix}"

    def _write_json(self, kind: str, payload: Any, artifact_id: Optional[str] = None) -> str:
        artifact_id = artifact_id or self._content_id(payload)
        with self.lock:
            with open(self._path(kind, artifact_id), "w", encoding="utf-8") as f:
                json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False)
        logger.debug(f"stored {kind}/{artifact_id}")
        return artifact_id

    def _read_json(self, kind: str, artifact_id: str) -> Any:
        path = self._path(kind, artifact_id)
        if not path.exists():
            raise FileNotFoundError(f"No {kind[:-1]} with id {artifact_id}")
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)

    def save_dataset(self, sample: SampleSet) -> str:
        """Persist a sample set as CSV plus a small metadata file; returns its id."""
        meta = {"bound": sample.bound, "seed": sample.seed, "manifold": sample.manifold, "m": len(sample)}
        digest = hashlib.md5(np.ascontiguousarray(np.column_stack([sample.points, sample.values])).tobytes())
        artifact_id = digest.hexdigest()
        with self.lock:
            sample.to_csv(self._path("datasets", artifact_id, ".csv"))
            with open(self._path("datasets", artifact_id), "w", encoding="utf-8") as f:
                json.dump(meta, f, indent=2, sort_keys=True)
        return artifact_id

    def load_dataset(self, artifact_id: str) -> SampleSet:
        meta = self._read_json("datasets", artifact_id)
        sample = SampleSet.from_csv(self._path("datasets", artifact_id, ".csv"), meta["bound"], meta["seed"])
        sample.manifold = meta.get("manifold", {})
        return sample

    def save_atlas(self, atlas: Atlas) -> str:
        return self._write_json("atlases", atlas.to_dict())

    def load_atlas(self, artifact_id: str) -> Atlas:
        return Atlas.from_dict(self._read_json("atlases", artifact_id))

    def save_estimator(self, estimator: DeepNetEstimator) -> Tuple[str, str]:
        """
        Persist an estimator together with its atlas.

        Returns:
            (estimator id, atlas id)
        """
        atlas_id = self.save_atlas(estimator.atlas)
        return self._write_json("estimators", estimator.to_dict(atlas_ref=atlas_id)), atlas_id

    def load_estimator(self, artifact_id: str) -> DeepNetEstimator:
        data = self._read_json("estimators", artifact_id)
        return DeepNetEstimator.from_dict(data, self.load_atlas(data["atlas_ref"]))

    def save_predictions(self, rows: List[Dict[str, Any]]) -> str:
        """Persist prediction rows as CSV; the id is the md5 of their JSON form."""
        artifact_id = self._content_id(rows)
        with self.lock:
            write_predictions(rows, self._path("predictions", artifact_id, ".csv"))
        return artifact_id

    def save_result(self, name: str, payload: Any) -> str:
        return self._write_json("results", payload, artifact_id=name)

    def load_result(self, name: str) -> Any:
        return self._read_json("results", name)

    def list_artifacts(self, kind: str) -> List[Dict[str, Any]]:
        """Ids and sizes of the stored artifacts of one kind, sorted by id."""
        folder = self.root / kind
        suffix = ".csv" if kind == "predictions" else ".json"
        return [
            {"id": path.stem, "bytes": path.stat().st_size}
            for path in sorted(folder.glob(f"*{suffix}"))
        ]
