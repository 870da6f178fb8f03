"""All numeric pipeline defaults in one place, overridable from a JSON file and CLI flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path


@dataclass
class PipelineConfig:
    # framing
    frame_size_ms: float = 50.0
    frame_step_ms: float = 25.0
    # text
    embedding_dim: int = 100
    embedding_window: int = 5
    embedding_negatives: int = 5
    embedding_epochs: int = 5
    max_len: int | None = None
    # classical models
    lr_l2: float = 1e-4
    lr_learning_rate: float = 0.1
    lr_epochs: int = 500
    svm_kernel: str = "rbf"
    svm_C: float = 1.0
    svm_tol: float = 1e-3
    rf_trees: int = 5
    # networks
    nn_epochs: int = 250
    nn_batch_size: int = 32
    nn_learning_rate: float = 0.001
    nn_filters: int = 250
    nn_kernel_width: int = 3
    nn_dtype: str = "float32"
    # evaluation
    k_folds: int = 5
    class_weighted: bool = True
    group_by_subject: bool = False
    # exploratory
    chi2_bins: int = 4
    alpha: float = 0.05
    seed: int = 0

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def model_params(self, model: str) -> dict:
        """Trainer keyword arguments for one model kind."""
        if model == "lr":
            return {"l2": self.lr_l2, "lr": self.lr_learning_rate, "epochs": self.lr_epochs}
        if model == "svm":
            return {"kernel": self.svm_kernel, "C": self.svm_C, "tol": self.svm_tol}
        if model == "rf":
            return {"n_trees": self.rf_trees}
        if model in ("ann", "cnn"):
            return {"epochs": self.nn_epochs, "batch_size": self.nn_batch_size, "lr": self.nn_learning_rate,
                    "filters": self.nn_filters, "kernel_width": self.nn_kernel_width}
        raise ValueError(f"unknown model {model!r}")
