"""Stratified k-fold cross-validation with sensitivity, specificity, ROC and AUC."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import classical, neural
from .errors import ClassTooSmall, LengthMismatch, SingleClassFold
from .text import EmbeddingMatrix, document_vectors

MODELS = ("rf", "svm", "lr", "ann", "cnn")  # results-table row order
FEATURE_SETS = ("acoustic", "linguistic")


def stratified_kfold(labels, k: int = 5, seed: int = 0) -> np.ndarray:
    """Fold index per example: each class is shuffled and dealt round-robin into k folds."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds = np.empty(len(labels), dtype=int)
    for c in np.unique(labels):
        idx = np.nonzero(labels == c)[0]
        if len(idx) < k:
            raise ClassTooSmall(f"class {c} has {len(idx)} examples, fewer than k={k}")
        folds[rng.permutation(idx)] = np.arange(len(idx)) % k
    return folds


def stratified_group_kfold(labels, groups, k: int = 5, seed: int = 0) -> np.ndarray:
    """Like ``stratified_kfold`` but whole groups (subjects) are dealt, so no group spans
    train and test. A group is stratified by whether it contains any positive."""
    labels = np.asarray(labels)
    groups = np.asarray(groups)
    uniq = list(dict.fromkeys(groups.tolist()))
    glabel = np.array([int(labels[groups == g].max()) for g in uniq])
    gfold = stratified_kfold(glabel, k, seed)
    lookup = dict(zip(uniq, gfold))
    return np.array([lookup[g] for g in groups.tolist()])


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def sensitivity(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def specificity(self) -> float:
        d = self.tn + self.fp
        return self.tn / d if d else 0.0

    @property
    def flags(self) -> list[str]:
        out = []
        if self.tp + self.fn == 0:
            out.append("sensitivity_undefined")
        if self.tn + self.fp == 0:
            out.append("specificity_undefined")
        return out


def confusion_at_threshold(scores, labels, threshold: float) -> Confusion:
    """Counts with 'predicted positive' meaning score >= threshold."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise LengthMismatch(f"{scores.shape} scores vs {labels.shape} labels")
    pred = scores >= threshold
    pos = labels == 1
    return Confusion(int(np.sum(pred & pos)), int(np.sum(pred & ~pos)),
                     int(np.sum(~pred & ~pos)), int(np.sum(~pred & pos)))


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) with ties counted as one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise LengthMismatch(f"{scores.shape} scores vs {labels.shape} labels")
    pos = np.sort(scores[labels == 1])
    neg = np.sort(scores[labels != 1])
    if len(pos) == 0 or len(neg) == 0:
        raise SingleClassFold("AUC needs both classes")
    below = np.searchsorted(neg, pos, side="left")
    not_above = np.searchsorted(neg, pos, side="right")
    # twice the concordance count, kept integral so the ratio is exact
    twice = int(np.sum(below + not_above))
    return twice / (2.0 * len(pos) * len(neg))


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """(fpr, tpr) at every distinct score threshold, from (0, 0) to (1, 1)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order] == 1
    distinct = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tps = np.cumsum(y)[distinct]
    fps = np.cumsum(~y)[distinct]
    n_pos, n_neg = max(y.sum(), 1), max((~y).sum(), 1)
    return np.r_[0.0, fps / n_neg], np.r_[0.0, tps / n_pos]


def trapezoid_auc(fpr, tpr) -> float:
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


# --------------------------------------------------------------------- dataset

@dataclass
class Dataset:
    labels: np.ndarray
    source_ids: list
    subject_ids: list
    acoustic: np.ndarray | None = None
    sequences: np.ndarray | None = None
    embedding: EmbeddingMatrix | None = None

    def __len__(self):
        return len(self.labels)


@dataclass
class ModelSpec:
    """Which classifier to train and how. ``params`` override trainer defaults."""

    model: str
    params: dict = field(default_factory=dict)
    class_weighted: bool = True
    dtype: str = "float32"

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _design(dataset: Dataset, feature_set: str, model: str):
    if feature_set == "acoustic":
        if dataset.acoustic is None:
            raise ValueError("dataset has no acoustic features")
        return np.asarray(dataset.acoustic, dtype=float)
    if feature_set != "linguistic":
        raise ValueError(f"unknown feature set {feature_set!r}")
    if dataset.sequences is None or dataset.embedding is None:
        raise ValueError("dataset has no token sequences / embeddings")
    if model in ("ann", "cnn"):
        return np.asarray(dataset.sequences)
    return document_vectors(dataset.sequences, dataset.embedding)


@dataclass
class FittedPipeline:
    """A trained model plus the training-fold preprocessing it needs at scoring time."""

    model: object
    standardizer: classical.Standardizer | None = None

    def score(self, X) -> np.ndarray:
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return self.model.score(X)

    @property
    def threshold(self) -> float:
        return self.model.threshold


def fit_pipeline(spec: ModelSpec, feature_set: str, X, y, embedding: EmbeddingMatrix | None = None,
                 seed: int = 0) -> FittedPipeline:
    """Fit preprocessing and the model on training data only."""
    y = np.asarray(y).astype(int)
    weights = classical.weights_for_labels(y) if spec.class_weighted else classical.UNIT_WEIGHTS
    params = dict(spec.params)
    sequence_input = feature_set == "linguistic" and spec.model in ("ann", "cnn")
    standardizer = None
    if spec.model != "rf" and not sequence_input:
        standardizer = classical.Standardizer.fit(X)
        X = standardizer.transform(X)

    if spec.model == "lr":
        model = classical.train_logistic(X, y, weights, seed=seed, **params)
    elif spec.model == "svm":
        model = classical.train_svm(X, y, weights, seed=seed, **params)
    elif spec.model == "rf":
        model = classical.train_random_forest(X, y, weights, seed=seed, **params)
    elif spec.model in ("ann", "cnn"):
        variant = f"{feature_set}_{spec.model}"
        arch = {k: params.pop(k) for k in ("hidden", "linguistic_hidden", "filters", "kernel_width") if k in params}
        meta = {"embedding": embedding} if sequence_input else {"n_features": X.shape[1]}
        net = neural.build_network(variant, meta, seed=seed, dtype=spec.dtype, **arch)
        config = neural.TrainConfig(seed=seed, **params)
        model = neural.train_network(net, X, y, config, weights)
    else:
        raise ValueError(f"unknown model {spec.model!r}")
    return FittedPipeline(model, standardizer)


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    tp: int
    fp: int
    tn: int
    fn: int
    sensitivity: float
    specificity: float
    auc: float
    fpr: list
    tpr: list
    flags: list


@dataclass
class EvaluationReport:
    model: str
    feature_set: str
    seed: int
    k: int
    group_by_subject: bool
    class_weighted: bool
    config_digest: str
    folds: list
    timestamp: str = ""

    @property
    def means(self) -> dict:
        return {m: float(np.mean([getattr(f, m) for f in self.folds]))
                for m in ("sensitivity", "specificity", "auc")}

    def to_dict(self) -> dict:
        return {
            "model": self.model, "feature_set": self.feature_set, "seed": self.seed, "k": self.k,
            "group_by_subject": self.group_by_subject, "class_weighted": self.class_weighted,
            "config_digest": self.config_digest, "timestamp": self.timestamp,
            "folds": [asdict(f) for f in self.folds], "means": self.means,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def run_cv(dataset: Dataset, spec: ModelSpec, feature_set: str, k: int = 5, seed: int = 0,
           group_by_subject: bool = False, on_fold=None) -> EvaluationReport:
    """Train on k-1 folds, score the held-out fold, repeat for every fold.

    Standardisation and class weights are fitted on each training split only.
    ``on_fold(fold, fitted_pipeline)`` is called after each fold is trained.
    """
    y = np.asarray(dataset.labels).astype(int)
    X = _design(dataset, feature_set, spec.model)
    if group_by_subject:
        folds = stratified_group_kfold(y, dataset.subject_ids, k, seed)
    else:
        folds = stratified_kfold(y, k, seed)
    results = []
    for f in range(k):
        test = folds == f
        train = ~test
        fitted = fit_pipeline(spec, feature_set, X[train], y[train], dataset.embedding, seed=seed * 1000 + f)
        if on_fold is not None:
            on_fold(f, fitted)
        scores = fitted.score(X[test])
        cm = confusion_at_threshold(scores, y[test], fitted.threshold)
        fpr, tpr = roc_curve(scores, y[test])
        flags = cm.flags
        if getattr(fitted.model, "converged", True) is False:
            flags.append("svm_not_converged")
        results.append(FoldResult(f, int(train.sum()), int(test.sum()), cm.tp, cm.fp, cm.tn, cm.fn,
                                  cm.sensitivity, cm.specificity, auc(scores, y[test]),
                                  fpr.tolist(), tpr.tolist(), flags))
    return EvaluationReport(spec.model, feature_set, seed, k, group_by_subject, spec.class_weighted,
                            spec.digest(), results, datetime.now(timezone.utc).isoformat())


def results_table(reports: list[EvaluationReport]) -> dict:
    """Feature-set x model grid plus per-feature-set best-model and across-model-mean summaries."""
    order = {(fs, m): i for i, (fs, m) in enumerate((fs, m) for fs in FEATURE_SETS for m in MODELS)}
    rows = sorted(({"feature_set": r.feature_set, "model": r.model, **r.means} for r in reports),
                  key=lambda row: order.get((row["feature_set"], row["model"]), len(order)))
    summary = {}
    for fs in FEATURE_SETS:
        sub = [r for r in rows if r["feature_set"] == fs]
        if not sub:
            continue
        best = max(sub, key=lambda r: r["auc"])
        summary[fs] = {"best_model": best["model"], "best_auc": best["auc"],
                       "mean_auc": float(np.mean([r["auc"] for r in sub]))}
    return {"rows": rows, "summary": summary}


def table_csv(table: dict) -> str:
    lines = ["feature_set,model,sensitivity,specificity,auc"]
    for r in table["rows"]:
        lines.append(f"{r['feature_set']},{r['model']},{r['sensitivity']:.4f},{r['specificity']:.4f},{r['auc']:.4f}")
    return "\n".join(lines) + "\n"
