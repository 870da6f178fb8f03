import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speechsi.errors import ClassTooSmall, LengthMismatch, SingleClassFold
from speechsi.evaluation import (MODELS, Dataset, EvaluationReport, FoldResult, ModelSpec, auc, confusion_at_threshold,
                                 results_table, roc_curve, run_cv, stratified_group_kfold, stratified_kfold,
                                 table_csv, trapezoid_auc)


def brute_auc(scores, labels):
    num, den = 0.0, 0
    for sp, lp in zip(scores, labels):
        for sn, ln in zip(scores, labels):
            if lp == 1 and ln == 0:
                den += 1
                num += 1.0 if sp > sn else 0.5 if sp == sn else 0.0
    return num / den


def per_fold_counts(labels, folds, k):
    labels = np.asarray(labels)
    return [np.bincount(labels[folds == f], minlength=2) for f in range(k)]


# -- folds

def test_divisible_split():
    y = np.r_[np.ones(10, int), np.zeros(60, int)]
    counts = per_fold_counts(y, stratified_kfold(y, 5, seed=3), 5)
    assert all(c.tolist() == [12, 2] for c in counts)


def test_73_442_split():
    y = np.r_[np.ones(73, int), np.zeros(442, int)]
    counts = np.array(per_fold_counts(y, stratified_kfold(y, 5, seed=0), 5))
    assert set(counts[:, 1]) == {14, 15} and set(counts[:, 0]) == {88, 89}
    assert counts.sum(axis=0).tolist() == [442, 73]


def test_class_too_small():
    with pytest.raises(ClassTooSmall):
        stratified_kfold([1] * 4 + [0] * 20, 5)


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 40), st.integers(5, 80), st.integers(2, 5), st.integers(0, 10_000))
def test_folds_partition_and_stratify(n_pos, n_neg, k, seed):
    y = np.r_[np.ones(n_pos, int), np.zeros(n_neg, int)]
    folds = stratified_kfold(y, k, seed)
    assert set(folds.tolist()) == set(range(k))
    union = np.sort(np.concatenate([np.nonzero(folds == f)[0] for f in range(k)]))
    assert np.array_equal(union, np.arange(len(y)))
    counts = np.array(per_fold_counts(y, folds, k))
    assert np.all(counts.max(axis=0) - counts.min(axis=0) <= 1)


def test_group_folds_keep_subjects_together():
    y = np.r_[np.ones(25, int), np.zeros(75, int)]
    groups = [f"s{i // 5}" for i in range(100)]
    folds = stratified_group_kfold(y, groups, 5, seed=1)
    for g in set(groups):
        assert len(set(folds[np.array(groups) == g])) == 1
    assert all(c[1] == 5 for c in per_fold_counts(y, folds, 5))


# -- confusion

def test_confusion_examples():
    cm = confusion_at_threshold([1, 0, 1, 0], [1, 0, 1, 0], 0.5)
    assert cm.sensitivity == 1 and cm.specificity == 1
    cm = confusion_at_threshold([0.4] * 4, [1, 0, 1, 0], 0.5)
    assert cm.sensitivity == 0 and cm.specificity == 1
    cm = confusion_at_threshold([0.9, 0.6, 0.4, 0.1], [1, 0, 1, 0], 0.5)
    assert (cm.tp, cm.fp, cm.tn, cm.fn) == (1, 1, 1, 1)
    assert cm.sensitivity == 0.5 and cm.specificity == 0.5


def test_confusion_zero_denominator_flagged():
    cm = confusion_at_threshold([0.2, 0.7], [0, 0], 0.5)
    assert cm.sensitivity == 0.0 and "sensitivity_undefined" in cm.flags


def test_confusion_matches_direct_counting_all_thresholds(rng):
    for _ in range(100):
        n = rng.integers(1, 13)
        scores = rng.integers(0, 5, n) / 4
        labels = rng.integers(0, 2, n)
        for t in np.r_[np.unique(scores), 2.0]:
            cm = confusion_at_threshold(scores, labels, t)
            tp = sum(1 for s, l in zip(scores, labels) if s >= t and l == 1)
            fn = sum(1 for s, l in zip(scores, labels) if s < t and l == 1)
            tn = sum(1 for s, l in zip(scores, labels) if s < t and l == 0)
            fp = sum(1 for s, l in zip(scores, labels) if s >= t and l == 0)
            assert (cm.tp, cm.fp, cm.tn, cm.fn) == (tp, fp, tn, fn)
            assert cm.sensitivity == (tp / (tp + fn) if tp + fn else 0.0)
            assert cm.specificity == (tn / (tn + fp) if tn + fp else 0.0)


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        confusion_at_threshold([0.1, 0.2], [1], 0.5)
    with pytest.raises(LengthMismatch):
        auc([0.1, 0.2], [1])


# -- AUC

def test_auc_examples():
    assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auc([0.3] * 6, [1, 0, 1, 0, 0, 0]) == 0.5
    assert auc([0.8, 0.7, 0.3], [1, 0, 1]) == 0.5


def test_auc_single_class():
    with pytest.raises(SingleClassFold):
        auc([0.1, 0.2], [1, 1])


def test_auc_equals_brute_force_exactly(rng):
    done = 0
    while done < 200:
        n = int(rng.integers(2, 13))
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            continue
        scores = rng.integers(0, 6, n) / 5 if done % 2 else rng.random(n)
        assert auc(scores, labels) == brute_auc(scores, labels)
        done += 1


def test_auc_monotone_invariance(rng):
    for _ in range(50):
        s = rng.standard_normal(30)
        y = np.r_[1, 0, rng.integers(0, 2, 28)]
        a = auc(s, y)
        assert auc(2 * s + 1, y) == a
        assert auc(s ** 3, y) == a


def test_trapezoid_roc_agrees_with_mann_whitney(rng):
    for _ in range(50):
        s = rng.integers(0, 8, 25) / 7
        y = np.r_[1, 0, rng.integers(0, 2, 23)]
        fpr, tpr = roc_curve(s, y)
        assert fpr[0] == 0 and tpr[0] == 0 and fpr[-1] == 1 and tpr[-1] == 1
        assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)
        assert trapezoid_auc(fpr, tpr) == pytest.approx(auc(s, y), abs=1e-12)


# -- cross-validation harness

def toy_dataset(n_pos=20, n_neg=60, shift=3.0, seed=0, F=6):
    r = np.random.default_rng(seed)
    y = np.r_[np.ones(n_pos, int), np.zeros(n_neg, int)]
    X = r.standard_normal((len(y), F))
    X[:, 0] += shift * y
    return Dataset(y, [f"r{i}" for i in range(len(y))], [f"s{i // 4}" for i in range(len(y))], acoustic=X)


def test_perfect_separation_gives_auc_one():
    report = run_cv(toy_dataset(shift=12.0), ModelSpec("lr"), "acoustic", seed=0)
    assert report.means["auc"] == 1.0
    assert all(f.auc == 1.0 for f in report.folds)


def test_means_are_fold_averages():
    report = run_cv(toy_dataset(shift=1.0), ModelSpec("lr"), "acoustic", seed=2)
    for m in ("sensitivity", "specificity", "auc"):
        assert report.means[m] == pytest.approx(sum(getattr(f, m) for f in report.folds) / 5, abs=1e-15)
        assert all(0 <= getattr(f, m) <= 1 for f in report.folds)
    d = report.to_dict()
    assert len(d["folds"]) == 5 and sum(f["n_test"] for f in d["folds"]) == 80


def test_standardizer_ignores_test_fold():
    ds = toy_dataset(seed=4)
    spec = ModelSpec("lr")
    seen = {}
    run_cv(ds, spec, "acoustic", seed=1, on_fold=lambda f, fit: seen.setdefault(f, fit.standardizer.mean.copy()))
    folds = stratified_kfold(ds.labels, 5, seed=1)
    poisoned = ds.acoustic.copy()
    poisoned[folds == 0] += 1000.0
    ds2 = Dataset(ds.labels, ds.source_ids, ds.subject_ids, acoustic=poisoned)
    seen2 = {}
    run_cv(ds2, spec, "acoustic", seed=1, on_fold=lambda f, fit: seen2.setdefault(f, fit.standardizer.mean.copy()))
    assert np.array_equal(seen[0], seen2[0])
    assert not np.array_equal(seen[1], seen2[1])


def test_group_mode_runs():
    report = run_cv(toy_dataset(), ModelSpec("lr"), "acoustic", seed=0, group_by_subject=True)
    assert report.group_by_subject and len(report.folds) == 5


FAST = {"lr": {}, "svm": {}, "rf": {}, "ann": {"epochs": 30}, "cnn": {"epochs": 30, "filters": 16}}


@pytest.mark.parametrize("model", MODELS)
def test_permutation_null(model):
    aucs = []
    for seed in range(5):
        ds = toy_dataset(shift=2.0, seed=seed, F=10)
        shuffled = np.random.default_rng(100 + seed).permutation(ds.labels)
        ds = Dataset(shuffled, ds.source_ids, ds.subject_ids, acoustic=ds.acoustic)
        aucs.append(run_cv(ds, ModelSpec(model, FAST[model]), "acoustic", seed=seed).means["auc"])
    assert 0.35 <= np.mean(aucs) <= 0.65


def test_results_table_layout():
    fold = dict(fold=0, n_train=4, n_test=1, tp=1, fp=0, tn=0, fn=0, fpr=[], tpr=[], flags=[])
    reports = [EvaluationReport(m, fs, 0, 1, False, True, "x",
                                [FoldResult(sensitivity=0.5, specificity=0.5, auc=a, **fold)])
               for (fs, m), a in zip(itertools.product(("linguistic", "acoustic"), MODELS[::-1]),
                                     np.linspace(0.5, 0.95, 10))]
    table = results_table(reports)
    assert [(r["feature_set"], r["model"]) for r in table["rows"]] == \
        [(fs, m) for fs in ("acoustic", "linguistic") for m in MODELS]
    assert table["summary"]["acoustic"]["best_model"] == "rf"
    csv = table_csv(table).splitlines()
    assert csv[0] == "feature_set,model,sensitivity,specificity,auc" and len(csv) == 11
