"""File-level pipeline stages shared by the CLI: extraction, text preparation, dataset assembly."""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

import numpy as np

from .audio_io import read_wav
from .config import PipelineConfig
from .errors import SpeechSIError
from .evaluation import Dataset
from .features import FEATURE_NAMES, FeatureVector, extract_features
from .manifest import DatasetManifest
from .text import (EmbeddingMatrix, Vocabulary, fit_vocabulary, load_embeddings, save_embeddings,
                   texts_to_sequences, train_embeddings)

log = logging.getLogger(__name__)


def extract_manifest(manifest: DatasetManifest, config: PipelineConfig = PipelineConfig()):
    """Acoustic feature vectors for every decodable row; failures are returned, not raised."""
    good, failures = [], []
    for row in manifest.rows:
        try:
            clip = read_wav(manifest.audio_file(row), row.source_id)
            fv = extract_features(clip, config.frame_size_ms, config.frame_step_ms)
        except (SpeechSIError, OSError, ValueError) as exc:
            failures.append((row.source_id, f"{type(exc).__name__}: {exc}"))
            continue
        if not np.all(np.isfinite(fv.values)):
            failures.append((row.source_id, "non-finite feature values"))
            continue
        good.append((row.source_id, row.label, fv))
    return good, failures


def features_csv(rows: list[tuple[str, int, FeatureVector]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["source_id", "label", *FEATURE_NAMES])
    for sid, label, fv in rows:
        w.writerow([sid, label, *(repr(float(v)) for v in fv.values)])
    return buf.getvalue()


def read_features_csv(path):
    """Returns (source_ids, labels, feature_names, X)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["source_id", "label"]:
            raise ValueError(f"{path}: header must start with source_id,label")
        ids, labels, rows = [], [], []
        for rec in reader:
            ids.append(rec[0])
            labels.append(int(rec[1]))
            rows.append([float(v) for v in rec[2:]])
    return ids, np.array(labels), header[2:], np.array(rows, dtype=float).reshape(len(ids), len(header) - 2)


def prep_text(manifest: DatasetManifest, out_dir, config: PipelineConfig = PipelineConfig()):
    """Fit the vocabulary, pad sequences, train embeddings and write the three sidecars."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = manifest.transcripts()
    vocab = fit_vocabulary(corpus)
    seqs = texts_to_sequences(vocab, corpus, config.max_len)
    emb = train_embeddings(corpus, vocab, dim=config.embedding_dim, window=config.embedding_window,
                           negatives=config.embedding_negatives, epochs=config.embedding_epochs,
                           seed=config.seed)
    (out / "vocab.json").write_text(vocab.to_json() + "\n", encoding="utf-8")
    lines = ["source_id,label," + ",".join(f"t{i}" for i in range(len(seqs[0].ids)))]
    for row, s in zip(manifest.rows, seqs):
        lines.append(f"{row.source_id},{row.label}," + ",".join(str(int(v)) for v in s.ids))
    (out / "sequences.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    save_embeddings(emb, vocab, out / "embeddings.csv")
    return vocab, seqs, emb


def load_text_prep(text_dir):
    """Returns (source_ids, id matrix, EmbeddingMatrix, Vocabulary)."""
    d = Path(text_dir)
    vocab = Vocabulary.from_json((d / "vocab.json").read_text(encoding="utf-8"))
    lines = (d / "sequences.csv").read_text(encoding="utf-8").splitlines()[1:]
    ids = [ln.split(",", 1)[0] for ln in lines if ln]
    mat = np.array([[int(v) for v in ln.split(",")[2:]] for ln in lines if ln], dtype=np.int64)
    return ids, mat, load_embeddings(d / "embeddings.csv"), vocab


def assemble_dataset(manifest: DatasetManifest, features_path=None, text_dir=None) -> Dataset:
    """Join manifest labels/subjects with whichever feature sources are given, by source_id.

    Rows missing from any supplied source (e.g. recordings that failed
    extraction) are dropped.
    """
    by_id = {r.source_id: r for r in manifest.rows}
    keep = [r.source_id for r in manifest.rows]
    acoustic = seqs = emb = None
    if features_path is not None:
        f_ids, _, _, X = read_features_csv(features_path)
        f_index = {s: i for i, s in enumerate(f_ids)}
        keep = [s for s in keep if s in f_index]
    if text_dir is not None:
        t_ids, mat, emb, _ = load_text_prep(text_dir)
        t_index = {s: i for i, s in enumerate(t_ids)}
        keep = [s for s in keep if s in t_index]
    if features_path is not None:
        acoustic = X[[f_index[s] for s in keep]]
    if text_dir is not None:
        seqs = mat[[t_index[s] for s in keep]]
    dropped = len(manifest.rows) - len(keep)
    if dropped:
        log.warning("%d manifest rows lack features and are excluded", dropped)
    return Dataset(np.array([by_id[s].label for s in keep]), keep, [by_id[s].subject_id for s in keep],
                   acoustic, seqs, emb)


def dataset_from_arrays(labels, acoustic=None, sequences=None, embedding: EmbeddingMatrix | None = None,
                        subject_ids=None) -> Dataset:
    n = len(labels)
    ids = [f"rec{i:04d}" for i in range(n)]
    return Dataset(np.asarray(labels), ids, list(subject_ids) if subject_ids is not None else ids,
                   acoustic, sequences, embedding)
