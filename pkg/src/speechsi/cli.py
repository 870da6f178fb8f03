"""Command-line front end: synth, extract, prep-text, evaluate, analyze."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import plots
from .classical import model_to_dict
from .config import PipelineConfig
from .errors import SpeechSIError
from .evaluation import FEATURE_SETS, MODELS, ModelSpec, fit_pipeline, results_table, run_cv, table_csv
from .exploratory import scaled_f_scores, significance_csv, significance_report, term_scores_csv
from .manifest import load_manifest
from .pipeline import assemble_dataset, extract_manifest, features_csv, prep_text, read_features_csv
from .schema import validate_report, validate_table
from .stopwords import STOPWORDS, stopwords_digest
from .synth import SynthConfig, synth_dataset
from .text import document_vectors

OUT_ENV = "SPEECHSI_OUT"
MAX_FAILURE_FRACTION = 0.10
DISPLAY = {"acoustic": "Acoustic", "linguistic": "Linguistic",
           "rf": "RF", "svm": "SVM", "lr": "LR", "ann": "ANN", "cnn": "CNN"}

log = logging.getLogger("speechsi")


def _default_out(name: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "speechsi_out")) / name


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides = {}
    for key in ("seed", "k_folds", "frame_size_ms", "frame_step_ms", "embedding_dim", "embedding_epochs",
                "nn_epochs", "max_len", "chi2_bins"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "group_by_subject", False):
        overrides["group_by_subject"] = True
    if getattr(args, "no_class_weights", False):
        overrides["class_weighted"] = False
    return replace(cfg, **overrides)


def cmd_synth(args) -> int:
    cfg = SynthConfig(n_recordings=args.n, imbalance=args.imbalance, separability=args.sep,
                      duration_range=(args.min_duration, args.max_duration),
                      sample_rate_hz=args.sample_rate, seed=args.seed if args.seed is not None else 0)
    manifest = synth_dataset(cfg, args.out)
    print(Path(args.out) / "manifest.csv")
    n_pos = sum(manifest.labels)
    log.info("wrote %d recordings (%d positive, %d negative)", len(manifest), n_pos, len(manifest) - n_pos)
    return 0


def cmd_extract(args) -> int:
    cfg = _config(args)
    manifest = load_manifest(args.manifest, check_files=False)
    rows, failures = extract_manifest(manifest, cfg)
    for sid, reason in failures:
        log.warning("skipped %s: %s", sid, reason)
    out = Path(args.out) if args.out else _default_out("features.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(features_csv(rows), encoding="utf-8")
    print(f"extracted {len(rows)} of {len(manifest)} recordings ({len(failures)} failed) -> {out}")
    if failures and len(failures) > MAX_FAILURE_FRACTION * len(manifest):
        log.error("more than %d%% of rows failed", int(MAX_FAILURE_FRACTION * 100))
        return 1
    return 0


def cmd_prep_text(args) -> int:
    cfg = _config(args)
    manifest = load_manifest(args.manifest)
    out = Path(args.out) if args.out else _default_out("text")
    vocab, seqs, emb = prep_text(manifest, out, cfg)
    print(f"vocabulary {len(vocab)} terms, max_len {len(seqs[0].ids)}, embeddings {emb.rows.shape} -> {out}")
    return 0


def _spec(cfg: PipelineConfig, model: str) -> ModelSpec:
    return ModelSpec(model, cfg.model_params(model), cfg.class_weighted, cfg.nn_dtype)


def _write_report(report, out: Path, loss_traces: dict) -> dict:
    doc = report.to_dict()
    validate_report(doc)
    stem = f"{report.feature_set}_{report.model}"
    (out / f"report_{stem}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    lines = ["fold,fpr,tpr"]
    for f in report.folds:
        lines += [f"{f.fold},{a!r},{b!r}" for a, b in zip(f.fpr, f.tpr)]
    (out / f"roc_{stem}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    for fold, trace in loss_traces.items():
        body = "epoch,loss\n" + "".join(f"{i + 1},{v!r}\n" for i, v in enumerate(trace))
        (out / f"loss_{stem}_fold{fold}.csv").write_text(body, encoding="utf-8")
    return doc


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    out = Path(args.out) if args.out else _default_out("reports")
    out.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(args.manifest, check_files=False)
    if args.all:
        cells = [(fs, m) for fs in FEATURE_SETS for m in MODELS]
    else:
        if not (args.model and args.features):
            log.error("--model and --features are required unless --all is given")
            return 2
        cells = [(args.features, args.model)]
    need = {fs for fs, _ in cells}
    if "acoustic" in need and not args.features_csv:
        log.error("acoustic evaluation needs --features-csv")
        return 2
    if "linguistic" in need and not args.text_dir:
        log.error("linguistic evaluation needs --text-dir")
        return 2

    datasets = {}
    if "acoustic" in need:
        datasets["acoustic"] = assemble_dataset(manifest, features_path=args.features_csv)
    if "linguistic" in need:
        datasets["linguistic"] = assemble_dataset(manifest, text_dir=args.text_dir)

    reports, curves = [], {fs: {} for fs in need}
    for fs, model in cells:
        traces = {}

        def keep_trace(fold, fitted):
            if args.loss_trace and hasattr(fitted.model, "loss_trace") and model in ("ann", "cnn"):
                traces[fold] = fitted.model.loss_trace

        report = run_cv(datasets[fs], _spec(cfg, model), fs, cfg.k_folds, cfg.seed,
                        cfg.group_by_subject, on_fold=keep_trace)
        _write_report(report, out, traces)
        reports.append(report)
        m = report.means
        print(f"{DISPLAY[fs]:<10} {DISPLAY[model]:<4} sens {m['sensitivity']:.3f} "
              f"spec {m['specificity']:.3f} auc {m['auc']:.3f}")
        grid, tpr = plots.mean_roc([(f.fpr, f.tpr) for f in report.folds])
        curves[fs][f"{DISPLAY[model]} (AUC {m['auc']:.2f})"] = (grid, tpr)
        if args.save_model:
            ds = datasets[fs]
            X = ds.acoustic if fs == "acoustic" else ds.sequences
            if fs == "linguistic" and model not in ("ann", "cnn"):
                X = document_vectors(ds.sequences, ds.embedding)
            fitted = fit_pipeline(_spec(cfg, model), fs, X, ds.labels, ds.embedding, seed=cfg.seed)
            doc = model_to_dict(fitted.model, _spec(cfg, model).params)
            if fitted.standardizer is not None:
                doc["preprocessing"] = {"mean": fitted.standardizer.mean.tolist(),
                                        "scale": fitted.standardizer.scale.tolist()}
            (out / f"model_{fs}_{model}.json").write_text(json.dumps(doc) + "\n", encoding="utf-8")

    if args.svg:
        for fs, c in curves.items():
            (out / f"roc_{fs}.svg").write_text(plots.roc_svg(c, f"ROC, {DISPLAY[fs]} features"), encoding="utf-8")
    if args.all:
        table = results_table(reports)
        validate_table(table)
        (out / "table.json").write_text(json.dumps(table, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        (out / "table.csv").write_text(_display_table(table), encoding="utf-8")
        for fs, s in table["summary"].items():
            print(f"{DISPLAY[fs]}: best {DISPLAY[s['best_model']]} auc {s['best_auc']:.3f}, "
                  f"mean over models {s['mean_auc']:.3f}")
    return 0


def _display_table(table: dict) -> str:
    lines = ["Feature Set,Model,Sensitivity,Specificity,AUC"]
    prev = None
    for r in table["rows"]:
        fs = DISPLAY[r["feature_set"]] if r["feature_set"] != prev else ""
        prev = r["feature_set"]
        lines.append(f"{fs},{DISPLAY[r['model']]},{r['sensitivity']:.2f},{r['specificity']:.2f},{r['auc']:.2f}")
    return "\n".join(lines) + "\n"


def cmd_analyze_stats(args) -> int:
    cfg = _config(args)
    _, labels, names, X = read_features_csv(args.features_csv)
    tests = significance_report(X, labels, names, cfg.chi2_bins, cfg.alpha)
    out = Path(args.out) if args.out else _default_out("significance.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(significance_csv(tests), encoding="utf-8")
    sig = [t.feature for t in tests if t.significant]
    print(f"{len(sig)} of {len(tests)} features significant after Bonferroni -> {out}")
    for name in sig:
        print(f"  {name}")
    return 0


def cmd_analyze_lexical(args) -> int:
    manifest = load_manifest(args.manifest)
    texts = manifest.transcripts()
    pos = [t for t, r in zip(texts, manifest.rows) if r.label == 1]
    neg = [t for t, r in zip(texts, manifest.rows) if r.label == 0]
    scores = scaled_f_scores(pos, neg, STOPWORDS)
    out = Path(args.out) if args.out else _default_out("lexical.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(term_scores_csv(scores), encoding="utf-8")
    meta = {"stopwords_sha256": stopwords_digest(), "n_stopwords": len(STOPWORDS),
            "class_a": "suicidal (label 1)", "class_b": "non-suicidal (label 0)", "n_terms": len(scores)}
    out.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if args.svg:
        Path(args.svg).write_text(plots.term_scatter_svg(scores, "Suicidal (A) vs non-suicidal (B)"),
                                  encoding="utf-8")
    print(f"{len(scores)} terms scored -> {out}")
    for s in scores[:5]:
        print(f"  + {s.term} {s.association:+.3f}")
    for s in scores[-5:]:
        print(f"  - {s.term} {s.association:+.3f}")
    return 0


def cmd_show_config(args) -> int:
    print(_config(args).to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="speechsi", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="JSON file overriding pipeline defaults")
        if seed:
            sp.add_argument("--seed", type=int)

    s = sub.add_parser("synth", help="generate a synthetic labelled dataset")
    s.add_argument("--n", type=int, default=70)
    s.add_argument("--imbalance", type=float, default=6.0)
    s.add_argument("--sep", type=float, default=0.5, help="class separability in [0, 1]")
    s.add_argument("--min-duration", type=float, default=1.5)
    s.add_argument("--max-duration", type=float, default=2.5)
    s.add_argument("--sample-rate", type=int, default=16000)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("extract", help="acoustic feature CSV from a manifest")
    common(s)
    s.add_argument("--manifest", required=True)
    s.add_argument("--out")
    s.add_argument("--frame-size-ms", dest="frame_size_ms", type=float)
    s.add_argument("--frame-step-ms", dest="frame_step_ms", type=float)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("prep-text", help="vocabulary, padded sequences and embeddings")
    common(s)
    s.add_argument("--manifest", required=True)
    s.add_argument("--out")
    s.add_argument("--dim", dest="embedding_dim", type=int)
    s.add_argument("--embedding-epochs", dest="embedding_epochs", type=int)
    s.add_argument("--max-len", dest="max_len", type=int)
    s.set_defaults(func=cmd_prep_text)

    s = sub.add_parser("evaluate", help="stratified k-fold evaluation")
    common(s)
    s.add_argument("--manifest", required=True)
    s.add_argument("--features-csv")
    s.add_argument("--text-dir")
    s.add_argument("--model", choices=MODELS)
    s.add_argument("--features", choices=FEATURE_SETS)
    s.add_argument("--all", action="store_true", help="sweep all feature set x model cells")
    s.add_argument("--k", dest="k_folds", type=int)
    s.add_argument("--epochs", dest="nn_epochs", type=int, help="network training epochs")
    s.add_argument("--group-by-subject", action="store_true")
    s.add_argument("--no-class-weights", action="store_true")
    s.add_argument("--loss-trace", action="store_true", help="write per-epoch network loss CSVs")
    s.add_argument("--svg", action="store_true", help="write ROC plots")
    s.add_argument("--save-model", action="store_true", help="also fit on all data and write model JSON")
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("analyze", help="exploratory analyses")
    asub = a.add_subparsers(dest="analysis", required=True)
    s = asub.add_parser("stats", help="chi-square + Bonferroni per acoustic feature")
    common(s, seed=False)
    s.add_argument("--features-csv", required=True)
    s.add_argument("--bins", dest="chi2_bins", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_analyze_stats)
    s = asub.add_parser("lexical", help="scaled F-score term association")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out")
    s.add_argument("--svg")
    s.set_defaults(func=cmd_analyze_lexical)

    s = sub.add_parser("show-config", help="print the effective configuration")
    common(s)
    s.set_defaults(func=cmd_show_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (SpeechSIError, ValueError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
