"""Mean 5-fold AUC of acoustic logistic regression as class separability grows.

    python scripts/separability_sweep.py --eps 0 0.25 0.5 0.75 1 --seeds 1 2 3
"""

import argparse
import tempfile
from pathlib import Path

import numpy as np

from speechsi.config import PipelineConfig
from speechsi.evaluation import ModelSpec, run_cv
from speechsi.pipeline import assemble_dataset, extract_manifest, features_csv
from speechsi.synth import SynthConfig, synth_dataset


def acoustic_dataset(eps, seed, n, workdir):
    root = Path(workdir) / f"eps{eps}_seed{seed}"
    manifest = synth_dataset(SynthConfig(n_recordings=n, separability=eps, seed=seed), root)
    rows, _ = extract_manifest(manifest, PipelineConfig(seed=seed))
    (root / "features.csv").write_text(features_csv(rows))
    return assemble_dataset(manifest, features_path=root / "features.csv")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.0, 0.25, 0.5, 0.75, 1.0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--n", type=int, default=210)
    ap.add_argument("--model", default="lr")
    ap.add_argument("--tolerance", type=float, default=0.03)
    args = ap.parse_args()

    cfg = PipelineConfig()
    means = []
    with tempfile.TemporaryDirectory() as tmp:
        print("eps    auc    sens   spec")
        for eps in args.eps:
            runs = []
            for seed in args.seeds:
                ds = acoustic_dataset(eps, seed, args.n, tmp)
                spec = ModelSpec(args.model, cfg.model_params(args.model), True, cfg.nn_dtype)
                m = run_cv(ds, spec, "acoustic", cfg.k_folds, seed).means
                runs.append([m["auc"], m["sensitivity"], m["specificity"]])
            a, s, p = np.mean(runs, axis=0)
            means.append(a)
            print(f"{eps:<6.2f} {a:.3f}  {s:.3f}  {p:.3f}")
    drops = [b - a for a, b in zip(means, means[1:])]
    ok = all(d >= -args.tolerance for d in drops)
    print(f"non-decreasing within {args.tolerance}: {'yes' if ok else 'no'}")


if __name__ == "__main__":
    main()
