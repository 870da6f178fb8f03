"""How often chi-square + Bonferroni flags any acoustic feature when classes are identical.

    python scripts/null_calibration.py --runs 100
"""

import argparse

import numpy as np

from speechsi.exploratory import significance_report
from speechsi.features import FEATURE_NAMES, extract_features
from speechsi.synth import SynthConfig, class_counts, synth_audio


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--n", type=int, default=70)
    ap.add_argument("--sep", type=float, default=0.0)
    args = ap.parse_args()

    cfg = SynthConfig(separability=args.sep)
    n_pos, n_neg = class_counts(args.n, cfg.imbalance)
    labels = np.r_[np.ones(n_pos, int), np.zeros(n_neg, int)]
    hits = 0
    for seed in range(args.runs):
        rng = np.random.default_rng(seed)
        X = np.array([extract_features(synth_audio(int(l), cfg, rng)).values for l in labels])
        flagged = [t.feature for t in significance_report(X, labels, FEATURE_NAMES) if t.significant]
        hits += bool(flagged)
        if flagged:
            print(f"seed {seed}: {', '.join(flagged)}")
    print(f"{args.runs - hits} of {args.runs} runs flagged nothing")


if __name__ == "__main__":
    main()
