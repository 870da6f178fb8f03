"""Synthesise a dataset and run the full feature-set x model grid through the CLI.

    python scripts/table_grid.py --n 210 --sep 0.5 --seed 1 --out runs/grid
"""

import argparse
from pathlib import Path

from speechsi.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=210)
    ap.add_argument("--sep", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--epochs", type=int, help="network epochs (default from config)")
    ap.add_argument("--out", type=Path, default=Path("runs/grid"))
    args = ap.parse_args()

    data = args.out / "data"
    seed = str(args.seed)
    steps = [
        ["synth", "--n", str(args.n), "--sep", str(args.sep), "--seed", seed, "--out", str(data)],
        ["extract", "--manifest", str(data / "manifest.csv"), "--out", str(args.out / "features.csv")],
        ["prep-text", "--manifest", str(data / "manifest.csv"), "--out", str(args.out / "text"), "--seed", seed],
        ["evaluate", "--manifest", str(data / "manifest.csv"), "--features-csv", str(args.out / "features.csv"),
         "--text-dir", str(args.out / "text"), "--all", "--svg", "--seed", seed, "--out", str(args.out / "reports")]
        + (["--epochs", str(args.epochs)] if args.epochs else []),
        ["analyze", "stats", "--features-csv", str(args.out / "features.csv"),
         "--out", str(args.out / "significance.csv")],
        ["analyze", "lexical", "--manifest", str(data / "manifest.csv"), "--out", str(args.out / "lexical.csv"),
         "--svg", str(args.out / "lexical.svg")],
    ]
    for argv in steps:
        code = cli(argv)
        if code:
            raise SystemExit(code)
    print((args.out / "reports" / "table.csv").read_text())


if __name__ == "__main__":
    main()
