"""End-to-end experiment: simulate a corpus, evaluate every estimator kind
with leave-one-user-out CV, and emit the comparison table.

Equivalent to chaining the CLI stages; kept as one script for convenience:

    python scripts/run_experiment.py --out runs/demo --seed 3 --rounds 9
"""

import argparse
import subprocess
import sys
from pathlib import Path

ALL_KINDS = (
    "baseline1,baseline2,baseline3,logistic,baseline-nn,pattern-baseline-nn,"
    "nn,pattern-nn,pattern-sessional-nn,pattern-category-nn"
)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=3)
    parser.add_argument("--rounds", type=int, default=9)
    parser.add_argument("--kinds", default=ALL_KINDS)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()

    out = Path(args.out)
    stages = [
        ["simulate", "--out", str(out / "corpus"), "--seed", str(args.seed)],
        ["features", "--corpus", str(out / "corpus"), "--out", str(out / "features")],
        [
            "evaluate", "--corpus", str(out / "corpus"), "--out", str(out / "eval"),
            "--features", str(out / "features"), "--kinds", args.kinds,
            "--rounds", str(args.rounds), "--seed", "11", "--threads", str(args.threads),
        ],
        ["compare", "--eval", str(out / "eval"), "--out", str(out / "compare")],
    ]
    for stage in stages:
        print(f"==> readmeter {' '.join(stage)}", flush=True)
        result = subprocess.run([sys.executable, "-m", "readmeter.cli", *stage])
        if result.returncode != 0:
            return result.returncode
    print(f"done; see {out / 'compare' / 'table.txt'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
