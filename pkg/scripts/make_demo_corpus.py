#!/usr/bin/env python3
"""Regenerate the shipped synthetic demo corpus (data/demo_corpus).

The corpus is deterministic in the seed, so re-running this script
reproduces the checked-in files byte for byte.
"""

import argparse
from pathlib import Path

from pdfabstract.synthetic import write_corpus

REPO_ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(REPO_ROOT / "data" / "demo_corpus"))
    parser.add_argument("--truth", default=str(REPO_ROOT / "data" / "demo_corpus_truth.csv"))
    parser.add_argument("--docs", type=int, default=20)
    parser.add_argument("--seed", type=int, default=2)
    args = parser.parse_args()
    truths = write_corpus(args.out, args.docs, seed=args.seed, truth_path=args.truth)
    print(f"wrote {len(truths)} reports to {args.out}")
    print(f"wrote planted truth to {args.truth}")


if __name__ == "__main__":
    main()
