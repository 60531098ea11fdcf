#!/usr/bin/env python3
"""Non-inferiority benchmark on synthetic paired outcomes.

Builds paired correct/incorrect outcomes matching given marginal accuracies
over n datapoints (maximal overlap between the correct sets, the most
favorable pairing), then prints the McNemar test and the non-inferiority
verdict of the candidate against each comparator.

Defaults mirror the shipped benchmark configuration: a candidate at 94.2%
(and a degraded variant at 88.7%) against three comparators at 94.7%, 97.8%
and 96.4% over 2786 datapoints, margin -10%, alpha 0.025.
"""

import argparse

from pdfabstract.evaluation import PairedOutcomes, mcnemar, noninferiority


def paired_from_marginals(correct_a: int, correct_b: int, n: int) -> PairedOutcomes:
    overlap = min(correct_a, correct_b)
    return PairedOutcomes(
        n11=overlap,
        n10=correct_a - overlap,
        n01=correct_b - overlap,
        n00=n - correct_a - correct_b + overlap,
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=2786)
    parser.add_argument("--candidates", type=float, nargs="+", default=[0.942, 0.887])
    parser.add_argument("--comparators", type=float, nargs="+",
                        default=[0.947, 0.978, 0.964])
    parser.add_argument("--margin", type=float, default=-0.10)
    parser.add_argument("--alpha", type=float, default=0.025)
    args = parser.parse_args()

    for cand in args.candidates:
        correct_a = round(cand * args.n)
        print(f"candidate accuracy {100 * correct_a / args.n:.1f}% "
              f"({correct_a}/{args.n}), margin {100 * args.margin:+.0f}%, "
              f"alpha {args.alpha}")
        for comp in args.comparators:
            correct_b = round(comp * args.n)
            outcomes = paired_from_marginals(correct_a, correct_b, args.n)
            result = noninferiority(outcomes, margin=args.margin, alpha=args.alpha)
            try:
                statistic, p = mcnemar(outcomes)
                mcnemar_text = f"McNemar {statistic:.3f} (p = {p:.3g})"
            except Exception:
                mcnemar_text = "McNemar undefined (no discordant pairs)"
            verdict = "non-inferior" if result.non_inferior else "NOT non-inferior"
            print(f"  vs {100 * correct_b / args.n:.1f}%: diff {100 * result.diff:+.2f}% "
                  f"({100 * (1 - args.alpha):g}% CI, {100 * result.ci_lower:+.2f} to "
                  f"{100 * result.ci_upper:+.2f}%), {mcnemar_text} -> {verdict}")
        print()


if __name__ == "__main__":
    main()
