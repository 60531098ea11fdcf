"""Consensus ground truth and the statistical comparison harness.

Implements the benchmark protocol: three-abstractor consensus with
escalation, accuracy with Wilson score intervals, McNemar's test on paired
correct/incorrect outcomes, paired-difference non-inferiority at a
configurable margin, and paired t-tests on per-report times.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from scipy import stats

UNRESOLVED = "Unresolved"


class WrongArityError(Exception):
    """Consensus needs exactly three abstractor responses per datapoint."""


class LengthMismatchError(Exception):
    """Compared sequences are not aligned (or are empty)."""


class UnresolvedTruthError(Exception):
    """Ground truth still contains unresolved cells."""


class NoDiscordantPairsError(Exception):
    """McNemar's test is undefined when no rater disagrees with the other."""


class TooFewSamplesError(Exception):
    """A confidence interval on a mean needs at least two samples."""


# --------------------------------------------------------------------------
# Consensus ground truth
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GroundTruthCell:
    doc_id: str
    variable: str
    truth: str
    provenance: str  # unanimous | majority | adjudicated | fourth-reviewer


def consensus(doc_id: str, variable: str, values: Sequence[str]) -> GroundTruthCell:
    """Resolve three abstractor answers for one datapoint.

    Unanimity wins outright; a 2-vs-1 split yields the majority value
    flagged ``majority`` (for downstream re-examination); full disagreement
    yields ``Unresolved`` flagged ``fourth-reviewer``. Invariant under
    permutation of the abstractors.
    """
    if len(values) != 3:
        raise WrongArityError(f"{doc_id}/{variable}: expected 3 responses, got {len(values)}")
    a, b, c = values
    if a == b == c:
        return GroundTruthCell(doc_id, variable, a, "unanimous")
    for candidate in (a, b, c):
        if sum(candidate == v for v in values) == 2:
            return GroundTruthCell(doc_id, variable, candidate, "majority")
    return GroundTruthCell(doc_id, variable, UNRESOLVED, "fourth-reviewer")


# --------------------------------------------------------------------------
# Accuracy and intervals
# --------------------------------------------------------------------------

def wilson_ci(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise LengthMismatchError("cannot form an interval over zero trials")
    z = stats.norm.ppf((1.0 + confidence) / 2.0)
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2.0 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom
    # clamp away sub-ulp rounding so the interval stays in [0,1] around phat
    return (min(max(center - half, 0.0), phat), max(min(center + half, 1.0), phat))


def accuracy(predicted: Sequence, truth: Sequence,
             confidence: float = 0.95) -> tuple[float, tuple[float, float]]:
    """Exact-match proportion with a Wilson interval.

    ``NotReported`` matches only ``NotReported``; truth must be fully
    resolved.
    """
    if len(predicted) != len(truth) or not truth:
        raise LengthMismatchError(f"predicted {len(predicted)} vs truth {len(truth)} datapoints")
    if any(t == UNRESOLVED for t in truth):
        raise UnresolvedTruthError("truth contains Unresolved cells")
    correct = sum(p == t for p, t in zip(predicted, truth))
    return correct / len(truth), wilson_ci(correct, len(truth), confidence)


@dataclass(frozen=True)
class PairedOutcomes:
    """2x2 correct/incorrect cross-classification of two raters on shared data."""

    n11: int  # both correct
    n10: int  # A correct, B wrong
    n01: int  # B correct, A wrong
    n00: int  # both wrong

    @property
    def n(self) -> int:
        return self.n11 + self.n10 + self.n01 + self.n00


def paired_outcomes(a: Sequence, b: Sequence, truth: Sequence) -> PairedOutcomes:
    if not (len(a) == len(b) == len(truth)) or not truth:
        raise LengthMismatchError("prediction/truth lists are not aligned")
    n11 = n10 = n01 = n00 = 0
    for pa, pb, t in zip(a, b, truth):
        ca, cb = pa == t, pb == t
        if ca and cb:
            n11 += 1
        elif ca:
            n10 += 1
        elif cb:
            n01 += 1
        else:
            n00 += 1
    return PairedOutcomes(n11, n10, n01, n00)


def mcnemar(p: PairedOutcomes) -> tuple[float, float]:
    """McNemar's test on the discordant pairs.

    The statistic is the continuity-corrected chi-square value
    ``(|n10-n01|-1)^2 / (n10+n01)``. With >= 25 discordant pairs the p-value
    comes from the chi-square(1) tail; below that, from the exact two-sided
    binomial test of n10 against Binomial(n10+n01, 1/2).
    """
    discordant = p.n10 + p.n01
    if discordant == 0:
        raise NoDiscordantPairsError("no discordant pairs; McNemar's test undefined")
    statistic = (abs(p.n10 - p.n01) - 1.0) ** 2 / discordant
    if discordant >= 25:
        p_value = float(stats.chi2.sf(statistic, df=1))
    else:
        p_value = float(stats.binomtest(p.n10, discordant, 0.5).pvalue)
    return statistic, p_value


@dataclass(frozen=True)
class NonInferiorityResult:
    diff: float       # accuracy(A) - accuracy(B) over the same datapoints
    ci_lower: float
    ci_upper: float
    non_inferior: bool
    margin: float
    alpha: float


def noninferiority(p: PairedOutcomes, margin: float = -0.10,
                   alpha: float = 0.025) -> NonInferiorityResult:
    """Paired-difference non-inferiority via a two-sided (1-alpha) Wald CI.

    diff = (n10 - n01) / n; A is non-inferior to B when the lower confidence
    bound exceeds the margin.
    """
    n = p.n
    if n < 1:
        raise LengthMismatchError("no datapoints")
    z = stats.norm.ppf(1.0 - alpha / 2.0)
    diff = (p.n10 - p.n01) / n
    se = math.sqrt(max((p.n10 + p.n01) - (p.n10 - p.n01) ** 2 / n, 0.0)) / n
    lower, upper = diff - z * se, diff + z * se
    return NonInferiorityResult(diff=diff, ci_lower=lower, ci_upper=upper,
                                non_inferior=lower > margin, margin=margin, alpha=alpha)


# --------------------------------------------------------------------------
# Timing statistics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PairedTResult:
    t: float          # NaN on the zero-variance path
    df: int
    p: float          # NaN on the zero-variance path
    mean_diff: float
    ci_lower: float
    ci_upper: float
    zero_variance: bool = False


def paired_t_test(times_a: Sequence[float], times_b: Sequence[float]) -> PairedTResult:
    """Two-sided paired Student's t-test on per-document differences.

    When every difference is identical there is no t statistic to form; the
    result reports the exact common difference with ``zero_variance`` set.
    """
    if len(times_a) != len(times_b) or len(times_a) < 2:
        raise LengthMismatchError("need two aligned samples of length >= 2")
    diffs = [a - b for a, b in zip(times_a, times_b)]
    n = len(diffs)
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        return PairedTResult(t=math.nan, df=n - 1, p=math.nan, mean_diff=mean,
                             ci_lower=mean, ci_upper=mean, zero_variance=True)
    se = math.sqrt(var / n)
    t_stat = mean / se
    p = 2.0 * float(stats.t.sf(abs(t_stat), df=n - 1))
    half = float(stats.t.ppf(0.975, df=n - 1)) * se
    return PairedTResult(t=t_stat, df=n - 1, p=p, mean_diff=mean,
                         ci_lower=mean - half, ci_upper=mean + half)


def mean_ci(times: Sequence[float], confidence: float = 0.95) -> tuple[float, tuple[float, float]]:
    """Sample mean with a t-distribution confidence interval."""
    n = len(times)
    if n < 2:
        raise TooFewSamplesError("need at least 2 samples")
    mean = sum(times) / n
    var = sum((x - mean) ** 2 for x in times) / (n - 1)
    half = float(stats.t.ppf((1.0 + confidence) / 2.0, df=n - 1)) * math.sqrt(var / n)
    return mean, (mean - half, mean + half)


# --------------------------------------------------------------------------
# Evaluation report
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RaterAccuracy:
    rater: str
    n: int
    correct: int
    proportion: float
    ci_lower: float
    ci_upper: float


@dataclass(frozen=True)
class ComparisonResult:
    candidate: str
    comparator: str
    outcomes: PairedOutcomes
    mcnemar_statistic: float | None
    mcnemar_p: float | None
    noninferiority: NonInferiorityResult


@dataclass(frozen=True)
class TimingSummary:
    rater: str
    n: int
    mean: float
    ci_lower: float
    ci_upper: float


@dataclass(frozen=True)
class TimingComparison:
    a: str
    b: str
    result: PairedTResult


@dataclass
class EvalReport:
    overall: list[RaterAccuracy] = field(default_factory=list)
    per_variable: list[tuple[str, RaterAccuracy]] = field(default_factory=list)  # (variable, acc)
    comparisons: list[ComparisonResult] = field(default_factory=list)
    timings: list[TimingSummary] = field(default_factory=list)
    timing_tests: list[TimingComparison] = field(default_factory=list)
    excluded: list[tuple[str, str]] = field(default_factory=list)  # unresolved (doc, variable)

    def accuracy_line(self, acc: RaterAccuracy) -> str:
        return (f"{acc.rater}: accuracy {100 * acc.proportion:.1f}% "
                f"(95% CI, {100 * acc.ci_lower:.1f} to {100 * acc.ci_upper:.1f}%)"
                f" [{acc.correct}/{acc.n}]")

    def to_text(self) -> str:
        lines = ["Overall accuracy", "----------------"]
        lines += [self.accuracy_line(a) for a in self.overall]
        if self.excluded:
            lines.append(f"(excluded {len(self.excluded)} unresolved datapoint(s))")
        if self.per_variable:
            lines += ["", "Per-variable accuracy", "---------------------"]
            for variable, acc in self.per_variable:
                lines.append(f"{variable} / {self.accuracy_line(acc)}")
        if self.comparisons:
            lines += ["", "Paired comparisons", "------------------"]
            for comp in self.comparisons:
                o = comp.outcomes
                ni = comp.noninferiority
                lines.append(
                    f"{comp.candidate} vs {comp.comparator}: "
                    f"n11={o.n11} n10={o.n10} n01={o.n01} n00={o.n00}"
                )
                if comp.mcnemar_p is not None:
                    lines.append(f"  McNemar statistic {comp.mcnemar_statistic:.4f}, p = {comp.mcnemar_p:.4g}")
                else:
                    lines.append("  McNemar: no discordant pairs")
                verdict = "non-inferior" if ni.non_inferior else "NOT non-inferior"
                lines.append(
                    f"  diff {100 * ni.diff:+.2f}% ({100 * (1 - ni.alpha):g}% CI, "
                    f"{100 * ni.ci_lower:+.2f} to {100 * ni.ci_upper:+.2f}%), "
                    f"margin {100 * ni.margin:+.0f}% -> {verdict}"
                )
        if self.timings:
            lines += ["", "Abstraction time per report", "---------------------------"]
            for t in self.timings:
                lines.append(f"{t.rater}: mean {t.mean:.1f} s "
                             f"(95% CI, {t.ci_lower:.1f} to {t.ci_upper:.1f} s) [n={t.n}]")
        if self.timing_tests:
            lines += ["", "Paired t-tests on times", "-----------------------"]
            for tt in self.timing_tests:
                r = tt.result
                if r.zero_variance:
                    lines.append(f"{tt.a} vs {tt.b}: all differences identical "
                                 f"(mean diff {r.mean_diff:.3f} s); no t statistic")
                else:
                    lines.append(f"{tt.a} vs {tt.b}: t = {r.t:.3f}, df = {r.df}, "
                                 f"p = {r.p:.4g}, mean diff {r.mean_diff:.2f} s "
                                 f"(95% CI, {r.ci_lower:.2f} to {r.ci_upper:.2f})")
        return "\n".join(lines) + "\n"

    def stat_rows(self) -> list[list[str]]:
        """Every reported statistic as (section, subject, metric, value) rows."""
        rows: list[list[str]] = []
        for a in self.overall:
            rows += [["overall", a.rater, "n", str(a.n)],
                     ["overall", a.rater, "correct", str(a.correct)],
                     ["overall", a.rater, "accuracy", f"{a.proportion:.6f}"],
                     ["overall", a.rater, "ci_lower", f"{a.ci_lower:.6f}"],
                     ["overall", a.rater, "ci_upper", f"{a.ci_upper:.6f}"]]
        for variable, a in self.per_variable:
            subject = f"{a.rater}/{variable}"
            rows += [["per_variable", subject, "accuracy", f"{a.proportion:.6f}"],
                     ["per_variable", subject, "ci_lower", f"{a.ci_lower:.6f}"],
                     ["per_variable", subject, "ci_upper", f"{a.ci_upper:.6f}"]]
        for comp in self.comparisons:
            subject = f"{comp.candidate} vs {comp.comparator}"
            o, ni = comp.outcomes, comp.noninferiority
            rows += [["comparison", subject, "n11", str(o.n11)],
                     ["comparison", subject, "n10", str(o.n10)],
                     ["comparison", subject, "n01", str(o.n01)],
                     ["comparison", subject, "n00", str(o.n00)],
                     ["comparison", subject, "diff", f"{ni.diff:.6f}"],
                     ["comparison", subject, "diff_ci_lower", f"{ni.ci_lower:.6f}"],
                     ["comparison", subject, "diff_ci_upper", f"{ni.ci_upper:.6f}"],
                     ["comparison", subject, "margin", f"{ni.margin:.6f}"],
                     ["comparison", subject, "alpha", f"{ni.alpha:.6f}"],
                     ["comparison", subject, "non_inferior", str(ni.non_inferior).lower()]]
            if comp.mcnemar_p is not None:
                rows += [["comparison", subject, "mcnemar_statistic", f"{comp.mcnemar_statistic:.6f}"],
                         ["comparison", subject, "mcnemar_p", f"{comp.mcnemar_p:.6g}"]]
        for t in self.timings:
            rows += [["timing", t.rater, "mean_seconds", f"{t.mean:.6f}"],
                     ["timing", t.rater, "ci_lower", f"{t.ci_lower:.6f}"],
                     ["timing", t.rater, "ci_upper", f"{t.ci_upper:.6f}"]]
        for tt in self.timing_tests:
            subject = f"{tt.a} vs {tt.b}"
            r = tt.result
            rows += [["timing_test", subject, "mean_diff", f"{r.mean_diff:.6f}"],
                     ["timing_test", subject, "zero_variance", str(r.zero_variance).lower()]]
            if not r.zero_variance:
                rows += [["timing_test", subject, "t", f"{r.t:.6f}"],
                         ["timing_test", subject, "df", str(r.df)],
                         ["timing_test", subject, "p", f"{r.p:.6g}"]]
        return rows

    def ci_rows(self) -> list[list[str]]:
        """Per-comparison difference CIs, ready for external plotting."""
        rows = []
        for comp in self.comparisons:
            ni = comp.noninferiority
            rows.append([f"{comp.candidate} vs {comp.comparator}",
                         f"{ni.diff:.6f}", f"{ni.ci_lower:.6f}", f"{ni.ci_upper:.6f}",
                         f"{ni.margin:.6f}", str(ni.non_inferior).lower()])
        return rows

    def write_files(self, prefix: str | Path) -> list[Path]:
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        text_path = prefix.with_suffix(".txt")
        stats_path = prefix.with_suffix(".stats.csv")
        ci_path = prefix.with_suffix(".ci.csv")
        text_path.write_text(self.to_text(), encoding="utf-8")
        with open(stats_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["section", "subject", "metric", "value"])
            writer.writerows(self.stat_rows())
        with open(ci_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["comparison", "diff", "ci_lower", "ci_upper", "margin", "non_inferior"])
            writer.writerows(self.ci_rows())
        return [text_path, stats_path, ci_path]


# --------------------------------------------------------------------------
# Input files
# --------------------------------------------------------------------------

def read_abstractor_csv(path: str | Path) -> tuple[str, dict[tuple[str, str], str], dict[str, float]]:
    """Read one abstractor-response CSV.

    Columns: abstractor_id, doc_id, variable, value, elapsed_seconds (elapsed
    is per report and may be blank). Returns (abstractor_id, cell values
    keyed by (doc_id, variable), per-doc elapsed seconds).
    """
    values: dict[tuple[str, str], str] = {}
    elapsed: dict[str, float] = {}
    rater = ""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"abstractor_id", "doc_id", "variable", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            rater = row["abstractor_id"] or rater
            values[(row["doc_id"], row["variable"])] = row["value"]
            cell = (row.get("elapsed_seconds") or "").strip()
            if cell:
                elapsed[row["doc_id"]] = float(cell)
    if not values:
        raise ValueError(f"{path}: no responses found")
    return rater or Path(path).stem, values, elapsed


def read_predictions_csv(path: str | Path) -> tuple[dict[tuple[str, str], str], dict[str, float]]:
    """Read a wide extraction-output CSV (doc_id, variables..., elapsed_seconds).

    Returns cell strings keyed by (doc_id, variable), plus per-doc elapsed
    seconds.
    """
    values: dict[tuple[str, str], str] = {}
    elapsed: dict[str, float] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "doc_id" or header[-1] != "elapsed_seconds" or len(header) < 3:
            raise ValueError(f"{path}: expected header doc_id,<variables...>,elapsed_seconds")
        variables = header[1:-1]
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: row width {len(row)} != header width {len(header)}")
            doc_id = row[0]
            for variable, cell in zip(variables, row[1:-1]):
                values[(doc_id, variable)] = cell
            elapsed[doc_id] = float(row[-1])
    if not values:
        raise ValueError(f"{path}: no prediction rows found")
    return values, elapsed


def read_truth_csv(path: str | Path) -> dict[tuple[str, str], str]:
    """Read a (doc_id, variable, truth) CSV, as used for overrides and
    direct-mode ground truth."""
    cells: dict[tuple[str, str], str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"doc_id", "variable", "truth"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            cells[(row["doc_id"], row["variable"])] = row["truth"]
    if not cells:
        raise ValueError(f"{path}: no truth cells found")
    return cells


def build_ground_truth(
    abstractors: Sequence[dict[tuple[str, str], str]],
    overrides: dict[tuple[str, str], str] | None = None,
) -> tuple[dict[tuple[str, str], GroundTruthCell], list[tuple[str, str]]]:
    """Consensus over three aligned abstractor response maps, plus optional
    adjudication overrides. Returns (cells, still-unresolved keys)."""
    if len(abstractors) != 3:
        raise WrongArityError(f"consensus needs exactly 3 abstractor files, got {len(abstractors)}")
    keys = set(abstractors[0])
    for other in abstractors[1:]:
        if set(other) != keys:
            raise LengthMismatchError("abstractor files do not cover the same datapoints")
    overrides = overrides or {}
    cells: dict[tuple[str, str], GroundTruthCell] = {}
    unresolved: list[tuple[str, str]] = []
    for doc_id, variable in sorted(keys):
        cell = consensus(doc_id, variable, [a[(doc_id, variable)] for a in abstractors])
        if (doc_id, variable) in overrides:
            cell = GroundTruthCell(doc_id, variable, overrides[(doc_id, variable)], "adjudicated")
        if cell.truth == UNRESOLVED:
            unresolved.append((doc_id, variable))
        cells[(doc_id, variable)] = cell
    return cells, unresolved


def summarize_accuracy(
    rater: str,
    predictions: dict[tuple[str, str], str],
    truth: dict[tuple[str, str], str],
) -> RaterAccuracy:
    keys = sorted(truth)
    predicted = [predictions.get(k, "") for k in keys]
    actual = [truth[k] for k in keys]
    proportion, (lo, hi) = accuracy(predicted, actual)
    correct = sum(p == t for p, t in zip(predicted, actual))
    return RaterAccuracy(rater=rater, n=len(keys), correct=correct,
                         proportion=proportion, ci_lower=lo, ci_upper=hi)


def per_variable_accuracy(
    rater: str,
    predictions: dict[tuple[str, str], str],
    truth: dict[tuple[str, str], str],
) -> list[tuple[str, RaterAccuracy]]:
    by_variable: dict[str, list[tuple[str, str]]] = defaultdict(list)
    for (doc_id, variable), value in sorted(truth.items()):
        by_variable[variable].append((predictions.get((doc_id, variable), ""), value))
    out = []
    for variable, pairs in by_variable.items():
        predicted = [p for p, _ in pairs]
        actual = [t for _, t in pairs]
        proportion, (lo, hi) = accuracy(predicted, actual)
        correct = sum(p == t for p, t in zip(predicted, actual))
        out.append((variable, RaterAccuracy(rater=rater, n=len(pairs), correct=correct,
                                            proportion=proportion, ci_lower=lo, ci_upper=hi)))
    return out


def compare_raters(
    candidate: str, a: dict[tuple[str, str], str],
    comparator: str, b: dict[tuple[str, str], str],
    truth: dict[tuple[str, str], str],
    margin: float = -0.10, alpha: float = 0.025,
) -> ComparisonResult:
    keys = sorted(truth)
    outcomes = paired_outcomes([a.get(k, "") for k in keys],
                               [b.get(k, "") for k in keys],
                               [truth[k] for k in keys])
    try:
        statistic, p_value = mcnemar(outcomes)
    except NoDiscordantPairsError:
        statistic, p_value = None, None
    return ComparisonResult(candidate=candidate, comparator=comparator, outcomes=outcomes,
                            mcnemar_statistic=statistic, mcnemar_p=p_value,
                            noninferiority=noninferiority(outcomes, margin=margin, alpha=alpha))
