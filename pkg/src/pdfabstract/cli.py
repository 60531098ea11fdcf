"""Command-line interface: extract, evaluate, compare.

Configuration comes from a simple ``key = value`` file plus flag overrides;
API keys are only ever read from environment variables.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import evaluation as ev
from .chunking import ChunkingConfig
from .completion import BackendConfig
from .corpus import EmptyCorpusError, load_corpus
from .pipeline import RunConfig, run_extraction
from .prompting import default_template, load_template
from .schema import default_schema, check_gleason_coherence, load_schema_file, write_table


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        values[key.strip()] = value.strip()
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdfabstract",
        description="Schema-driven zero-shot data abstraction from PDF/text reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="run the extraction pipeline over an input folder")
    ex.add_argument("--config", help="key = value configuration file")
    ex.add_argument("--input", help="input directory of *.pdf / *.txt files")
    ex.add_argument("--output", help="output CSV path")
    ex.add_argument("--schema", help="schema override file")
    ex.add_argument("--template", help="prompt template override file")
    ex.add_argument("--backend", choices=["remote-api", "mock-rules"])
    ex.add_argument("--model", help="remote completion model name")
    ex.add_argument("--k", type=int, help="retrieved chunks per query (default 5)")
    ex.add_argument("--chunk-words", type=int, help="words per chunk (default 200)")
    ex.add_argument("--overlap", type=int, help="overlapping words between chunks (default 50)")
    ex.add_argument("--concurrency", type=int, help="parallel document workers (default 4)")
    ex.add_argument("--seed", type=int, help="seed for retry-jitter reproducibility")
    ex.add_argument("--xlsx", help="also write a spreadsheet copy to this path")
    ex.add_argument("--paper-mode", action="store_true",
                    help="pin documented defaults: k=5, 200/50 chunking, default schema and prompts")

    ev_p = sub.add_parser("evaluate", help="score predictions against consensus or direct ground truth")
    ev_p.add_argument("predictions", help="extraction output CSV")
    ev_p.add_argument("abstractors", nargs="*",
                      help="three abstractor-response CSVs (consensus mode)")
    ev_p.add_argument("--truth", help="direct-mode ground truth CSV (doc_id, variable, truth)")
    ev_p.add_argument("--overrides", help="adjudication overrides CSV (doc_id, variable, truth)")
    ev_p.add_argument("--output", help="report file prefix (writes .txt, .stats.csv, .ci.csv)")
    ev_p.add_argument("--margin", type=float, default=-0.10)
    ev_p.add_argument("--alpha", type=float, default=0.025)

    cmp_p = sub.add_parser("compare", help="paired comparison of two prediction files")
    cmp_p.add_argument("predictions_a")
    cmp_p.add_argument("predictions_b")
    cmp_p.add_argument("truth", help="ground truth CSV (doc_id, variable, truth)")
    cmp_p.add_argument("--margin", type=float, default=-0.10)
    cmp_p.add_argument("--alpha", type=float, default=0.025)
    cmp_p.add_argument("--label-a", default=None, help="display name for the first file")
    cmp_p.add_argument("--label-b", default=None, help="display name for the second file")
    return parser


def _setting(args: argparse.Namespace, config: dict[str, str], key: str,
             default, convert=str):
    flag_value = getattr(args, key.replace("-", "_"), None)
    if flag_value is not None:
        return flag_value
    if key in config:
        return convert(config[key])
    return default


def _build_run_config(args: argparse.Namespace) -> RunConfig:
    config = read_config_file(args.config) if args.config else {}
    input_dir = _setting(args, config, "input", None)
    output = _setting(args, config, "output", None)
    if not input_dir or not output:
        raise ValueError("extract needs --input and --output (flags or config file)")
    backend = BackendConfig(
        kind=_setting(args, config, "backend", "mock-rules"),
        endpoint=config.get("endpoint"),
        api_key_env=config.get("api_key_env"),
        model_name=_setting(args, config, "model", "text-davinci-003"),
        max_retries=int(config.get("max_retries", 3)),
        timeout=float(config.get("timeout", 60.0)),
        requests_per_minute=float(config.get("rpm", 60.0)),
    )
    chunking = ChunkingConfig(
        words_per_chunk=_setting(args, config, "chunk_words", 200, int),
        overlap_words=_setting(args, config, "overlap", 50, int),
    )
    cfg = RunConfig(
        input_dir=input_dir,
        output_path=output,
        backend=backend,
        chunking=chunking,
        schema_file=_setting(args, config, "schema", None),
        template_file=_setting(args, config, "template", None),
        k=_setting(args, config, "k", 5, int),
        concurrency=_setting(args, config, "concurrency", 4, int),
        seed=_setting(args, config, "seed", 0, int),
        embed_endpoint=config.get("embed_endpoint"),
        embed_dim=int(config.get("embed_dim", 512)),
        xlsx_path=_setting(args, config, "xlsx", None),
    )
    if args.paper_mode:
        cfg.k = 5
        cfg.chunking = ChunkingConfig(words_per_chunk=200, overlap_words=50)
        cfg.schema_file = None
        cfg.template_file = None
    return cfg


def cmd_extract(args: argparse.Namespace) -> int:
    try:
        cfg = _build_run_config(args)
        schema = load_schema_file(cfg.schema_file) if cfg.schema_file else default_schema()
        template = load_template(cfg.template_file) if cfg.template_file else default_template()
        corpus = load_corpus(cfg.input_dir)
    except (ValueError, FileNotFoundError, EmptyCorpusError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    records, failures = run_extraction(corpus, schema, template, cfg)
    if not records:
        print("error: extraction failed for every document", file=sys.stderr)
        return 2
    for warning in check_gleason_coherence(records):
        print(f"WARN {warning}", file=sys.stderr)
    write_table(records, cfg.output_path, spreadsheet_path=cfg.xlsx_path)
    failed = len(failures) + len(corpus.skipped)
    mean_elapsed = sum(r.elapsed for r in records) / len(records)
    print(f"processed {len(records)} documents, {failed} failures, "
          f"mean {mean_elapsed:.1f} s/report -> {cfg.output_path}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        predictions, elapsed = ev.read_predictions_csv(args.predictions)
        abstractors = [ev.read_abstractor_csv(p) for p in args.abstractors]
        overrides = ev.read_truth_csv(args.overrides) if args.overrides else {}
        excluded: list[tuple[str, str]] = []
        if args.truth:
            truth = ev.read_truth_csv(args.truth)
        elif abstractors:
            cells, unresolved = ev.build_ground_truth([a[1] for a in abstractors], overrides)
            for key in unresolved:
                print(f"WARN unresolved after consensus, excluded: {key[0]}/{key[1]}",
                      file=sys.stderr)
            excluded = unresolved
            truth = {k: c.truth for k, c in cells.items() if c.truth != ev.UNRESOLVED}
        else:
            raise ValueError("need either --truth or three abstractor files")
        missing = [k for k in truth if k not in predictions]
        if missing:
            raise ev.LengthMismatchError(
                f"predictions missing {len(missing)} scored datapoint(s), e.g. {missing[0]}")

        report = ev.EvalReport(excluded=excluded)
        report.overall.append(ev.summarize_accuracy("tool", predictions, truth))
        report.per_variable.extend(ev.per_variable_accuracy("tool", predictions, truth))
        for rater, values, rater_elapsed in abstractors:
            report.overall.append(ev.summarize_accuracy(rater, values, truth))
            report.per_variable.extend(ev.per_variable_accuracy(rater, values, truth))
            report.comparisons.append(ev.compare_raters(
                "tool", predictions, rater, values, truth,
                margin=args.margin, alpha=args.alpha))
        if len(elapsed) >= 2:
            mean, (lo, hi) = ev.mean_ci(sorted(elapsed.values()))
            report.timings.append(ev.TimingSummary("tool", len(elapsed), mean, lo, hi))
        for rater, _, rater_elapsed in abstractors:
            if len(rater_elapsed) >= 2:
                mean, (lo, hi) = ev.mean_ci(sorted(rater_elapsed.values()))
                report.timings.append(ev.TimingSummary(rater, len(rater_elapsed), mean, lo, hi))
            common = sorted(set(elapsed) & set(rater_elapsed))
            if len(common) >= 2:
                result = ev.paired_t_test([elapsed[d] for d in common],
                                          [rater_elapsed[d] for d in common])
                report.timing_tests.append(ev.TimingComparison("tool", rater, result))
    except (ValueError, OSError, ev.WrongArityError, ev.LengthMismatchError,
            ev.UnresolvedTruthError, ev.TooFewSamplesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for acc in report.overall:
        print(report.accuracy_line(acc))
    if args.output:
        for path in report.write_files(args.output):
            print(f"wrote {path}")
    else:
        print()
        print(report.to_text(), end="")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    label_a = args.label_a or Path(args.predictions_a).stem
    label_b = args.label_b or Path(args.predictions_b).stem
    try:
        a_values, a_elapsed = ev.read_predictions_csv(args.predictions_a)
        b_values, b_elapsed = ev.read_predictions_csv(args.predictions_b)
        truth = ev.read_truth_csv(args.truth)
        for label, values in ((label_a, a_values), (label_b, b_values)):
            missing = [k for k in truth if k not in values]
            if missing:
                raise ev.LengthMismatchError(
                    f"{label} missing {len(missing)} datapoint(s), e.g. {missing[0]}")
        comp = ev.compare_raters(label_a, a_values, label_b, b_values, truth,
                                 margin=args.margin, alpha=args.alpha)
    except (ValueError, OSError, ev.LengthMismatchError, ev.UnresolvedTruthError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    o = comp.outcomes
    ni = comp.noninferiority
    print(f"paired outcomes: n11={o.n11} n10={o.n10} n01={o.n01} n00={o.n00} (n={o.n})")
    if comp.mcnemar_p is not None:
        print(f"McNemar: statistic {comp.mcnemar_statistic:.4f}, p = {comp.mcnemar_p:.4g}")
    else:
        print("McNemar: no discordant pairs")
    verdict = "non-inferior" if ni.non_inferior else "NOT non-inferior"
    print(f"accuracy difference {label_a} - {label_b}: {100 * ni.diff:+.2f}% "
          f"({100 * (1 - ni.alpha):g}% CI, {100 * ni.ci_lower:+.2f} to {100 * ni.ci_upper:+.2f}%)")
    print(f"non-inferiority at margin {100 * ni.margin:+.0f}%: {verdict}")
    common = sorted(set(a_elapsed) & set(b_elapsed))
    if len(common) >= 2:
        result = ev.paired_t_test([a_elapsed[d] for d in common],
                                  [b_elapsed[d] for d in common])
        if result.zero_variance:
            print(f"paired t-test on times: all differences identical "
                  f"(mean diff {result.mean_diff:.3f} s)")
        else:
            print(f"paired t-test on times: t = {result.t:.3f}, df = {result.df}, "
                  f"p = {result.p:.4g}, mean diff {result.mean_diff:.2f} s")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "extract":
        return cmd_extract(args)
    if args.command == "evaluate":
        return cmd_evaluate(args)
    return cmd_compare(args)


if __name__ == "__main__":
    sys.exit(main())
