"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``)."""

import csv
import itertools
import random
import string
import time
from pathlib import Path

import numpy as np

from pdfabstract.chunking import EmbeddingVector
from pdfabstract.cli import main
from pdfabstract.evaluation import PairedOutcomes, UNRESOLVED, consensus, mcnemar, noninferiority, paired_t_test, wilson_ci
from pdfabstract.retrieval import ChunkRef, build_index, query
from pdfabstract.schema import FOUND_NOTHING, default_schema, normalize, parse_response, read_table, write_table
from pdfabstract.synthetic import write_corpus

from test_evaluation import (
    oracle_chi2_sf_1df,
    oracle_exact_binom_two_sided,
    oracle_t_sf,
    oracle_wilson,
    oracle_z,
)
from test_retrieval import brute_force_topk

REPO_ROOT = Path(__file__).resolve().parent.parent
DEMO_CORPUS = REPO_ROOT / "data" / "demo_corpus"
DEMO_TRUTH = REPO_ROOT / "data" / "demo_corpus_truth.csv"

SCHEMA = default_schema()


def read_truth_cells(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return {(row["doc_id"], row["variable"]): row["truth"] for row in csv.DictReader(fh)}


def read_wide_cells(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        variables = header[1:-1]
        cells = {}
        for row in reader:
            for variable, cell in zip(variables, row[1:-1]):
                cells[(row[0], variable)] = cell
    return cells


def test_criterion_1_hermetic_end_to_end(tmp_path):
    """Shipped 20-doc corpus + mock backend: 100% accuracy, deterministic, fast."""
    start = time.monotonic()
    out_a = tmp_path / "run_a.csv"
    out_b = tmp_path / "run_b.csv"
    for out in (out_a, out_b):
        code = main(["extract", "--input", str(DEMO_CORPUS), "--output", str(out),
                     "--backend", "mock-rules", "--paper-mode"])
        assert code == 0
    elapsed = time.monotonic() - start
    truth = read_truth_cells(DEMO_TRUTH)
    predicted = read_wide_cells(out_a)
    assert len(truth) == 20 * 14
    wrong = [k for k, v in truth.items() if predicted[k] != v]
    assert wrong == [], f"mismatches: {wrong[:5]}"
    assert out_a.read_bytes() == out_b.read_bytes()
    assert elapsed < 10.0
    print(f"\nACCEPTANCE 1 PASS: 20-doc mock extraction 100% accurate, "
          f"deterministic, {elapsed:.2f} s")


def test_criterion_2_retrieval_exactness():
    """query() matches a brute-force cosine-sort oracle on 100 random corpora."""
    rng = np.random.default_rng(2024)
    checked = 0
    for corpus_i in range(100):
        dim = 8 if corpus_i % 2 else 512
        n = int(rng.integers(2, 501 if dim == 8 else 160))
        entries = []
        for i in range(n):
            entries.append((ChunkRef(f"d{int(rng.integers(0, 8))}", i),
                            EmbeddingVector(rng.normal(size=dim))))
        # force exact ties: duplicate two stored vectors under fresh refs
        entries.append((ChunkRef("tie", 0), EmbeddingVector(entries[0][1].values.copy())))
        entries.append((ChunkRef("tie", 1), EmbeddingVector(entries[n // 2][1].values.copy())))
        index = build_index(entries)
        q = EmbeddingVector(rng.normal(size=dim))
        oracle_full = brute_force_topk(entries, q, len(entries))
        for k in (1, 5, 20):
            got = query(index, q, k)
            want = oracle_full[:k]
            assert [r.chunk_ref for r in got] == [ref for ref, _ in want]
            for r, (_, score) in zip(got, want):
                assert abs(r.score - score) <= 1e-9
            checked += 1
    print(f"\nACCEPTANCE 2 PASS: retrieval equals brute-force oracle on "
          f"{checked} (corpus, k) cases incl. ties")


def test_criterion_3_statistics_oracles():
    """Wilson / McNemar (both branches) / Wald diff CI / paired t vs oracles."""
    rng = random.Random(99)
    # Wilson, >= 20 randomized cases
    for _ in range(25):
        n = rng.randint(1, 3000)
        k = rng.randint(0, n)
        lo, hi = wilson_ci(k, n)
        want = oracle_wilson(k, n)
        assert abs(lo - want[0]) <= 1e-6 and abs(hi - want[1]) <= 1e-6
    # worked example: 2624/2786
    lo, hi = wilson_ci(2624, 2786)
    assert round(lo, 4) == 0.9325 and round(hi, 4) == 0.9499

    # McNemar: exact branch (incl. the worked 15/5 example) and chi-square branch
    statistic, p = mcnemar(PairedOutcomes(0, 15, 5, 0))
    assert abs(statistic - 4.05) <= 1e-6
    assert abs(p - oracle_exact_binom_two_sided(15, 20)) <= 1e-6
    exact_cases = chi_cases = 0
    while exact_cases < 20 or chi_cases < 20:
        n10, n01 = rng.randint(0, 40), rng.randint(0, 40)
        if n10 + n01 == 0:
            continue
        statistic, p = mcnemar(PairedOutcomes(rng.randint(0, 100), n10, n01, rng.randint(0, 100)))
        want_stat = (abs(n10 - n01) - 1) ** 2 / (n10 + n01)
        assert abs(statistic - want_stat) <= 1e-6
        if n10 + n01 >= 25:
            assert abs(p - oracle_chi2_sf_1df(want_stat)) <= 1e-6
            chi_cases += 1
        else:
            assert abs(p - oracle_exact_binom_two_sided(n10, n10 + n01)) <= 1e-6
            exact_cases += 1

    # paired-difference Wald CI at alpha = 0.025
    z = oracle_z(0.9875)
    for _ in range(25):
        po = PairedOutcomes(rng.randint(0, 300), rng.randint(0, 50),
                            rng.randint(0, 50), rng.randint(1, 50))
        result = noninferiority(po)
        diff = (po.n10 - po.n01) / po.n
        se = ((po.n10 + po.n01) - (po.n10 - po.n01) ** 2 / po.n) ** 0.5 / po.n
        assert abs(result.ci_lower - (diff - z * se)) <= 1e-6
        assert abs(result.ci_upper - (diff + z * se)) <= 1e-6

    # paired t-test
    for _ in range(25):
        n = rng.randint(3, 60)
        a = [rng.uniform(0, 50) for _ in range(n)]
        b = [rng.uniform(0, 50) for _ in range(n)]
        result = paired_t_test(a, b)
        diffs = [x - y for x, y in zip(a, b)]
        mean = sum(diffs) / n
        sd = (sum((d - mean) ** 2 for d in diffs) / (n - 1)) ** 0.5
        t_want = mean / (sd / n ** 0.5)
        assert abs(result.t - t_want) <= 1e-6
        assert abs(result.p - 2 * oracle_t_sf(abs(t_want), n - 1)) <= 1e-6
    print("\nACCEPTANCE 3 PASS: Wilson, McNemar (both branches), Wald diff CI, "
          "paired t all match oracles to 1e-6")


def build_marginal_files(tmp_path, tag, correct_a, correct_b, n_docs=199, n_vars=14):
    """Two wide prediction CSVs + truth with exact correctness counts over
    n_docs x n_vars datapoints, maximal overlap between the correct sets."""
    variables = [f"v{j:02d}" for j in range(1, n_vars + 1)]
    docs = [f"d{i:03d}" for i in range(1, n_docs + 1)]
    keys = [(d, v) for d in docs for v in variables]
    truth = {k: "A" for k in keys}
    a_cells = {k: ("A" if i < correct_a else "B") for i, k in enumerate(keys)}
    b_cells = {k: ("A" if i < correct_b else "B") for i, k in enumerate(keys)}
    paths = []
    for name, cells in ((f"a_{tag}.csv", a_cells), (f"b_{tag}.csv", b_cells)):
        path = tmp_path / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["doc_id", *variables, "elapsed_seconds"])
            for d in docs:
                writer.writerow([d, *(cells[(d, v)] for v in variables), "1.000"])
        paths.append(path)
    truth_path = tmp_path / f"truth_{tag}.csv"
    with open(truth_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["doc_id", "variable", "truth"])
        for d, v in keys:
            writer.writerow([d, v, truth[(d, v)]])
    return paths[0], paths[1], truth_path


def test_criterion_4_benchmark_noninferiority_decisions(tmp_path, capsys):
    """Marginal accuracies 94.2% vs {94.7, 97.8, 96.4}% at n=2786: all
    non-inferior at margin -10%; 88.7% vs 97.8% fails."""
    n = 199 * 14
    assert n == 2786
    candidate = round(0.942 * n)  # 2624
    comparators = {"0.947": round(0.947 * n), "0.978": round(0.978 * n),
                   "0.964": round(0.964 * n)}
    for tag, correct_b in comparators.items():
        a, b, truth = build_marginal_files(tmp_path, tag, candidate, correct_b)
        code = main(["compare", str(a), str(b), str(truth),
                     "--margin", "-0.10", "--alpha", "0.025"])
        out = capsys.readouterr().out
        assert code == 0
        assert "NOT non-inferior" not in out
        assert "non-inferior" in out
    # degraded candidate vs the strongest comparator
    a, b, truth = build_marginal_files(tmp_path, "scan", round(0.887 * n), round(0.978 * n))
    code = main(["compare", str(a), str(b), str(truth),
                 "--margin", "-0.10", "--alpha", "0.025"])
    out = capsys.readouterr().out
    assert code == 0
    assert "NOT non-inferior" in out
    print("\nACCEPTANCE 4 PASS: non-inferior vs all three comparators at 94.2%; "
          "fails vs 97.8% comparator at 88.7%")


def test_criterion_5_consensus_protocol():
    """Consensus equals a brute-force majority oracle and is
    permutation-invariant over >= 10^4 enumerated triples."""
    def oracle(values):
        for candidate in set(values):
            if sum(v == candidate for v in values) >= 2:
                return candidate
        return UNRESOLVED

    cases = 0
    domain5 = [f"s{i}" for i in range(5)]
    for triple in itertools.product(domain5, repeat=3):
        cell = consensus("d", "v", list(triple))
        assert cell.truth == oracle(triple)
        for perm in itertools.permutations(triple):
            other = consensus("d", "v", list(perm))
            assert (other.truth, other.provenance) == (cell.truth, cell.provenance)
        cases += 1
    domain22 = [f"t{i}" for i in range(22)]
    for triple in itertools.product(domain22, repeat=3):
        cell = consensus("d", "v", list(triple))
        assert cell.truth == oracle(triple)
        shuffled = consensus("d", "v", [triple[2], triple[0], triple[1]])
        assert (shuffled.truth, shuffled.provenance) == (cell.truth, cell.provenance)
        cases += 1
    assert cases >= 10_000
    print(f"\nACCEPTANCE 5 PASS: consensus matches majority oracle on {cases} "
          "triples, permutation-invariant")


def test_criterion_6_domain_closure_fuzz():
    """10^5 random strings through parse_response + normalize: total, closed."""
    rng = random.Random(123)
    alphabet = string.printable + "éµΩ≤"
    names = SCHEMA.names
    fragments = ["pT3a", "Found Nothing", "negative", "not identified", "4+5=9",
                 "52.3 g", "none", "N/A", "pNX", "yes", "12 nodes", "-3", "7.5",
                 FOUND_NOTHING, "tertiary", ":", " - ", "="]
    specs = SCHEMA.variables
    failures = 0
    for i in range(100_000):
        roll = rng.random()
        if roll < 0.4:
            s = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
        elif roll < 0.7:
            s = (rng.choice(names) + rng.choice([": ", " - ", " = ", ""])
                 + rng.choice(fragments))
        else:
            s = "\n".join(rng.choice(names) + ": " + rng.choice(fragments)
                          for _ in range(rng.randint(1, 4)))
        parsed = parse_response(s, SCHEMA)
        assert list(parsed) == names
        spec = specs[i % len(specs)]
        value = normalize(s, spec, warn=lambda m: None)
        assert spec.contains(value), (s, spec.name, value)
        if i % 10 == 0:  # full record path incl. domain validation
            raw = parsed[spec.name]
            v2 = normalize(raw, spec, warn=lambda m: None)
            assert spec.contains(v2)
    assert failures == 0
    print("\nACCEPTANCE 6 PASS: 100000 fuzz strings, zero failures, "
          "zero out-of-domain values")


def test_criterion_7_output_shape_199_docs(tmp_path):
    """199-doc mock run: 200 x 16 CSV that round-trips losslessly."""
    corpus_dir = tmp_path / "corpus199"
    write_corpus(corpus_dir, 199, seed=5)
    out = tmp_path / "out199.csv"
    code = main(["extract", "--input", str(corpus_dir), "--output", str(out),
                 "--backend", "mock-rules", "--paper-mode"])
    assert code == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 200
    widths = {len(line.split(",")) for line in lines}
    assert widths == {16}
    records = read_table(out, SCHEMA)
    assert len(records) == 199
    rewritten = tmp_path / "rewritten.csv"
    write_table(records, rewritten)
    assert rewritten.read_bytes() == out.read_bytes()
    print("\nACCEPTANCE 7 PASS: 199-doc run gives 200 x 16 CSV, lossless round-trip")


def test_criterion_8_mock_runs_byte_identical(tmp_path):
    """Two mock-backend runs with one seed produce byte-identical CSVs."""
    corpus_dir = tmp_path / "corpus"
    write_corpus(corpus_dir, 12, seed=8)
    outputs = []
    for run in ("one", "two"):
        out = tmp_path / f"{run}.csv"
        code = main(["extract", "--input", str(corpus_dir), "--output", str(out),
                     "--backend", "mock-rules", "--seed", "42", "--concurrency", "3"])
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    print("\nACCEPTANCE 8 PASS: repeat mock runs byte-identical")
