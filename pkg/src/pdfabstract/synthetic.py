"""Synthetic prostatectomy-report corpus with known planted values.

Used for the shipped demo corpus and for end-to-end tests: every generated
report's phrasing is extractable by the mock-rules backend, so a pipeline
run over a synthetic corpus has a fully known correct output.
"""

from __future__ import annotations

import csv
import random
from pathlib import Path

from .schema import NOT_REPORTED, default_schema, format_value

_FILLER = (
    "The specimen was received fresh, labeled with the patient identifier, and "
    "entirely submitted after routine processing.",
    "Sections through the apex, base, and bilateral peripheral zones were reviewed.",
    "Representative sections demonstrate benign prostatic tissue with focal atrophy.",
    "The seminal vesicles and vasa deferentia were identified and sampled.",
    "High molecular weight cytokeratin and p63 immunostains support the diagnosis.",
    "No treatment effect is seen in the sampled tissue.",
    "The urethral and bladder neck tissue appears unremarkable on review.",
    "Findings were reviewed at the departmental consensus conference.",
)

_SITES = ("left apex", "right apex", "left base", "right base", "posterior surface")


def generate_report(rng: random.Random, doc_id: str) -> tuple[str, dict[str, object]]:
    """One synthetic report. Returns (report text, planted canonical values)."""
    values: dict[str, object] = {name: NOT_REPORTED for name in default_schema().names}
    lines = [
        "SURGICAL PATHOLOGY REPORT",
        f"Accession No. SP-{rng.randint(20, 29)}-{rng.randint(1000, 9999)}.",
        "SPECIMEN: Prostate, radical prostatectomy with bilateral pelvic "
        "lymph node contents.",
        f"CLINICAL HISTORY: The patient is a {rng.randint(48, 79)}-year-old man with "
        f"an elevated serum PSA of {rng.uniform(4.0, 22.0):.1f} ng/mL and a prior "
        "biopsy showing adenocarcinoma.",
    ]

    if rng.random() < 0.85:
        weight = round(rng.uniform(22.0, 140.0), 1)
        values["Specific Prostate Weight in g"] = weight
        lines.append(f"GROSS DESCRIPTION: The prostate gland weighs {weight:.1f} g and "
                     f"measures {rng.uniform(3.0, 6.0):.1f} x {rng.uniform(3.0, 5.5):.1f} "
                     f"x {rng.uniform(2.5, 5.0):.1f} cm.")
    else:
        lines.append(f"GROSS DESCRIPTION: The prostate gland measures "
                     f"{rng.uniform(3.0, 6.0):.1f} x {rng.uniform(3.0, 5.5):.1f} "
                     f"x {rng.uniform(2.5, 5.0):.1f} cm.")
    lines.append(rng.choice(_FILLER))

    lines.append(f"FINAL DIAGNOSIS: Prostatic adenocarcinoma, acinar type, involving "
                 f"the {rng.choice(('left', 'right', 'bilateral'))} lobe.")

    if rng.random() < 0.9:
        primary, secondary = rng.choice((3, 4, 5)), rng.choice((3, 4, 5))
        values["Primary Gleason Grade"] = primary
        values["Secondary Gleason Grade"] = secondary
        values["Gleason Sum Score"] = primary + secondary
        lines.append(f"GLEASON SCORE: {primary}+{secondary}={primary + secondary}.")
        roll = rng.random()
        if roll < 0.25:
            tertiary = rng.choice(("3", "4", "5"))
            values["Tertiary Gleason Pattern or Grade"] = tertiary
            lines.append(f"Tertiary Gleason pattern: {tertiary}.")
        elif roll < 0.55:
            values["Tertiary Gleason Pattern or Grade"] = "None"
            lines.append("Tertiary Gleason pattern: not identified.")

    stage_bits = []
    if rng.random() < 0.9:
        pt = rng.choice(("pT2", "pT2a", "pT2b", "pT2c", "pT3a", "pT3b", "pT4"))
        values["pT-Stage"] = pt
        stage_bits.append(pt)

    if rng.random() < 0.85:
        removed = rng.randint(1, 24)
        involved = rng.randint(0, min(removed, 4)) if rng.random() < 0.6 else 0
        values["Number of Lymph Nodes Removed"] = removed
        values["Number of Lymph Nodes Involved by Cancer"] = involved
        values["pN-Stage"] = "pN1" if involved else "pN0"
        stage_bits.append(values["pN-Stage"])
        node_lines = [
            f"{removed} lymph node{'s were' if removed != 1 else ' was'} examined.",
            f"{involved} lymph node{'s are' if involved != 1 else ' is'} involved by carcinoma.",
        ]
    else:
        node_lines = []
        if rng.random() < 0.5:
            values["pN-Stage"] = "pNX"
            stage_bits.append("pNX")
    if stage_bits:
        lines.append(f"Pathologic stage: {' '.join(stage_bits)}.")

    for variable, label in (
        ("Extraprostatic Extension", "Extraprostatic extension"),
        ("Seminal Vesical Invasion", "Seminal vesicle invasion"),
        ("Lymphovascular Invasion", "Lymphovascular invasion"),
        ("Perineural Invasion", "Perineural invasion"),
    ):
        roll = rng.random()
        if roll < 0.4:
            values[variable] = "Yes"
            lines.append(f"{label}: {rng.choice(('present', 'identified'))}.")
        elif roll < 0.8:
            values[variable] = "No"
            lines.append(f"{label}: {rng.choice(('not identified', 'absent'))}.")

    roll = rng.random()
    if roll < 0.45:
        values["Surgical Margin Status"] = "Positive"
        lines.append(f"Surgical margins are positive, involving the {rng.choice(_SITES)}.")
    elif roll < 0.9:
        values["Surgical Margin Status"] = "Negative"
        lines.append("Surgical margins are negative.")

    lines.extend(node_lines)
    lines.append("COMMENT: " + rng.choice(_FILLER))
    return "\n".join(lines) + "\n", values


def write_corpus(directory: str | Path, n_docs: int, seed: int = 0,
                 truth_path: str | Path | None = None) -> dict[str, dict[str, object]]:
    """Write ``n_docs`` synthetic reports as .txt files plus an optional
    long-format truth CSV (doc_id, variable, truth). Deterministic in seed."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    width = max(3, len(str(n_docs)))
    truths: dict[str, dict[str, object]] = {}
    for i in range(1, n_docs + 1):
        doc_id = f"report_{i:0{width}d}"
        text, values = generate_report(rng, doc_id)
        (directory / f"{doc_id}.txt").write_text(text, encoding="utf-8")
        truths[doc_id] = values
    if truth_path is not None:
        write_truth_csv(truth_path, truths)
    return truths


def write_truth_csv(path: str | Path, truths: dict[str, dict[str, object]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["doc_id", "variable", "truth"])
        for doc_id in sorted(truths):
            for variable, value in truths[doc_id].items():
                writer.writerow([doc_id, variable, format_value(value)])
