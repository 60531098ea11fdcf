"""Extraction schema, response parsing, value normalization, and table output.

Every variable has a closed value domain. ``parse_response`` and
``normalize`` are total: any input string ends up as an in-domain canonical
value or the ``NotReported`` sentinel, never an exception.
"""

from __future__ import annotations

import csv
import logging
import re
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable
from xml.sax.saxutils import escape

log = logging.getLogger(__name__)

NOT_REPORTED = "NotReported"
FOUND_NOTHING = "Found Nothing"

# Surface forms meaning "the model/abstractor reported nothing".
_NOT_REPORTED_FORMS = {
    "", "found nothing", "n a", "na", "nr", "not reported", "notreported",
    "nothing found", "unknown", "not available", "not stated", "not specified",
    "not applicable", "not given", "not mentioned",
}

_NUMBER_RE = re.compile(r"[-+]?\d+(?:\.\d+)?")
_CANON_RE = re.compile(r"[^a-z0-9]+")


def canon(text: str) -> str:
    """Case/punctuation-insensitive comparison form of a string."""
    return _CANON_RE.sub(" ", text.lower()).strip()


@dataclass
class VariableSpec:
    """One variable to abstract: a name, a kind, and a closed value domain.

    ``domain`` is the tuple of canonical values for categorical variables
    (always including ``NotReported``) or an inclusive ``(low, high)`` range
    for integer/decimal variables. ``synonyms`` maps surface forms to
    canonical values and is applied case/punctuation-insensitively, longest
    form first, so "not identified" wins over "identified".
    """

    name: str
    kind: str  # "categorical" | "integer" | "decimal"
    domain: tuple
    synonyms: dict = field(default_factory=dict)
    unit: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("categorical", "integer", "decimal"):
            raise ValueError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.domain:
                raise ValueError(f"{self.name}: empty categorical domain")
            if NOT_REPORTED not in self.domain:
                raise ValueError(f"{self.name}: domain must include {NOT_REPORTED}")
        else:
            lo, hi = self.domain
            if not lo <= hi:
                raise ValueError(f"{self.name}: bad numeric range {self.domain}")
        # Exact-match table: canonical surface form -> canonical value.
        self._exact: dict[str, object] = {}
        if self.kind == "categorical":
            for value in self.domain:
                self._exact[canon(str(value))] = value
        for surface, value in self.synonyms.items():
            if not self.contains(value):
                raise ValueError(f"{self.name}: synonym target {value!r} not in domain")
            self._exact[canon(surface)] = value
        # Substring matcher over the same forms, longest first.
        keys = sorted((k for k in self._exact if k and k != canon(NOT_REPORTED)),
                      key=len, reverse=True)
        self._search = re.compile(r"\b(?:" + "|".join(map(re.escape, keys)) + r")\b") if keys else None

    def contains(self, value: object) -> bool:
        if value == NOT_REPORTED:
            return True
        if self.kind == "categorical":
            return value in self.domain
        lo, hi = self.domain
        if self.kind == "integer":
            return isinstance(value, int) and lo <= value <= hi
        return isinstance(value, (int, float)) and lo <= value <= hi


@dataclass(frozen=True)
class ExtractionSchema:
    variables: tuple[VariableSpec, ...]

    def __post_init__(self) -> None:
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names in schema")

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def __iter__(self):
        return iter(self.variables)

    def __getitem__(self, name: str) -> VariableSpec:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)


def _yes_no(name: str) -> VariableSpec:
    return VariableSpec(
        name=name,
        kind="categorical",
        domain=("Yes", "No", NOT_REPORTED),
        synonyms={
            "present": "Yes", "identified": "Yes", "positive": "Yes", "seen": "Yes",
            "focal": "Yes", "focally present": "Yes", "extensive": "Yes",
            "absent": "No", "negative": "No", "not identified": "No",
            "not present": "No", "not seen": "No", "no evidence": "No",
            "none identified": "No",
        },
    )


def default_schema() -> ExtractionSchema:
    """The 14-variable radical-prostatectomy abstraction schema."""
    return ExtractionSchema(variables=(
        VariableSpec(
            name="pT-Stage", kind="categorical",
            domain=("pT2", "pT2a", "pT2b", "pT2c", "pT3a", "pT3b", "pT4", NOT_REPORTED),
            synonyms={"t2": "pT2", "t2a": "pT2a", "t2b": "pT2b", "t2c": "pT2c",
                      "t3a": "pT3a", "t3b": "pT3b", "t4": "pT4"},
        ),
        VariableSpec(name="Primary Gleason Grade", kind="integer", domain=(1, 5)),
        VariableSpec(name="Secondary Gleason Grade", kind="integer", domain=(1, 5)),
        VariableSpec(name="Gleason Sum Score", kind="integer", domain=(2, 10)),
        VariableSpec(
            name="Tertiary Gleason Pattern or Grade", kind="categorical",
            domain=("3", "4", "5", "None", NOT_REPORTED),
            synonyms={"no tertiary pattern": "None", "not identified": "None",
                      "absent": "None", "pattern 3": "3", "pattern 4": "4",
                      "pattern 5": "5", "grade 3": "3", "grade 4": "4", "grade 5": "5"},
        ),
        _yes_no("Extraprostatic Extension"),
        _yes_no("Seminal Vesical Invasion"),
        _yes_no("Lymphovascular Invasion"),
        _yes_no("Perineural Invasion"),
        VariableSpec(
            name="Surgical Margin Status", kind="categorical",
            domain=("Positive", "Negative", NOT_REPORTED),
            synonyms={"involved": "Positive", "focally positive": "Positive",
                      "not involved": "Negative", "free": "Negative",
                      "free of tumor": "Negative", "clear": "Negative",
                      "uninvolved": "Negative"},
        ),
        VariableSpec(
            name="pN-Stage", kind="categorical",
            domain=("pN0", "pN1", "pNX", NOT_REPORTED),
            synonyms={"n0": "pN0", "n1": "pN1", "nx": "pNX"},
        ),
        VariableSpec(name="Number of Lymph Nodes Removed", kind="integer",
                     domain=(0, 99), synonyms={"none": 0}),
        VariableSpec(name="Number of Lymph Nodes Involved by Cancer", kind="integer",
                     domain=(0, 99), synonyms={"none": 0}),
        VariableSpec(name="Specific Prostate Weight in g", kind="decimal",
                     domain=(1.0, 500.0), unit="g"),
    ))


# --------------------------------------------------------------------------
# Response parsing and normalization
# --------------------------------------------------------------------------

_SEPARATORS = re.compile(r"[:=\-]")


def parse_response(raw: str, schema: ExtractionSchema) -> dict[str, str]:
    """Scan a completion for "<variable>: <answer>" lines.

    Name matching is case- and punctuation-insensitive; ``:``, ``=`` and
    ``-`` all serve as separators. Variables never mentioned map to the
    literal "Found Nothing"; on duplicates the first occurrence wins.
    """
    by_canon = {canon(v.name): v.name for v in schema}
    found: dict[str, str] = {}
    for line in raw.splitlines():
        for m in _SEPARATORS.finditer(line):
            name = by_canon.get(canon(line[: m.start()]))
            if name is not None:
                if name not in found:
                    found[name] = line[m.end() :].strip()
                break
    return {name: found.get(name, FOUND_NOTHING) for name in schema.names}


def _strip_unit(text: str, unit: str | None) -> str:
    if not unit:
        return text
    return re.sub(rf"\b{re.escape(unit)}s?\b\.?", " ", text, flags=re.IGNORECASE)


def normalize(raw_answer: str, spec: VariableSpec,
              warn: Callable[[str], None] | None = None) -> object:
    """Map a raw answer string onto the variable's closed domain.

    Total: anything unmappable becomes ``NotReported`` (with a warning for
    genuinely out-of-domain answers).
    """
    if warn is None:
        warn = lambda msg: log.warning("%s", msg)
    stripped = _strip_unit(raw_answer, spec.unit) if spec.kind != "categorical" else raw_answer
    key = canon(stripped)
    if key in spec._exact:
        return spec._exact[key]
    if key in _NOT_REPORTED_FORMS:
        return NOT_REPORTED
    if spec.kind in ("integer", "decimal"):
        m = _NUMBER_RE.search(stripped)
        if m:
            number = float(m.group(0))
            if spec.kind == "integer":
                if number != int(number):
                    warn(f"{spec.name}: non-integer answer {raw_answer!r}")
                    return NOT_REPORTED
                number = int(number)
            if spec.contains(number):
                return number
            warn(f"{spec.name}: out-of-range answer {raw_answer!r}")
            return NOT_REPORTED
    if spec._search is not None:
        m = spec._search.search(key)
        if m:
            return spec._exact[m.group(0)]
    warn(f"{spec.name}: out-of-domain answer {raw_answer!r}")
    return NOT_REPORTED


@dataclass
class ExtractionRecord:
    doc_id: str
    values: dict[str, object]
    raw_answers: dict[str, str]
    elapsed: float

    def validate(self, schema: ExtractionSchema) -> None:
        if list(self.values) != schema.names:
            raise ValueError(f"{self.doc_id}: record keys do not match schema order")
        for name, value in self.values.items():
            if not schema[name].contains(value):
                raise ValueError(f"{self.doc_id}: {name}={value!r} outside domain")


def build_record(doc_id: str, response_text: str, schema: ExtractionSchema,
                 elapsed: float = 0.0,
                 warn: Callable[[str], None] | None = None) -> ExtractionRecord:
    """Parse a completion and normalize every variable into the domain."""
    raw_answers = parse_response(response_text, schema)
    values = {v.name: normalize(raw_answers[v.name], v, warn=warn) for v in schema}
    record = ExtractionRecord(doc_id=doc_id, values=values,
                              raw_answers=raw_answers, elapsed=elapsed)
    record.validate(schema)
    return record


def check_gleason_coherence(records: Iterable[ExtractionRecord]) -> list[str]:
    """Flag records whose Gleason sum differs from primary + secondary.

    Warning only: source reports can themselves be internally inconsistent.
    """
    warnings = []
    for rec in records:
        p = rec.values.get("Primary Gleason Grade")
        s = rec.values.get("Secondary Gleason Grade")
        total = rec.values.get("Gleason Sum Score")
        if isinstance(p, int) and isinstance(s, int) and isinstance(total, int) and p + s != total:
            warnings.append(f"{rec.doc_id}: Gleason sum {total} != {p} + {s}")
    return warnings


# --------------------------------------------------------------------------
# Table output
# --------------------------------------------------------------------------

def format_value(value: object) -> str:
    """Canonical cell text: NotReported -> "NR", numbers in minimal form."""
    if value == NOT_REPORTED:
        return "NR"
    if isinstance(value, bool):
        raise TypeError("bool is not a valid cell value")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def parse_value(cell: str, spec: VariableSpec) -> object:
    if cell == "NR":
        return NOT_REPORTED
    if spec.kind == "integer":
        return int(cell)
    if spec.kind == "decimal":
        return float(cell)
    return cell


def write_table(records: list[ExtractionRecord], path: str | Path,
                spreadsheet_path: str | Path | None = None) -> None:
    """Write records as a CSV (one row per document, doc_id order).

    Columns: doc_id, the schema variables in order, elapsed_seconds.
    Optionally also writes an .xlsx spreadsheet with identical content.
    """
    if not records:
        raise ValueError("no records to write")
    names = list(records[0].values)
    for rec in records:
        if list(rec.values) != names:
            raise ValueError("records do not share one schema")
    ordered = sorted(records, key=lambda r: r.doc_id)
    header = ["doc_id", *names, "elapsed_seconds"]
    rows = [[rec.doc_id, *(format_value(rec.values[n]) for n in names), f"{rec.elapsed:.3f}"]
            for rec in ordered]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    if spreadsheet_path is not None:
        _write_xlsx(spreadsheet_path, [header, *rows])


def read_table(path: str | Path, schema: ExtractionSchema) -> list[ExtractionRecord]:
    """Read back a CSV produced by ``write_table``."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["doc_id", *schema.names, "elapsed_seconds"]
        if header != expected:
            raise ValueError(f"{path}: unexpected header {header!r}")
        records = []
        for row in reader:
            if not row:
                continue
            doc_id, *cells, elapsed = row
            values = {name: parse_value(cell, schema[name])
                      for name, cell in zip(schema.names, cells)}
            records.append(ExtractionRecord(doc_id=doc_id, values=values,
                                            raw_answers={}, elapsed=float(elapsed)))
    return records


def _write_xlsx(path: str | Path, rows: list[list[str]]) -> None:
    """Minimal single-sheet .xlsx writer (inline strings, no styling)."""
    def cell_ref(col: int, row: int) -> str:
        letters = ""
        col += 1
        while col:
            col, rem = divmod(col - 1, 26)
            letters = chr(ord("A") + rem) + letters
        return f"{letters}{row + 1}"

    sheet_rows = []
    for r, row in enumerate(rows):
        cells = "".join(
            f'<c r="{cell_ref(c, r)}" t="inlineStr"><is><t>{escape(str(v))}</t></is></c>'
            for c, v in enumerate(row)
        )
        sheet_rows.append(f'<row r="{r + 1}">{cells}</row>')
    sheet = (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<worksheet xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main">'
        f'<sheetData>{"".join(sheet_rows)}</sheetData></worksheet>'
    )
    workbook = (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<workbook xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main" '
        'xmlns:r="http://schemas.openxmlformats.org/officeDocument/2006/relationships">'
        '<sheets><sheet name="extracted" sheetId="1" r:id="rId1"/></sheets></workbook>'
    )
    workbook_rels = (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">'
        '<Relationship Id="rId1" '
        'Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/worksheet" '
        'Target="worksheets/sheet1.xml"/></Relationships>'
    )
    root_rels = (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">'
        '<Relationship Id="rId1" '
        'Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument" '
        'Target="xl/workbook.xml"/></Relationships>'
    )
    content_types = (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>'
        '<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types">'
        '<Default Extension="rels" ContentType="application/vnd.openxmlformats-package.relationships+xml"/>'
        '<Default Extension="xml" ContentType="application/xml"/>'
        '<Override PartName="/xl/workbook.xml" '
        'ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml"/>'
        '<Override PartName="/xl/worksheets/sheet1.xml" '
        'ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml"/>'
        "</Types>"
    )
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("[Content_Types].xml", content_types)
        zf.writestr("_rels/.rels", root_rels)
        zf.writestr("xl/workbook.xml", workbook)
        zf.writestr("xl/_rels/workbook.xml.rels", workbook_rels)
        zf.writestr("xl/worksheets/sheet1.xml", sheet)


# --------------------------------------------------------------------------
# Schema override files
# --------------------------------------------------------------------------

def load_schema_file(path: str | Path) -> ExtractionSchema:
    """Read a schema override file: one variable per blank-line-separated block.

    Block keys: ``variable`` (name), ``kind``, ``domain`` (comma-separated
    values, or ``low..high`` for numeric kinds), optional ``synonyms``
    (``surface = canonical`` pairs separated by ``;``), optional ``unit``.
    ``NotReported`` is appended to categorical domains if missing.
    """
    text = Path(path).read_text(encoding="utf-8")
    specs = []
    for block in re.split(r"\n\s*\n", text):
        entries: dict[str, str] = {}
        for line in block.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition(":")
            entries[key.strip().lower()] = value.strip()
        if not entries:
            continue
        try:
            name = entries["variable"]
            kind = entries["kind"]
            domain_text = entries["domain"]
        except KeyError as exc:
            raise ValueError(f"schema block missing {exc} (block: {block[:60]!r})") from None
        if kind == "categorical":
            domain = tuple(v.strip() for v in domain_text.split(",") if v.strip())
            if NOT_REPORTED not in domain:
                domain = domain + (NOT_REPORTED,)
        else:
            lo, _, hi = domain_text.partition("..")
            conv = int if kind == "integer" else float
            domain = (conv(lo.strip()), conv(hi.strip()))
        synonyms: dict[str, object] = {}
        for pair in entries.get("synonyms", "").split(";"):
            if "=" in pair:
                surface, _, target = pair.partition("=")
                value: object = target.strip()
                if kind == "integer":
                    value = int(value)
                elif kind == "decimal":
                    value = float(value)
                synonyms[surface.strip()] = value
        specs.append(VariableSpec(name=name, kind=kind, domain=domain,
                                  synonyms=synonyms, unit=entries.get("unit") or None))
    if not specs:
        raise ValueError(f"{path}: no variable blocks found")
    return ExtractionSchema(variables=tuple(specs))
