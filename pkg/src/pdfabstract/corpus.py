"""Document ingestion: load text-layer PDFs and plain-text files into a corpus.

PDF support is deliberately narrow: only documents that carry an embedded
text layer are readable. Scanned/raster-only PDFs raise ``NoTextLayerError``
and must be OCR'd upstream. Plain-text files are ingested verbatim, which
also gives a hermetic path for tests and for pre-extracted sidecars.
"""

from __future__ import annotations

import base64
import re
import sys
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable


class NoTextLayerError(Exception):
    """The PDF has no extractable text (raster-only; needs upstream OCR)."""


class UnsupportedFormatError(Exception):
    """The file is neither a readable PDF nor a plain-text file."""


class EmptyCorpusError(Exception):
    """The input directory contains no *.pdf or *.txt files."""


@dataclass(frozen=True)
class Document:
    id: str
    source_path: str
    raw_text: str
    clean_text: str
    ingest_kind: str  # "pdf-text-layer" | "plain-text"


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    source_dir: str
    skipped: tuple[tuple[str, str], ...] = ()  # (path, reason) load-report entries


# --------------------------------------------------------------------------
# Text cleaning
# --------------------------------------------------------------------------

# Control characters except tab/newline/CR (those are folded as whitespace).
_CONTROL_RE = re.compile(r"[\x00-\x08\x0b\x0c\x0e-\x1f\x7f-\x9f]")
_INLINE_WS_RE = re.compile(r"[ \t\r]+")


def clean_text(raw: str) -> str:
    """Canonicalize extracted text.

    Runs of space/tab/CR collapse to one space, control characters are
    dropped, and blank-line runs collapse so newlines act as single segment
    boundaries. Idempotent, and never reorders or lengthens the input.
    """
    raw = _CONTROL_RE.sub("", raw)
    lines = (_INLINE_WS_RE.sub(" ", line).strip() for line in raw.split("\n"))
    return "\n".join(line for line in lines if line)


# --------------------------------------------------------------------------
# PDF text-layer extraction
#
# A pragmatic reader for PDFs whose text lives in ordinary content streams
# (the "vectorized" kind): it decodes Flate/ASCII85 streams and collects the
# strings shown by Tj / TJ / ' / " operators inside BT..ET blocks. Documents
# using exotic encodings (e.g. Type0 fonts with custom CMaps) fall out as
# NoTextLayer rather than producing garbage silently.
# --------------------------------------------------------------------------

_STREAM_RE = re.compile(rb"<<(?P<dict>.*?)>>\s*stream\r?\n", re.S)
_LINE_OPS = {b"T*", b"'", b'"', b"Td", b"TD", b"Tm"}
_SHOW_OPS = {b"Tj", b"'", b'"', b"TJ"}


def _decode_stream(dict_bytes: bytes, body: bytes) -> bytes | None:
    filters = re.findall(rb"/(ASCII85Decode|FlateDecode|A85|Fl)\b", dict_bytes)
    has_other = re.search(rb"/Filter", dict_bytes) and not filters
    if has_other:
        return None  # DCTDecode etc. cannot hold a text layer we can read
    try:
        for f in filters:
            if f in (b"ASCII85Decode", b"A85"):
                body = base64.a85decode(body.rstrip(b"\r\n\t "), adobe=True)
            else:
                body = zlib.decompress(body)
    except (ValueError, zlib.error):
        return None
    return body


def _unescape_literal(raw: bytes) -> str:
    out = bytearray()
    i = 0
    while i < len(raw):
        b = raw[i]
        if b != 0x5C:  # backslash
            out.append(b)
            i += 1
            continue
        i += 1
        if i >= len(raw):
            break
        c = raw[i : i + 1]
        simple = {b"n": b"\n", b"r": b"\r", b"t": b"\t", b"b": b"\b", b"f": b"\f",
                  b"(": b"(", b")": b")", b"\\": b"\\"}
        if c in simple:
            out += simple[c]
            i += 1
        elif c.isdigit():  # up to three octal digits
            j = i
            while j < len(raw) and j < i + 3 and raw[j : j + 1].isdigit():
                j += 1
            out.append(int(raw[i:j], 8) & 0xFF)
            i = j
        elif c == b"\n":  # line continuation
            i += 1
        else:
            out += c
            i += 1
    return out.decode("latin-1")


def _parse_content_text(content: bytes) -> str:
    """Collect shown strings from one decoded content stream."""
    pieces: list[str] = []
    pending: list[str] = []
    in_text = False
    i, n = 0, len(content)

    def flush(newline: bool) -> None:
        if pending:
            pieces.append("".join(pending))
            pending.clear()
        if newline and pieces and not pieces[-1].endswith("\n"):
            pieces.append("\n")

    while i < n:
        b = content[i : i + 1]
        if b == b"(":
            depth, j = 1, i + 1
            start = j
            while j < n and depth:
                c = content[j : j + 1]
                if c == b"\\":
                    j += 2
                    continue
                if c == b"(":
                    depth += 1
                elif c == b")":
                    depth -= 1
                j += 1
            if in_text:
                pending.append(_unescape_literal(content[start : j - 1]))
            i = j
        elif b == b"<" and content[i : i + 2] != b"<<":
            j = content.find(b">", i + 1)
            if j == -1:
                break
            if in_text:
                hexstr = re.sub(rb"\s", b"", content[i + 1 : j])
                if len(hexstr) % 2:
                    hexstr += b"0"
                try:
                    pending.append(bytes.fromhex(hexstr.decode("ascii")).decode("latin-1"))
                except ValueError:
                    pass
            i = j + 1
        elif b == b"<":  # "<<" dict open, skip both
            i += 2
        elif b.isalpha() or b in (b"'", b'"', b"*"):
            j = i
            while j < n and not content[j : j + 1].isspace() and content[j : j + 1] not in b"()<>[]/%":
                j += 1
            op = content[i:j]
            if op == b"BT":
                in_text = True
            elif op == b"ET":
                in_text = False
                flush(newline=True)
            elif in_text and op in _SHOW_OPS:
                if op in (b"'", b'"') and pieces and not pieces[-1].endswith("\n"):
                    pieces.append("\n")  # these ops move to the next line first
                flush(newline=False)
            elif in_text and op in _LINE_OPS:
                flush(newline=True)
            i = j if j > i else i + 1
        elif b == b"%":  # comment to end of line
            j = content.find(b"\n", i)
            i = n if j == -1 else j + 1
        else:
            i += 1
    flush(newline=False)
    return "".join(pieces)


def _extract_pdf_text(data: bytes, path: str) -> str:
    if not data.startswith(b"%PDF"):
        raise UnsupportedFormatError(f"{path}: not a PDF file")
    if re.search(rb"/Encrypt\b", data):
        raise UnsupportedFormatError(f"{path}: encrypted PDFs are not supported")
    texts: list[str] = []
    for m in _STREAM_RE.finditer(data):
        end = data.find(b"endstream", m.end())
        if end == -1:
            continue
        decoded = _decode_stream(m.group("dict"), data[m.end() : end].rstrip(b"\r\n"))
        if decoded is None or b"BT" not in decoded:
            continue
        text = _parse_content_text(decoded)
        if text.strip():
            texts.append(text)
    joined = "\n".join(texts)
    if not joined.strip():
        raise NoTextLayerError(f"{path}: no extractable text layer (scanned document?)")
    return joined


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------

def extract_text(path: str | Path) -> str:
    """Return the text content of a PDF (text layer) or plain-text file."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    suffix = p.suffix.lower()
    if suffix == ".txt":
        return p.read_text(encoding="utf-8")
    if suffix == ".pdf":
        return _extract_pdf_text(p.read_bytes(), str(p))
    raise UnsupportedFormatError(f"{p}: expected a .pdf or .txt file")


def load_corpus(source_dir: str | Path, report: Callable[[str], None] | None = None) -> Corpus:
    """Load every ``*.pdf`` / ``*.txt`` in ``source_dir`` as a Document.

    Files that fail extraction are skipped, with one ``SKIP <path>: <error>``
    line per failure on the diagnostic stream (stderr by default). A ``.txt``
    sidecar takes precedence over a PDF with the same stem.
    """
    d = Path(source_dir)
    if not d.is_dir():
        raise FileNotFoundError(str(d))
    if report is None:
        report = lambda line: print(line, file=sys.stderr)

    candidates = sorted(
        (p for p in d.iterdir() if p.is_file() and p.suffix.lower() in (".pdf", ".txt")),
        key=lambda p: (p.stem, p.suffix.lower()),
    )
    if not candidates:
        raise EmptyCorpusError(f"no *.pdf or *.txt files in {d}")

    txt_stems = {p.stem for p in candidates if p.suffix.lower() == ".txt"}
    documents: list[Document] = []
    skipped: list[tuple[str, str]] = []
    for p in candidates:
        if p.suffix.lower() == ".pdf" and p.stem in txt_stems:
            reason = "plain-text sidecar takes precedence"
            skipped.append((str(p), reason))
            report(f"SKIP {p}: {reason}")
            continue
        try:
            raw = extract_text(p)
        except (NoTextLayerError, UnsupportedFormatError, OSError, UnicodeDecodeError) as exc:
            skipped.append((str(p), str(exc)))
            report(f"SKIP {p}: {exc}")
            continue
        kind = "plain-text" if p.suffix.lower() == ".txt" else "pdf-text-layer"
        documents.append(
            Document(id=p.stem, source_path=str(p), raw_text=raw,
                     clean_text=clean_text(raw), ingest_kind=kind)
        )
    documents.sort(key=lambda doc: doc.id)
    return Corpus(documents=tuple(documents), source_dir=str(d), skipped=tuple(skipped))
