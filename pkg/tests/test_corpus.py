
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdfabstract.corpus import (
    EmptyCorpusError,
    NoTextLayerError,
    UnsupportedFormatError,
    clean_text,
    extract_text,
    load_corpus,
)

from conftest import make_image_only_pdf, make_text_pdf


# ---------------------------------------------------------------- clean_text

def test_clean_text_collapses_whitespace_and_blank_lines():
    raw = "Gleason\t\tscore:  7\n\n\nMargins:  negative "
    assert clean_text(raw) == "Gleason score: 7\nMargins: negative"


def test_clean_text_empty():
    assert clean_text("") == ""


def test_clean_text_strips_control_characters():
    assert clean_text("a\x00b\x07c\x1fd") == "abcd"


text_strategy = st.text(
    alphabet=st.characters(min_codepoint=0, max_codepoint=0x2FF), max_size=300
)


@given(text_strategy)
@settings(max_examples=200)
def test_clean_text_idempotent(raw):
    once = clean_text(raw)
    assert clean_text(once) == once


@given(text_strategy)
@settings(max_examples=200)
def test_clean_text_never_lengthens(raw):
    assert len(clean_text(raw)) <= len(raw)


@given(text_strategy)
@settings(max_examples=200)
def test_clean_text_preserves_printables_in_order(raw):
    # cleaning may only delete whitespace and control characters
    def keep(text):
        return [c for c in text if not c.isspace() and c.isprintable()]

    assert keep(clean_text(raw)) == keep(raw)


# -------------------------------------------------------------- extract_text

def test_extract_text_pdf_roundtrip(text_pdf):
    assert clean_text(extract_text(text_pdf)) == "GLEASON SCORE: 3+4=7"


def test_extract_text_pdf_uncompressed(tmp_path):
    path = tmp_path / "plain.pdf"
    make_text_pdf(path, ["Margins are negative.", "pT2c pN0."], compress=0)
    assert clean_text(extract_text(path)) == "Margins are negative.\npT2c pN0."


def test_extract_text_pdf_escaped_characters(tmp_path):
    path = tmp_path / "esc.pdf"
    make_text_pdf(path, ["weight (grams): 52.3", "a\\b"])
    text = clean_text(extract_text(path))
    assert "weight (grams): 52.3" in text
    assert "a\\b" in text


def test_extract_text_plain_text(tmp_path):
    path = tmp_path / "doc.txt"
    path.write_text("verbatim\ncontent", encoding="utf-8")
    assert extract_text(path) == "verbatim\ncontent"


def test_extract_text_empty_plain_text(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("", encoding="utf-8")
    assert extract_text(path) == ""


def test_extract_text_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        extract_text(tmp_path / "nope.pdf")


def test_extract_text_image_only_pdf(tmp_path):
    path = tmp_path / "raster.pdf"
    make_image_only_pdf(path)
    with pytest.raises(NoTextLayerError):
        extract_text(path)


def test_extract_text_unsupported_extension(tmp_path):
    path = tmp_path / "doc.docx"
    path.write_text("hi", encoding="utf-8")
    with pytest.raises(UnsupportedFormatError):
        extract_text(path)


def test_extract_text_not_really_a_pdf(tmp_path):
    path = tmp_path / "fake.pdf"
    path.write_bytes(b"This is not a PDF")
    with pytest.raises(UnsupportedFormatError):
        extract_text(path)


# --------------------------------------------------------------- load_corpus

def test_load_corpus_orders_by_id(tmp_path):
    (tmp_path / "b.txt").write_text("beta", encoding="utf-8")
    (tmp_path / "a.txt").write_text("alpha", encoding="utf-8")
    corpus = load_corpus(tmp_path)
    assert [d.id for d in corpus.documents] == ["a", "b"]
    assert corpus.documents[0].clean_text == "alpha"


def test_load_corpus_199_documents(tmp_path):
    for i in range(199):
        (tmp_path / f"r{i:03d}.txt").write_text(f"report {i}", encoding="utf-8")
    corpus = load_corpus(tmp_path)
    assert len(corpus.documents) == 199


def test_load_corpus_empty_dir(tmp_path):
    with pytest.raises(EmptyCorpusError):
        load_corpus(tmp_path)


def test_load_corpus_missing_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_corpus(tmp_path / "absent")


def test_load_corpus_reports_failures_without_dropping_silently(tmp_path, capsys):
    (tmp_path / "good.txt").write_text("fine", encoding="utf-8")
    make_image_only_pdf(tmp_path / "bad.pdf")
    corpus = load_corpus(tmp_path)
    assert [d.id for d in corpus.documents] == ["good"]
    assert len(corpus.skipped) == 1
    assert "bad.pdf" in corpus.skipped[0][0]
    err = capsys.readouterr().err
    assert err.startswith("SKIP ") and "bad.pdf" in err


def test_load_corpus_txt_sidecar_wins_over_pdf(tmp_path, capsys):
    make_text_pdf(tmp_path / "r1.pdf", ["pdf body"])
    (tmp_path / "r1.txt").write_text("sidecar body", encoding="utf-8")
    corpus = load_corpus(tmp_path)
    assert len(corpus.documents) == 1
    doc = corpus.documents[0]
    assert doc.ingest_kind == "plain-text"
    assert doc.clean_text == "sidecar body"
    assert "SKIP" in capsys.readouterr().err


def test_load_corpus_deterministic(tmp_path):
    for name in ("x.txt", "y.txt"):
        (tmp_path / name).write_text(f"content of {name}", encoding="utf-8")
    assert load_corpus(tmp_path) == load_corpus(tmp_path)


def test_document_ids_unique_and_clean_text_invariants(tmp_path):
    (tmp_path / "one.txt").write_text("  spaced   out\ttext \n\n\n tail ", encoding="utf-8")
    corpus = load_corpus(tmp_path)
    doc = corpus.documents[0]
    assert doc.clean_text == "spaced out text\ntail"
    assert "  " not in doc.clean_text
    assert doc.clean_text == doc.clean_text.strip()
