import pytest

from pdfabstract.chunking import Chunk
from pdfabstract.prompting import (
    EmptyContextError,
    PromptTemplate,
    UnresolvableChunkRefError,
    assemble,
    default_template,
    dump_template,
    load_template,
)
from pdfabstract.retrieval import ChunkRef, RetrievalResult


def make_chunks():
    chunks = {
        ChunkRef("doc", 0): Chunk("doc", 0, "Gleason score is 3+4=7 in this specimen.", 0),
        ChunkRef("doc", 1): Chunk("doc", 1, "Surgical margins are negative.", 150),
    }
    results = [
        RetrievalResult(ChunkRef("doc", 1), 0.7),
        RetrievalResult(ChunkRef("doc", 0), 0.9),
    ]
    return chunks, results


def test_default_template_contains_variable_list():
    t = default_template()
    assert "Tertiary Gleason Pattern or Grade" in t.question_body
    assert t.question_body.startswith("Complete the following list of variables")
    assert "Specific Prostate Weight in g" in t.question_body


def test_default_template_instruction_clauses():
    t = default_template()
    assert "don't output false content" in t.instruction_header
    assert "simply state 'Found Nothing'" in t.instruction_header
    assert "Ignore outlier search results" in t.instruction_header
    assert "The answer should be short and concise." in t.instruction_header


def test_default_template_marker_occurs_once():
    t = default_template()
    assert t.layout().count(t.context_slot_marker) == 1


def test_marker_collision_rejected():
    t = PromptTemplate("header <<SEARCH_RESULTS>>", "question")
    with pytest.raises(ValueError):
        t.layout()


def test_assemble_orders_by_score_descending():
    chunks, results = make_chunks()
    prompt = assemble(default_template(), results, chunks, "doc")
    assert prompt.text.index("[1] Gleason score") < prompt.text.index("[2] Surgical margins")
    assert prompt.included_chunk_refs == (ChunkRef("doc", 0), ChunkRef("doc", 1))


def test_assemble_includes_chunks_verbatim():
    chunks, results = make_chunks()
    prompt = assemble(default_template(), results, chunks, "doc")
    for chunk in chunks.values():
        assert chunk.text in prompt.text
    assert default_template().question_body in prompt.text
    assert default_template().instruction_header in prompt.text


def test_assemble_deterministic():
    chunks, results = make_chunks()
    a = assemble(default_template(), results, chunks, "doc")
    b = assemble(default_template(), list(results), dict(chunks), "doc")
    assert a.text == b.text


def test_assemble_length_arithmetic():
    # layout: header \n\n "Search results:\n" [i] chunks joined by \n, \n\n body
    template = PromptTemplate("HDR", "QST?")
    chunks, results = make_chunks()
    prompt = assemble(template, results, chunks, "doc")
    chunk_by_ref = {ref: chunks[ref].text for ref in chunks}
    expected = (
        len("HDR") + 2 + len("Search results:") + 1
        + len("[1] ") + len(chunk_by_ref[ChunkRef("doc", 0)])
        + 1
        + len("[2] ") + len(chunk_by_ref[ChunkRef("doc", 1)])
        + 2 + len("QST?")
    )
    assert len(prompt.text) == expected


def test_assemble_empty_results():
    chunks, _ = make_chunks()
    with pytest.raises(EmptyContextError):
        assemble(default_template(), [], chunks, "doc")


def test_assemble_unresolvable_ref():
    _, results = make_chunks()
    with pytest.raises(UnresolvableChunkRefError):
        assemble(default_template(), results, {}, "doc")


def test_template_file_round_trip(tmp_path):
    path = tmp_path / "template.txt"
    dump_template(default_template(), path)
    loaded = load_template(path)
    chunks, results = make_chunks()
    original = assemble(default_template(), results, chunks, "doc")
    reloaded = assemble(loaded, results, chunks, "doc")
    assert original.text == reloaded.text


def test_template_file_custom_sections(tmp_path):
    path = tmp_path / "template.txt"
    path.write_text("HEADER\nBe terse.\n\nQUESTION\nList the author name.\n", encoding="utf-8")
    t = load_template(path)
    assert t.instruction_header == "Be terse."
    assert t.question_body == "List the author name."


def test_template_file_missing_section(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("HEADER\nonly a header\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_template(path)
