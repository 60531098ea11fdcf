"""Prompt templates and assembly of retrieved context into completion prompts."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .chunking import Chunk
from .retrieval import ChunkRef, RetrievalResult


class EmptyContextError(Exception):
    """No retrieval results were supplied to assemble a prompt from."""


class UnresolvableChunkRefError(Exception):
    """A retrieval result points at a chunk missing from the lookup."""


CONTEXT_MARKER = "<<SEARCH_RESULTS>>"

# Default instruction and question shipped with the tool. The question lists
# the 14 radical-prostatectomy variables of the default extraction schema;
# both texts are overridable through a template file (HEADER / QUESTION).
DEFAULT_INSTRUCTION_HEADER = (
    "Compose a comprehensive reply to the query using the search results given. "
    "If the search results mention multiple subjects with the same name, create "
    "separate answers for each. Only include information found in the results and "
    "don't add any additional information. Make sure the answer is correct and "
    "don't output false content. If the text does not relate to the query, simply "
    "state 'Found Nothing'. Ignore outlier search results which has nothing to do "
    "with the question. Only answer what is asked. The answer should be short and "
    "concise."
)

DEFAULT_QUESTION_BODY = (
    "Complete the following list of variables with the corresponding values "
    "extracted from the given pathology report: pT-Stage, Primary Gleason Grade, "
    "Secondary Gleason Grade, Gleason Sum Score, Tertiary Gleason Pattern or "
    "Grade, Extraprostatic Extension, Seminal Vesical Invasion, Lymphovascular "
    "Invasion, Perineural Invasion, Surgical Margin Status, pN-Stage, Number of "
    "Lymph Nodes Removed, Number of Lymph Nodes Involved by Cancer, Specific "
    "Prostate Weight in g."
)


@dataclass(frozen=True)
class PromptTemplate:
    instruction_header: str
    question_body: str
    context_slot_marker: str = CONTEXT_MARKER

    def layout(self) -> str:
        text = f"{self.instruction_header}\n\n{self.context_slot_marker}\n\n{self.question_body}"
        if text.count(self.context_slot_marker) != 1:
            raise ValueError("context slot marker must occur exactly once in the layout")
        return text


@dataclass(frozen=True)
class AssembledPrompt:
    text: str
    doc_id: str
    included_chunk_refs: tuple[ChunkRef, ...]


def default_template() -> PromptTemplate:
    return PromptTemplate(DEFAULT_INSTRUCTION_HEADER, DEFAULT_QUESTION_BODY)


def assemble(template: PromptTemplate, results: list[RetrievalResult],
             chunks: Mapping[ChunkRef, Chunk], doc_id: str) -> AssembledPrompt:
    """Build the completion prompt: header, numbered search results, question.

    Chunks appear verbatim in descending score order, each prefixed "[i]".
    """
    if not results:
        raise EmptyContextError(f"{doc_id}: no retrieval results to include")
    ordered = sorted(results, key=lambda r: (-r.score, r.chunk_ref))
    blocks = []
    refs = []
    for i, result in enumerate(ordered, start=1):
        chunk = chunks.get(result.chunk_ref)
        if chunk is None:
            raise UnresolvableChunkRefError(f"unknown chunk {result.chunk_ref!r}")
        blocks.append(f"[{i}] {chunk.text}")
        refs.append(result.chunk_ref)
    context = "Search results:\n" + "\n".join(blocks)
    text = template.layout().replace(template.context_slot_marker, context)
    return AssembledPrompt(text=text, doc_id=doc_id, included_chunk_refs=tuple(refs))


def load_template(path: str | Path) -> PromptTemplate:
    """Read a template override file with HEADER / QUESTION sections.

    A line consisting of ``HEADER`` or ``QUESTION`` (optionally with a
    trailing colon) starts the section; the section body is the following
    lines, stripped.
    """
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        name = line.strip().rstrip(":").upper()
        if name in ("HEADER", "QUESTION"):
            current = sections.setdefault(name, [])
            continue
        if current is not None:
            current.append(line)
    missing = {"HEADER", "QUESTION"} - set(sections)
    if missing:
        raise ValueError(f"template file {path} missing section(s): {', '.join(sorted(missing))}")
    header = "\n".join(sections["HEADER"]).strip()
    question = "\n".join(sections["QUESTION"]).strip()
    if not header or not question:
        raise ValueError(f"template file {path} has an empty HEADER or QUESTION section")
    return PromptTemplate(header, question)


def dump_template(template: PromptTemplate, path: str | Path) -> None:
    Path(path).write_text(
        f"HEADER\n{template.instruction_header}\n\nQUESTION\n{template.question_body}\n",
        encoding="utf-8",
    )
