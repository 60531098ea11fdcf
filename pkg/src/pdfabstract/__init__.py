"""Schema-driven zero-shot data abstraction from text-layer PDF reports.

Pipeline: load a document folder, chunk and embed the text, retrieve the
chunks relevant to the variable list, prompt a completion backend, and
normalize the answers into a closed-domain output table. A statistical
harness (consensus ground truth, Wilson intervals, McNemar, non-inferiority,
paired t-tests) benchmarks extraction quality against human abstractors.
"""

from .chunking import Chunk, ChunkingConfig, EmbeddingVector, LocalHashedEmbedder, RemoteEmbedder, chunk, embed
from .completion import BackendConfig, CompletionRequest, CompletionResponse, complete, mock_rules_answer
from .corpus import Corpus, Document, clean_text, extract_text, load_corpus
from .evaluation import (
    PairedOutcomes,
    accuracy,
    consensus,
    mcnemar,
    mean_ci,
    noninferiority,
    paired_outcomes,
    paired_t_test,
    wilson_ci,
)
from .pipeline import RunConfig, extract_document, run_extraction
from .prompting import AssembledPrompt, PromptTemplate, assemble, default_template
from .retrieval import ChunkRef, RetrievalResult, VectorIndex, build_index, query
from .schema import (
    NOT_REPORTED,
    ExtractionRecord,
    ExtractionSchema,
    VariableSpec,
    build_record,
    default_schema,
    normalize,
    parse_response,
    read_table,
    write_table,
)

__version__ = "0.1.0"
