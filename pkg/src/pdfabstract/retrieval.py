"""Exact nearest-neighbor search over chunk embeddings.

The index is an exhaustive cosine scan, not an approximation: corpora here
are small enough that exactness is free, and it makes results verifiable
against a brute-force oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .chunking import DimensionMismatchError, EmbeddingVector


class EmptyInputError(Exception):
    """An index cannot be built from zero vectors."""


class ChunkRef(NamedTuple):
    doc_id: str
    index: int


@dataclass(frozen=True)
class RetrievalResult:
    chunk_ref: ChunkRef
    score: float  # cosine similarity in [-1, 1]


class VectorIndex:
    """Immutable store of (chunk_ref, vector) entries with a fixed dimension."""

    def __init__(self, refs: tuple[ChunkRef, ...], matrix: np.ndarray):
        self._refs = refs
        self._matrix = matrix
        # Per-row norms (not a batched axis-reduction): identical vectors must
        # get bit-identical norms so exact ties stay exact.
        self._norms = np.array([float(np.linalg.norm(row)) for row in matrix])
        self.dim = int(matrix.shape[1])

    def __len__(self) -> int:
        return len(self._refs)

    @property
    def entries(self) -> list[tuple[ChunkRef, EmbeddingVector]]:
        return [(ref, EmbeddingVector(row.copy())) for ref, row in zip(self._refs, self._matrix)]


def build_index(vectors: list[tuple[ChunkRef, EmbeddingVector]]) -> VectorIndex:
    if not vectors:
        raise EmptyInputError("cannot build an index from no vectors")
    dim = vectors[0][1].dim
    for ref, vec in vectors:
        if vec.dim != dim:
            raise DimensionMismatchError(f"{ref}: dim {vec.dim} != index dim {dim}")
    matrix = np.stack([vec.values for _, vec in vectors])
    return VectorIndex(tuple(ref for ref, _ in vectors), matrix)


def query(index: VectorIndex, q: EmbeddingVector, k: int) -> list[RetrievalResult]:
    """Top-k entries by exact cosine similarity.

    Results are sorted by score descending; exact ties order by
    (doc_id, chunk index) ascending. Zero vectors score 0 against everything.
    """
    if q.dim != index.dim:
        raise DimensionMismatchError(f"query dim {q.dim} != index dim {index.dim}")
    if k < 1:
        raise ValueError("k must be >= 1")
    qnorm = float(np.linalg.norm(q.values))
    # Row-wise dots rather than one matrix-vector product: blocked BLAS
    # kernels can round identical rows differently by position, which would
    # turn exact ties into spurious near-ties.
    results = []
    for ref, row, norm in zip(index._refs, index._matrix, index._norms):
        denom = norm * qnorm
        score = float(np.dot(row, q.values)) / denom if denom > 0.0 else 0.0
        results.append(RetrievalResult(ref, score))
    results.sort(key=lambda r: (-r.score, r.chunk_ref))
    return results[: min(k, len(results))]
