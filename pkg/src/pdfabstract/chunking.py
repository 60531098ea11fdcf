"""Sliding word-window chunking and pluggable chunk embedding.

Two embedding backends share one contract: a fully deterministic local
hashed-token embedder (no network, used throughout the test suite) and a
remote HTTP embedding service client.
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
import requests


class DimensionMismatchError(Exception):
    """A vector's dimension disagrees with the backend or index dimension."""


class BackendUnavailableError(Exception):
    """The embedding backend could not be reached."""


@dataclass(frozen=True)
class ChunkingConfig:
    words_per_chunk: int = 200
    overlap_words: int = 50

    def __post_init__(self) -> None:
        if self.words_per_chunk <= 0:
            raise ValueError("words_per_chunk must be positive")
        if not 0 <= self.overlap_words < self.words_per_chunk:
            raise ValueError("overlap_words must satisfy 0 <= overlap < words_per_chunk")

    @property
    def stride(self) -> int:
        return self.words_per_chunk - self.overlap_words


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    index: int
    text: str
    start_word: int


@dataclass(eq=False)
class EmbeddingVector:
    values: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("embedding must be a non-empty 1-d vector")
        self.dim = int(self.values.size)

    @property
    def is_zero(self) -> bool:
        """True for the all-zero sentinel emitted for empty text."""
        return not self.values.any()


def chunk(clean_text: str, cfg: ChunkingConfig, doc_id: str = "") -> list[Chunk]:
    """Split text into overlapping word windows.

    Words are whitespace-delimited tokens. Windows are ``words_per_chunk``
    wide and start every ``stride`` words; the final window may be shorter.
    Empty text yields no chunks.
    """
    words = clean_text.split()
    out = []
    for i, start in enumerate(range(0, len(words), cfg.stride)):
        window = words[start : start + cfg.words_per_chunk]
        out.append(Chunk(doc_id=doc_id, index=i, text=" ".join(window), start_word=start))
    return out


class EmbeddingBackend(ABC):
    """Maps texts to fixed-dimension unit vectors (all-zero for empty text)."""

    dim: int

    @abstractmethod
    def embed_texts(self, texts: list[str]) -> list[EmbeddingVector]:
        raise NotImplementedError

    def embed_one(self, text: str) -> EmbeddingVector:
        return self.embed_texts([text])[0]


class LocalHashedEmbedder(EmbeddingBackend):
    """Deterministic hashed token-frequency embedder.

    Tokens (lowercased, whitespace-split) are hashed into ``dim`` frequency
    bins with a keyed BLAKE2 hash, then the vector is L2-normalized. Stable
    across runs and platforms; needs no model or network.
    """

    def __init__(self, dim: int = 512, seed: int = 0) -> None:
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self._key = seed.to_bytes(8, "big", signed=True)

    def _bin(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest()
        return int.from_bytes(digest, "big") % self.dim

    def embed_texts(self, texts: list[str]) -> list[EmbeddingVector]:
        out = []
        for text in texts:
            vec = np.zeros(self.dim, dtype=np.float64)
            for token in text.lower().split():
                vec[self._bin(token)] += 1.0
            norm = np.linalg.norm(vec)
            if norm > 0:
                vec /= norm
            out.append(EmbeddingVector(vec))
        return out


class RemoteEmbedder(EmbeddingBackend):
    """Client for an HTTP embedding service.

    Protocol: POST JSON ``{"texts": [...]}``, response ``{"vectors": [[...], ...]}``.
    Returned vectors are re-normalized so downstream code can rely on unit norm.
    """

    def __init__(self, endpoint: str, dim: int, auth_token: str | None = None,
                 timeout: float = 30.0, session: requests.Session | None = None) -> None:
        self.endpoint = endpoint
        self.dim = dim
        self._headers = {"Authorization": f"Bearer {auth_token}"} if auth_token else {}
        self._timeout = timeout
        self._session = session or requests.Session()

    def embed_texts(self, texts: list[str]) -> list[EmbeddingVector]:
        try:
            resp = self._session.post(self.endpoint, json={"texts": texts},
                                      headers=self._headers, timeout=self._timeout)
            resp.raise_for_status()
            vectors = resp.json()["vectors"]
        except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
            raise BackendUnavailableError(f"embedding service failed: {type(exc).__name__}") from exc
        if len(vectors) != len(texts):
            raise DimensionMismatchError(f"service returned {len(vectors)} vectors for {len(texts)} texts")
        out = []
        for values in vectors:
            arr = np.asarray(values, dtype=np.float64)
            if arr.ndim != 1 or arr.size != self.dim:
                raise DimensionMismatchError(f"expected dim {self.dim}, got shape {arr.shape}")
            norm = np.linalg.norm(arr)
            if norm > 0:
                arr = arr / norm
            out.append(EmbeddingVector(arr))
        return out


def embed(chunks: list[Chunk], backend: EmbeddingBackend) -> list[EmbeddingVector]:
    """Embed chunk texts, one vector per chunk, order preserved."""
    vectors = backend.embed_texts([c.text for c in chunks])
    if len(vectors) != len(chunks):
        raise DimensionMismatchError(f"backend returned {len(vectors)} vectors for {len(chunks)} chunks")
    for v in vectors:
        if v.dim != backend.dim:
            raise DimensionMismatchError(f"backend dim {backend.dim}, vector dim {v.dim}")
    return vectors
