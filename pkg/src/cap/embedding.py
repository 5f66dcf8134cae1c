"""Text-to-vector mapping and cosine similarity.

The reference embedder is a deterministic hashed bag-of-words: lowercase, split
on non-alphanumerics, FNV-1a 64-bit per token, signed accumulation into 256
buckets, L2 normalization. It exists so the whole pipeline runs offline and
every score is reproducible bit-for-bit; remote sentence-embedding providers
plug in behind the same embed() surface (see upstream.RemoteEmbedder).
"""

from __future__ import annotations

import math
import re
import threading
from dataclasses import dataclass
from typing import Protocol


class DimensionMismatch(ValueError):
    """Cosine over vectors of different dimension or embedder."""


class ProviderUnavailable(RuntimeError):
    """Remote embedding provider failed after retry."""


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    embedder_id: str

    @property
    def dim(self) -> int:
        return len(self.values)


class Embedder(Protocol):
    embedder_id: str

    def embed(self, text: str) -> EmbeddingVector: ...


_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


class ReferenceEmbedder:
    """Deterministic 256-dim hashed bag-of-words embedder."""

    DIM = 256
    embedder_id = "fnv1a-bag-256"

    def embed(self, text: str) -> EmbeddingVector:
        counts = [0.0] * self.DIM
        for token in _TOKEN_RE.findall(text.lower()):
            h = _fnv1a64(token.encode("utf-8"))
            sign = 1.0 if (h >> 63) == 0 else -1.0
            counts[h % self.DIM] += sign
        norm = math.sqrt(math.fsum(v * v for v in counts))
        if norm == 0.0:
            return EmbeddingVector(tuple(counts), self.embedder_id)
        return EmbeddingVector(tuple(v / norm for v in counts), self.embedder_id)


class CachingEmbedder:
    """Session-scoped cache keyed by (text, embedder_id).

    History vectors are reused on every turn; caching bounds the per-turn
    embedding cost to the new texts only. Reads are lock-free on hit, writes
    are serialized.
    """

    def __init__(self, inner: Embedder):
        self.inner = inner
        self._cache: dict[tuple[str, str], EmbeddingVector] = {}
        self._lock = threading.Lock()

    @property
    def embedder_id(self) -> str:
        return self.inner.embedder_id

    def embed(self, text: str) -> EmbeddingVector:
        key = (text, self.inner.embedder_id)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        vec = self.inner.embed(text)
        with self._lock:
            self._cache[key] = vec
        return vec


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine similarity in [-1, 1]; 0.0 when either vector is zero."""
    if u.dim != v.dim:
        raise DimensionMismatch(f"dim {u.dim} vs {v.dim}")
    if u.embedder_id != v.embedder_id:
        raise DimensionMismatch(f"embedder {u.embedder_id!r} vs {v.embedder_id!r}")
    dot = math.fsum(a * b for a, b in zip(u.values, v.values))
    nu = math.sqrt(math.fsum(a * a for a in u.values))
    nv = math.sqrt(math.fsum(b * b for b in v.values))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    # clamp the float-rounding overshoot so downstream scores stay in [-1, 1]
    return max(-1.0, min(1.0, dot / (nu * nv)))
