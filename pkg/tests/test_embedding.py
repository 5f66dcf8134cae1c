import math
import random

import pytest

from cap.embedding import (
    CachingEmbedder,
    DimensionMismatch,
    EmbeddingVector,
    ReferenceEmbedder,
    cosine,
)
from oracle import hashed_bag, np_cosine


def vec(*values, embedder_id="test"):
    return EmbeddingVector(tuple(float(v) for v in values), embedder_id)


def test_empty_text_gives_zero_vector():
    v = ReferenceEmbedder().embed("")
    assert v.dim == 256
    assert all(x == 0.0 for x in v.values)


def test_embed_is_deterministic():
    e = ReferenceEmbedder()
    assert e.embed("alpha beta") == e.embed("alpha beta")


def test_repeated_token_keeps_direction():
    # counts scale, L2 normalization cancels the scale
    e = ReferenceEmbedder()
    assert cosine(e.embed("alpha"), e.embed("alpha alpha")) == pytest.approx(1.0, abs=1e-12)


def test_embed_matches_independent_hashing_rule():
    e = ReferenceEmbedder()
    for text in ("alpha", "alpha beta", "The QUICK brown-fox", "naïve café 42"):
        expected = hashed_bag(text)
        got = e.embed(text).values
        assert max(abs(a - b) for a, b in zip(got, expected)) < 1e-12


def test_tokenization_ignores_punctuation_and_case():
    e = ReferenceEmbedder()
    assert e.embed("Alpha, BETA!") == e.embed("alpha beta")


def test_unit_norm_or_zero():
    e = ReferenceEmbedder()
    rng = random.Random(3)
    words = ["one", "two", "three", "four", "five", "", "  ", "!!"]
    for _ in range(50):
        text = " ".join(rng.choice(words) for _ in range(rng.randint(0, 6)))
        v = e.embed(text)
        norm = math.sqrt(sum(x * x for x in v.values))
        assert norm == 0.0 or abs(norm - 1.0) < 1e-12


def test_cosine_identity():
    u = vec(1, 2, 3)
    assert cosine(u, u) == pytest.approx(1.0, abs=1e-12)


def test_cosine_orthogonal():
    assert cosine(vec(1, 0), vec(0, 1)) == 0.0


def test_cosine_scale_invariant():
    u = vec(1, 2, 3)
    assert cosine(u, vec(3, 6, 9)) == pytest.approx(1.0, abs=1e-12)


def test_cosine_zero_vector_is_zero():
    assert cosine(vec(0, 0), vec(1, 1)) == 0.0


def test_cosine_symmetry_and_bound():
    rng = random.Random(11)
    for _ in range(200):
        dim = rng.randint(1, 8)
        u = vec(*(rng.uniform(-5, 5) for _ in range(dim)))
        v = vec(*(rng.uniform(-5, 5) for _ in range(dim)))
        c = cosine(u, v)
        assert c == cosine(v, u)
        assert abs(c) <= 1.0 + 1e-12
        assert c == pytest.approx(np_cosine(u.values, v.values), abs=1e-9)


def test_cosine_rejects_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        cosine(vec(1, 2), vec(1, 2, 3))


def test_cosine_rejects_embedder_mismatch():
    with pytest.raises(DimensionMismatch):
        cosine(vec(1, 2, embedder_id="a"), vec(1, 2, embedder_id="b"))


class CountingEmbedder:
    embedder_id = "counting"

    def __init__(self):
        self.calls = 0

    def embed(self, text):
        self.calls += 1
        return EmbeddingVector((float(len(text)),), self.embedder_id)


def test_cache_hits_skip_inner_embedder():
    inner = CountingEmbedder()
    cached = CachingEmbedder(inner)
    first = cached.embed("hello")
    second = cached.embed("hello")
    assert first == second
    assert inner.calls == 1
    cached.embed("other")
    assert inner.calls == 2
