"""
Tests for random frames and synthetic datasets.
"""

import time

import numpy as np
import pytest

from services.frame_core import depth, is_schema_valid, parse, serialize, tokenize
from services.frame_generator import (
    DEFAULT_OOD_INTENTS,
    Vocabulary,
    generate_dataset,
    random_tree,
)


def test_random_tree_respects_max_depth():
    """Test the depth bound."""
    rng = np.random.default_rng(0)
    for _ in range(200):
        assert depth(random_tree(rng, max_depth=5)) <= 5


@pytest.mark.parametrize("target", [1, 2, 3, 4, 5, 6, 7, 8])
def test_random_tree_exact_depth(target):
    """Test that exact_depth reaches the requested depth."""
    rng = np.random.default_rng(target)
    for _ in range(20):
        assert depth(random_tree(rng, max_depth=target, exact_depth=True)) == target


def test_random_tree_rejects_zero_depth():
    """Test the depth lower bound."""
    with pytest.raises(ValueError):
        random_tree(np.random.default_rng(0), max_depth=0)


def test_round_trip_on_ten_thousand_frames():
    """Test tokenize -> parse -> serialize identity on a 60-label vocabulary within 10 s."""
    rng = np.random.default_rng(99)
    vocab = Vocabulary.synthetic(30, 30)
    texts = [serialize(random_tree(rng, vocab, max_depth=8)) for _ in range(10000)]

    start = time.perf_counter()
    round_tripped = [serialize(parse(tokenize(text))) for text in texts]
    elapsed = time.perf_counter() - start

    assert round_tripped == texts
    assert elapsed < 10.0


def test_generate_dataset_is_deterministic():
    """Test that equal seeds give equal datasets."""
    assert generate_dataset(50, seed=5) == generate_dataset(50, seed=5)
    assert generate_dataset(50, seed=5) != generate_dataset(50, seed=6)


def test_generate_dataset_frames_are_valid():
    """Test that every generated frame is schema-valid and tagged."""
    for record in generate_dataset(300, seed=1):
        assert is_schema_valid(record.frame)
        assert record.utterance
        assert record.language and record.domain


def test_generate_dataset_depth_cycle():
    """Test exact depths cycled over records."""
    records = generate_dataset(60, seed=2, depths=[1, 2, 3, 4, 5, 6], ood_rate=0.0)
    assert [depth(parse(r.frame)) for r in records] == [1, 2, 3, 4, 5, 6] * 10


def test_generate_dataset_ood_frames():
    """Test that out-of-domain frames are bare roots."""
    records = generate_dataset(400, seed=3, ood_rate=0.2)
    ood = [r for r in records if parse(r.frame).root.label in DEFAULT_OOD_INTENTS]

    assert 40 < len(ood) < 120
    assert all(parse(r.frame).root.children == () for r in ood)


def test_utterance_contains_leaf_words():
    """Test that copied span words appear in the utterance."""
    for record in generate_dataset(100, seed=4):
        words = record.utterance.split()
        for token in tokenize(record.frame):
            if token.text is not None:
                assert token.text in words
