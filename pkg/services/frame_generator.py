"""
Frame Generator Service.
Generates random schema-valid frames and gold datasets for desk-scale
experiments and tests.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from services.frame_core import FrameTree, IntentNode, SlotNode, serialize
from services.records import DatasetRecord

# Configure logging
logger = logging.getLogger(__name__)

DEFAULT_INTENTS = (
    "GET_EVENT", "GET_DIRECTIONS", "GET_ESTIMATED_DURATION", "GET_INFO_TRAFFIC",
    "GET_LOCATION", "GET_WEATHER", "CREATE_REMINDER", "SEND_MESSAGE",
    "PLAY_MUSIC", "UPDATE_TIMER",
)
DEFAULT_SLOTS = (
    "DATE_TIME", "LOCATION", "DESTINATION", "SOURCE", "CATEGORY_EVENT",
    "NAME_EVENT", "ORGANIZER_EVENT", "WEATHER_ATTRIBUTE", "TODO", "RECIPIENT",
    "CONTENT_EXACT", "MUSIC_GENRE", "METHOD_TRAVEL", "POINT_ON_MAP",
)
DEFAULT_OOD_INTENTS = ("UNSUPPORTED", "UNSUPPORTED_EVENT")
DEFAULT_WORDS = (
    "fireworks", "tonight", "on", "monday", "the", "concert", "downtown", "home",
    "work", "traffic", "rain", "tomorrow", "mom", "jazz", "by", "car", "park",
    "festival", "at", "noon", "beach", "airport", "friday", "dinner",
)
FILLER_WORDS = ("where", "can", "i", "please", "what", "is", "how", "long", "to", "a")
DEFAULT_LANGUAGES = ("en", "es", "fr", "de", "hi", "th")
DEFAULT_DOMAINS = ("event", "navigation", "reminder", "weather", "messaging", "music")


@dataclass(frozen=True)
class Vocabulary:
    """Labels, copy words and shape parameters used to draw random trees."""
    intents: Tuple[str, ...] = DEFAULT_INTENTS
    slots: Tuple[str, ...] = DEFAULT_SLOTS
    words: Tuple[str, ...] = DEFAULT_WORDS
    ood_intents: Tuple[str, ...] = DEFAULT_OOD_INTENTS
    max_slots: int = 3
    max_span: int = 3
    nest_probability: float = 0.35
    empty_span_probability: float = 0.03

    @classmethod
    def synthetic(cls, n_intents: int, n_slots: int, n_words: int = 40, **kwargs) -> "Vocabulary":
        """Generated label names, e.g. for large-vocabulary property checks."""
        return cls(
            intents=tuple(f"INTENT_{i}" for i in range(n_intents)),
            slots=tuple(f"SLOT_{i}" for i in range(n_slots)),
            words=tuple(f"w{i}" for i in range(n_words)),
            **kwargs,
        )


def _pick(rng: np.random.Generator, items: Sequence[str]) -> str:
    return items[int(rng.integers(len(items)))]


def _intent(rng: np.random.Generator, vocab: Vocabulary, budget: int, force: bool) -> IntentNode:
    label = _pick(rng, vocab.intents)
    if budget < 2:
        return IntentNode(label)
    low = 1 if force else 0
    n_slots = int(rng.integers(low, vocab.max_slots + 1))
    slots = tuple(_slot(rng, vocab, budget - 1, force and i == 0) for i in range(n_slots))
    return IntentNode(label, slots)


def _slot(rng: np.random.Generator, vocab: Vocabulary, budget: int, force: bool) -> SlotNode:
    label = _pick(rng, vocab.slots)
    if budget >= 2 and (force or rng.random() < vocab.nest_probability):
        return SlotNode(label, children=(_intent(rng, vocab, budget - 1, force),))
    if not force and rng.random() < vocab.empty_span_probability:
        return SlotNode(label)
    length = int(rng.integers(1, vocab.max_span + 1))
    return SlotNode(label, leaf_span=tuple(_pick(rng, vocab.words) for _ in range(length)))


def random_tree(rng: np.random.Generator, vocab: Vocabulary = Vocabulary(), max_depth: int = 4,
                exact_depth: bool = False) -> FrameTree:
    """
    Draw a random schema-valid tree.

    Args:
        rng: numpy Generator
        vocab: Label and word inventory
        max_depth: Depth bound (intent and slot levels both count)
        exact_depth: Force one branch to reach max_depth exactly

    Returns:
        FrameTree with depth <= max_depth (== max_depth when exact_depth)
    """
    if max_depth < 1:
        raise ValueError(f"max_depth must be at least 1, got {max_depth}")
    return FrameTree(_intent(rng, vocab, max_depth, exact_depth))


def _leaf_words(node: IntentNode) -> List[str]:
    words: List[str] = []
    for slot in node.children:
        for child in slot.children:
            words.extend(_leaf_words(child))
        words.extend(slot.leaf_span)
    return words


def _utterance(rng: np.random.Generator, tree: FrameTree) -> str:
    words = [_pick(rng, FILLER_WORDS) for _ in range(int(rng.integers(1, 4)))]
    for word in _leaf_words(tree.root):
        words.append(word)
        if rng.random() < 0.3:
            words.append(_pick(rng, FILLER_WORDS))
    return " ".join(words)


def generate_dataset(n: int, seed: int, vocab: Vocabulary = Vocabulary(), max_depth: int = 4,
                     ood_rate: float = 0.05, depths: Optional[Sequence[int]] = None,
                     languages: Sequence[str] = DEFAULT_LANGUAGES,
                     domains: Sequence[str] = DEFAULT_DOMAINS) -> List[DatasetRecord]:
    """
    Generate a synthetic gold dataset.

    Args:
        n: Number of records
        seed: Generator seed
        vocab: Label and word inventory
        max_depth: Depth bound for random trees
        ood_rate: Share of records with an out-of-domain frame such as [IN:UNSUPPORTED ]
        depths: When given, record i gets a tree of exactly depths[i % len(depths)]
        languages: Language tags cycled at random
        domains: Domain tags cycled at random

    Returns:
        List of DatasetRecord with schema-valid frames
    """
    rng = np.random.default_rng(seed)
    records: List[DatasetRecord] = []
    for i in range(n):
        target = depths[i % len(depths)] if depths else None
        if vocab.ood_intents and (target in (None, 1)) and rng.random() < ood_rate:
            tree = FrameTree(IntentNode(_pick(rng, vocab.ood_intents)))
        elif target is not None:
            tree = random_tree(rng, vocab, target, exact_depth=True)
        else:
            tree = random_tree(rng, vocab, max_depth)
        records.append(DatasetRecord(
            utterance=_utterance(rng, tree),
            frame=serialize(tree),
            language=_pick(rng, languages),
            domain=_pick(rng, domains),
        ))

    logger.info(f"Generated {len(records)} synthetic records (seed={seed})")
    return records
