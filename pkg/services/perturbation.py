"""
Perturbation Service.
Injects one controlled error of a given taxonomy type into a gold frame and
synthesizes per-token probabilities, producing labeled desk-scale corpora.

Randomness: numpy's PCG64 generator (numpy.random.default_rng) seeded with the
integer seed of the PerturbationSpec. Per-record seeds in a corpus are
seed XOR record index.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from services.error_taxonomy import DEFAULT_OOD_PREFIX, ErrorType
from services.errors import EmptyCorpus, TypeNotApplicable
from services.frame_core import (
    FrameLike,
    FrameToken,
    TokenKind,
    TokenSeq,
    as_token_seq,
    frame_labels,
    parse,
    tokenize,
)
from services.records import PredictionRecord

# Configure logging
logger = logging.getLogger(__name__)

UNKNOWN_COPY_TEXT = "<unk>"
SEED_MASK = (1 << 64) - 1


class Variant(Enum):
    """Concrete edit used to realize an error type."""
    DROP_FIRST = "drop_first"
    SUBSTITUTE = "substitute"
    CLOSE_TO_COPY = "close_to_copy"
    COPY_TO_CLOSE = "copy_to_close"
    DELETE_CLOSE = "delete_close"


VARIANTS_BY_TYPE = {
    ErrorType.LEAF: (Variant.DROP_FIRST, Variant.SUBSTITUTE),
    ErrorType.MODE: (Variant.CLOSE_TO_COPY, Variant.COPY_TO_CLOSE, Variant.DELETE_CLOSE),
}


@dataclass(frozen=True)
class Ontology:
    """Label inventory of a dataset."""
    intent_labels: frozenset
    slot_labels: frozenset
    ood_labels: frozenset = frozenset()

    def __post_init__(self):
        if not self.intent_labels:
            raise ValueError("Ontology needs at least one intent label")
        if not self.slot_labels:
            raise ValueError("Ontology needs at least one slot label")
        if not self.ood_labels <= self.intent_labels:
            extra = sorted(self.ood_labels - self.intent_labels)
            raise ValueError(f"OOD labels must be intent labels, got extra: {', '.join(extra)}")

    @property
    def in_domain_intents(self) -> frozenset:
        return self.intent_labels - self.ood_labels


@dataclass(frozen=True)
class ProbProfile:
    """Target mean token probability for correct and incorrect frames, plus uniform jitter."""
    correct_mean: float = 0.9
    incorrect_mean: float = 0.6
    jitter: float = 0.02

    def __post_init__(self):
        for name in ("correct_mean", "incorrect_mean"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {value}")
        if not 0.0 <= self.jitter < 1.0:
            raise ValueError(f"jitter must be in [0, 1), got {self.jitter}")
        if self.incorrect_mean >= self.correct_mean:
            raise ValueError(
                f"incorrect_mean ({self.incorrect_mean}) must be below correct_mean ({self.correct_mean})"
            )
        bound = min(self.correct_mean, 1 - self.correct_mean, self.incorrect_mean, 1 - self.incorrect_mean)
        if self.jitter >= bound:
            raise ValueError(f"jitter ({self.jitter}) must stay below {bound} so probabilities remain in (0, 1)")

    @classmethod
    def parse(cls, value: str) -> "ProbProfile":
        """
        Parse 'correct,incorrect,jitter', e.g. '0.9,0.6,0.02'.

        Raises:
            ValueError: If the string is not three comma-separated numbers
        """
        parts = [part.strip() for part in value.split(",")]
        if len(parts) != 3:
            raise ValueError(f"Probability profile must be 'correct,incorrect,jitter' (e.g. 0.9,0.6,0.02), got '{value}'")
        try:
            correct, incorrect, jitter = (float(part) for part in parts)
        except ValueError as e:
            raise ValueError(f"Probability profile must contain numbers, got '{value}'") from e
        return cls(correct, incorrect, jitter)


@dataclass(frozen=True)
class PerturbationSpec:
    """What to inject and how to seed it."""
    error_type: ErrorType
    seed: int = 0
    prob_profile: ProbProfile = ProbProfile()
    variant: Optional[Variant] = None

    def __post_init__(self):
        if not 0 <= self.seed <= SEED_MASK:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.variant is not None and self.variant not in VARIANTS_BY_TYPE.get(self.error_type, ()):
            raise ValueError(f"Variant {self.variant.value} does not realize {self.error_type.value} errors")


def scan_ontology(frames: Iterable[FrameLike], ood_prefix: str = DEFAULT_OOD_PREFIX) -> Ontology:
    """
    Collect every intent and slot label used by schema-valid frames.

    Raises:
        EmptyCorpus: If no frames are given
        NotSchemaValid: If a frame is not schema-valid
    """
    intents: set = set()
    slots: set = set()
    count = 0
    for frame in frames:
        tree_intents, tree_slots = frame_labels(parse(frame))
        intents |= tree_intents
        slots |= tree_slots
        count += 1

    if count == 0:
        raise EmptyCorpus("Cannot scan an ontology from an empty corpus")

    ood = frozenset(label for label in intents if label.startswith(ood_prefix))
    logger.info(f"Scanned ontology from {count} frames: {len(intents)} intents "
                f"({len(ood)} out-of-domain), {len(slots)} slots")
    return Ontology(frozenset(intents), frozenset(slots), ood)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed & SEED_MASK)


def _smallest_other(labels: Iterable[str], current: str) -> Optional[str]:
    alternatives = sorted(label for label in labels if label != current)
    return alternatives[0] if alternatives else None


def _substitute(tokens: Sequence[FrameToken], position: int, token: FrameToken) -> Tuple[FrameToken, ...]:
    return tuple(tokens[:position]) + (token,) + tuple(tokens[position + 1:])


def _delete(tokens: Sequence[FrameToken], position: int) -> Tuple[FrameToken, ...]:
    return tuple(tokens[:position]) + tuple(tokens[position + 1:])


def _label_edits(tokens: Sequence[FrameToken], kind: TokenKind, labels: Iterable[str],
                 skip_root: bool) -> List[Tuple[int, FrameToken]]:
    labels = list(labels)
    edits = []
    for i, token in enumerate(tokens):
        if token.kind is not kind or (skip_root and i == 0):
            continue
        replacement = _smallest_other(labels, token.label)
        if replacement is not None:
            edits.append((i, FrameToken(kind, label=replacement)))
    return edits


def _intent_edits(tokens: Sequence[FrameToken], ontology: Ontology) -> List[Tuple[int, FrameToken]]:
    # Root edits are kept only when neither label is out-of-domain, otherwise they classify as OOD.
    skip_root = tokens[0].label in ontology.ood_labels
    return _label_edits(tokens, TokenKind.OPEN_INTENT, ontology.in_domain_intents, skip_root)


def _ood_edit(tokens: Sequence[FrameToken], ontology: Ontology) -> List[Tuple[int, FrameToken]]:
    root = tokens[0].label
    if root in ontology.ood_labels:
        replacement = _smallest_other(ontology.in_domain_intents, root)
    else:
        replacement = _smallest_other(ontology.ood_labels, root)
    if replacement is None:
        return []
    return [(0, FrameToken.open_intent(replacement))]


def _copy_texts(tokens: Sequence[FrameToken]) -> List[str]:
    return sorted({token.text for token in tokens if token.kind is TokenKind.COPY})


def _leaf_candidates(tokens: Sequence[FrameToken], variant: Variant) -> List[Tuple[int, Optional[FrameToken]]]:
    """(position, replacement) pairs; replacement None means deletion."""
    candidates: List[Tuple[int, Optional[FrameToken]]] = []
    texts = _copy_texts(tokens)
    for i, token in enumerate(tokens):
        if token.kind is not TokenKind.COPY:
            continue
        starts_span = i == 0 or tokens[i - 1].kind is not TokenKind.COPY
        if variant is Variant.DROP_FIRST:
            nxt = tokens[i + 1] if i + 1 < len(tokens) else None
            if starts_span and nxt is not None and nxt.kind is TokenKind.COPY and nxt.text != token.text:
                candidates.append((i, None))
        else:
            replacement = _smallest_other(texts, token.text) or token.text + token.text
            candidates.append((i, FrameToken.copy(replacement)))
    return candidates


def _mode_candidates(tokens: Sequence[FrameToken], variant: Variant) -> List[Tuple[int, Optional[FrameToken]]]:
    candidates: List[Tuple[int, Optional[FrameToken]]] = []
    texts = _copy_texts(tokens)
    for i, token in enumerate(tokens):
        if variant is Variant.CLOSE_TO_COPY and token.kind is TokenKind.CLOSE:
            previous = tokens[i - 1] if i > 0 else None
            if previous is not None and previous.kind is TokenKind.COPY:
                text = previous.text
            else:
                text = texts[0] if texts else UNKNOWN_COPY_TEXT
            candidates.append((i, FrameToken.copy(text)))
        elif variant is Variant.COPY_TO_CLOSE and token.kind is TokenKind.COPY:
            candidates.append((i, FrameToken.close()))
        elif variant is Variant.DELETE_CLOSE and token.kind is TokenKind.CLOSE:
            # only the last close of a run, so the first divergence is the deleted position
            nxt = tokens[i + 1] if i + 1 < len(tokens) else None
            if nxt is None or nxt.kind is not TokenKind.CLOSE:
                candidates.append((i, None))
    return candidates


def perturb(frame: FrameLike, spec: PerturbationSpec, ontology: Ontology) -> Tuple[TokenSeq, int]:
    """
    Inject exactly one edit realizing spec.error_type.

    Args:
        frame: Schema-valid gold frame
        spec: Error type, seed and optional variant
        ontology: Labels available for substitutions

    Returns:
        (perturbed tokens, injected position); the injected position is the
        first divergence from the gold frame

    Raises:
        NotSchemaValid: If the frame is not schema-valid
        TypeNotApplicable: If the frame cannot host the requested error

    Example:
        >>> ontology = Ontology(frozenset({"X"}), frozenset({"A", "B"}))
        >>> seq, pos = perturb("[IN:X [SL:A a ] ]", PerturbationSpec(ErrorType.SLOT), ontology)
        >>> seq.text(), pos
        ('[IN:X [SL:B a ] ]', 1)
    """
    seq = as_token_seq(frame)
    parse(seq)
    tokens = seq.tokens
    rng = _rng(spec.seed)
    error_type = spec.error_type

    if error_type is ErrorType.INTENT:
        candidates = _intent_edits(tokens, ontology)
    elif error_type is ErrorType.SLOT:
        candidates = _label_edits(tokens, TokenKind.OPEN_SLOT, ontology.slot_labels, skip_root=False)
    elif error_type is ErrorType.OOD:
        candidates = _ood_edit(tokens, ontology)
    else:
        if spec.variant is not None:
            variants = [spec.variant]
        else:
            variants = list(VARIANTS_BY_TYPE[error_type])
        finder = _leaf_candidates if error_type is ErrorType.LEAF else _mode_candidates
        by_variant = [(v, finder(tokens, v)) for v in variants]
        applicable = [(v, c) for v, c in by_variant if c]
        if not applicable:
            raise TypeNotApplicable(
                f"Frame '{_tokens_text(tokens)}' cannot host a {error_type.value} error"
                + (f" ({spec.variant.value})" if spec.variant else "")
            )
        _, candidates = applicable[int(rng.integers(len(applicable)))]

    if not candidates:
        raise TypeNotApplicable(f"Frame '{_tokens_text(tokens)}' cannot host a {error_type.value} error")

    position, replacement = candidates[int(rng.integers(len(candidates)))]
    if replacement is None:
        edited = _delete(tokens, position)
    else:
        edited = _substitute(tokens, position, replacement)
    return TokenSeq(edited), position


def _tokens_text(tokens: Sequence[FrameToken]) -> str:
    return " ".join(token.surface for token in tokens)


def synth_probs(tokens: TokenSeq, is_correct: bool, spec: PerturbationSpec) -> List[float]:
    """
    Draw one probability per token around the profile's target mean.

    Values are target mean + Uniform[-jitter, jitter), drawn from the PerturbationSpec seed,
    so jitter 0 yields the exact mean for every token.

    Raises:
        ValueError: If tokens is empty
    """
    if len(tokens) == 0:
        raise ValueError("Cannot synthesize probabilities for an empty sequence")

    profile = spec.prob_profile
    mean = profile.correct_mean if is_correct else profile.incorrect_mean
    if profile.jitter == 0:
        return [mean] * len(tokens)

    noise = _rng(spec.seed).uniform(-profile.jitter, profile.jitter, size=len(tokens))
    return [float(value) for value in mean + noise]


def record_seed(seed: int, index: int) -> int:
    """Per-record seed for data-parallel generation."""
    return (seed ^ index) & SEED_MASK


def build_perturbed_corpus(samples: Sequence[Tuple[str, str, Optional[str], Optional[str]]],
                           error_types: Sequence[ErrorType], seed: int, ontology: Ontology,
                           prob_profile: ProbProfile = ProbProfile(),
                           correct_fraction: float = 0.0,
                           variant: Optional[Variant] = None) -> Tuple[List[PredictionRecord], int]:
    """
    Turn gold samples into a labeled PredictionRecord corpus.

    Error types are assigned round-robin over records; with correct_fraction > 0
    a seeded share of records is kept unchanged as correct predictions.
    Records whose frame cannot host the assigned type are skipped.

    Args:
        samples: (utterance, frame, language, domain) tuples with schema-valid frames
        error_types: Types to inject, cycled over records
        seed: Corpus seed
        ontology: Label inventory for substitutions
        prob_profile: Probability profile for synthesized token_probs
        correct_fraction: Share of records left correct, in [0, 1)
        variant: Optional fixed variant for LEAF/MODE

    Returns:
        (records, number of skipped samples)
    """
    if not error_types:
        raise ValueError("At least one error type is required")
    if not 0.0 <= correct_fraction < 1.0:
        raise ValueError(f"correct_fraction must be in [0, 1), got {correct_fraction}")

    records: List[PredictionRecord] = []
    skipped = 0
    for index, (utterance, frame, language, domain) in enumerate(samples):
        per_seed = record_seed(seed, index)
        gold = tokenize(frame)
        error_type = error_types[index % len(error_types)]
        spec = PerturbationSpec(error_type, per_seed, prob_profile,
                                variant if error_type in VARIANTS_BY_TYPE else None)

        keep_correct = correct_fraction > 0 and _rng(per_seed).random() < correct_fraction
        if keep_correct:
            records.append(PredictionRecord(
                utterance=utterance, gold=gold.text(), pred=gold.text(),
                token_probs=tuple(synth_probs(gold, True, spec)),
                language=language, domain=domain,
            ))
            continue

        try:
            pred, position = perturb(gold, spec, ontology)
        except TypeNotApplicable as e:
            logger.debug(f"Skipping sample {index}: {e}")
            skipped += 1
            continue

        pred_text = pred.text()
        probs = tuple(synth_probs(pred, False, spec))
        records.append(PredictionRecord(
            utterance=utterance, gold=gold.text(), pred=pred_text, token_probs=probs,
            language=language, domain=domain,
            injected_type=error_type.value, injected_position=position,
        ))

    logger.info(f"Built perturbed corpus: {len(records)} records, {skipped} skipped")
    return records, skipped
