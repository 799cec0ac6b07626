"""
Error Taxonomy Service.
Locates the first error of a predicted frame and classifies it as an intent,
slot, out-of-domain, mode or leaf error; aggregates error distributions per
language, domain or gold depth.

Only the first error of a sequence is counted. When a teacher-forced output is
available the divergence is read from it (source FORCED); otherwise the first
mismatch after the longest common prefix of the free-running prediction is used
(source FREE_RUNNING_PREFIX).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Collection, Dict, Iterable, List, Optional, Tuple

from services.errors import MissingBucketKey
from services.frame_core import (
    FrameToken,
    TokenKind,
    TokenSeq,
    depth,
    is_tree_valid,
    parse,
)
from services.records import PredictionRecord

# Configure logging
logger = logging.getLogger(__name__)

DEFAULT_OOD_PREFIX = "UNSUPPORTED"
BUCKET_KEYS = ("language", "domain", "depth", "all")


class ErrorType(Enum):
    """Five-way error taxonomy."""
    INTENT = "intent"
    SLOT = "slot"
    OOD = "ood"
    MODE = "mode"
    LEAF = "leaf"

    @property
    def code(self) -> str:
        """Two-letter column code used in report tables."""
        return _ERROR_CODES[self]

    @classmethod
    def parse(cls, value: str) -> "ErrorType":
        key = value.strip().lower()
        for member in cls:
            if key in (member.value, member.code, member.name.lower()):
                return member
        raise ValueError(f"Unknown error type '{value}'. Expected one of: {', '.join(m.value for m in cls)}")


_ERROR_CODES = {
    ErrorType.INTENT: "in",
    ErrorType.SLOT: "sl",
    ErrorType.OOD: "od",
    ErrorType.MODE: "md",
    ErrorType.LEAF: "lf",
}


class DivergenceSource(Enum):
    FORCED = "forced"
    FREE_RUNNING_PREFIX = "free_running_prefix"


@dataclass(frozen=True)
class Divergence:
    """
    First position where the prediction leaves the gold frame.

    A token of None stands for the end of that sequence (premature stop or
    overrun), which always classifies as a mode error.
    """
    position: int
    gold_token: Optional[FrameToken]
    pred_token: Optional[FrameToken]
    source: DivergenceSource


@dataclass
class ErrorDistribution:
    """Error counts for one bucket plus the tree validity of its incorrect predictions."""
    bucket: str
    counts: Dict[ErrorType, int] = field(default_factory=lambda: {t: 0 for t in ErrorType})
    total: int = 0
    valid_count: int = 0
    records: int = 0
    sources: Dict[DivergenceSource, int] = field(default_factory=lambda: {s: 0 for s in DivergenceSource})

    @property
    def tree_validity_rate(self) -> Optional[float]:
        if self.total == 0:
            return None
        return self.valid_count / self.total

    def percentages(self) -> Dict[ErrorType, Optional[float]]:
        if self.total == 0:
            return {t: None for t in ErrorType}
        return {t: 100.0 * self.counts[t] / self.total for t in ErrorType}

    def add(self, error_type: Optional[ErrorType], valid: bool, source: Optional[DivergenceSource]) -> None:
        """Fold one record in; error_type None marks an exact match."""
        self.records += 1
        if error_type is None:
            return
        self.counts[error_type] += 1
        self.total += 1
        if valid:
            self.valid_count += 1
        if source is not None:
            self.sources[source] += 1

    def merge(self, other: "ErrorDistribution") -> "ErrorDistribution":
        """Combine two distributions of the same bucket."""
        if other.bucket != self.bucket:
            raise ValueError(f"Cannot merge bucket '{other.bucket}' into '{self.bucket}'")
        return ErrorDistribution(
            bucket=self.bucket,
            counts={t: self.counts[t] + other.counts[t] for t in ErrorType},
            total=self.total + other.total,
            valid_count=self.valid_count + other.valid_count,
            records=self.records + other.records,
            sources={s: self.sources[s] + other.sources[s] for s in DivergenceSource},
        )

    def to_dict(self) -> dict:
        rate = self.tree_validity_rate
        percentages = self.percentages()
        return {
            "bucket": self.bucket,
            "records": self.records,
            "incorrect": self.total,
            "counts": {t.value: self.counts[t] for t in ErrorType},
            "percentages": {
                t.value: (None if percentages[t] is None else round(percentages[t], 2)) for t in ErrorType
            },
            "tree_validity_rate": None if rate is None else round(rate, 4),
            "divergence_sources": {s.value: self.sources[s] for s in DivergenceSource},
        }


def is_ood_label(label: Optional[str], ood_labels: Optional[Collection[str]] = None,
                 ood_prefix: str = DEFAULT_OOD_PREFIX) -> bool:
    """An explicit label set wins; otherwise labels starting with the OOD prefix are out-of-domain."""
    if label is None:
        return False
    if ood_labels is not None:
        return label in ood_labels
    return label.startswith(ood_prefix)


def _first_mismatch(pred: TokenSeq, gold: TokenSeq) -> Optional[int]:
    for i, (p, g) in enumerate(zip(pred.tokens, gold.tokens)):
        if p != g:
            return i
    if len(pred) != len(gold):
        return min(len(pred), len(gold))
    return None


def first_divergence(pred: TokenSeq, gold: TokenSeq,
                     forced: Optional[TokenSeq] = None) -> Optional[Divergence]:
    """
    Find the first divergence between a prediction and the gold frame.

    Args:
        pred: Free-running predicted tokens
        gold: Gold tokens (schema-valid)
        forced: Optional teacher-forced argmax tokens; used instead of pred when given

    Returns:
        Divergence, or None when the compared sequence matches gold exactly
    """
    if forced is not None:
        candidate, source = forced, DivergenceSource.FORCED
    else:
        candidate, source = pred, DivergenceSource.FREE_RUNNING_PREFIX

    position = _first_mismatch(candidate, gold)
    if position is None:
        return None

    gold_token = gold[position] if position < len(gold) else None
    pred_token = candidate[position] if position < len(candidate) else None
    return Divergence(position, gold_token, pred_token, source)


def classify_error(div: Divergence, gold_root_label: str, pred_root_label: Optional[str],
                   ood_labels: Optional[Collection[str]] = None,
                   ood_prefix: str = DEFAULT_OOD_PREFIX) -> ErrorType:
    """
    Classify a divergence; the first matching rule wins.

    1. OOD: divergence at the root position and exactly one root label is out-of-domain
    2. INTENT: both tokens open intents with different labels
    3. SLOT: both tokens open slots with different labels
    4. LEAF: both tokens copies with different text
    5. MODE: anything else (kind confusion, misplaced close, premature stop)

    Example:
        >>> div = Divergence(0, FrameToken.open_intent("GET_EVENT"),
        ...                  FrameToken.open_intent("GET_DIRECTIONS"), DivergenceSource.FORCED)
        >>> classify_error(div, "GET_EVENT", "GET_DIRECTIONS")
        <ErrorType.INTENT: 'intent'>
    """
    if div.position == 0:
        gold_ood = is_ood_label(gold_root_label, ood_labels, ood_prefix)
        pred_ood = is_ood_label(pred_root_label, ood_labels, ood_prefix)
        if gold_ood != pred_ood:
            return ErrorType.OOD

    gold_token, pred_token = div.gold_token, div.pred_token
    if gold_token is None or pred_token is None or gold_token.kind is not pred_token.kind:
        return ErrorType.MODE

    if gold_token.kind is TokenKind.OPEN_INTENT and gold_token.label != pred_token.label:
        return ErrorType.INTENT
    if gold_token.kind is TokenKind.OPEN_SLOT and gold_token.label != pred_token.label:
        return ErrorType.SLOT
    if gold_token.kind is TokenKind.COPY and gold_token.text != pred_token.text:
        return ErrorType.LEAF
    return ErrorType.MODE


def _root_label(seq: Optional[TokenSeq]) -> Optional[str]:
    if seq is None or len(seq) == 0:
        return None
    first = seq[0]
    return first.label if first.kind is TokenKind.OPEN_INTENT else None


@dataclass(frozen=True)
class RecordAnalysis:
    """First divergence and error type of one incorrect record."""
    divergence: Divergence
    error_type: ErrorType
    pred_balanced: bool


def analyze_record(record: PredictionRecord, ood_labels: Optional[Collection[str]] = None,
                   ood_prefix: str = DEFAULT_OOD_PREFIX) -> Optional[RecordAnalysis]:
    """
    Classify the first error of a record.

    Returns:
        RecordAnalysis, or None for exact matches
    """
    gold = record.gold_tokens
    pred = record.pred_tokens
    if pred.tokens == gold.tokens:
        return None

    forced = record.forced_tokens
    div = first_divergence(pred, gold, forced)
    if div is None:
        # forced decoding reproduced gold but the free-running output did not
        div = first_divergence(pred, gold)

    diverging = forced if div.source is DivergenceSource.FORCED else pred
    error_type = classify_error(div, _root_label(gold), _root_label(diverging), ood_labels, ood_prefix)
    return RecordAnalysis(div, error_type, is_tree_valid(pred))


def _bucket_of(record: PredictionRecord, bucket_by: str) -> str:
    if bucket_by == "all":
        return "all"
    if bucket_by == "depth":
        return str(depth(parse(record.gold_tokens)))
    value = record.tag(bucket_by)
    if value is None or not str(value).strip():
        raise MissingBucketKey(f"Record for utterance '{record.utterance}' has no '{bucket_by}' tag")
    return str(value)


def _bucket_sort_key(bucket: str) -> Tuple[int, int, str]:
    if bucket.isdigit():
        return (0, int(bucket), "")
    return (1, 0, bucket)


def aggregate(records: Iterable[PredictionRecord], bucket_by: str = "all",
              ood_labels: Optional[Collection[str]] = None,
              ood_prefix: str = DEFAULT_OOD_PREFIX) -> List[ErrorDistribution]:
    """
    Build one ErrorDistribution per bucket.

    Only records that are not exact matches contribute an error type; tree
    validity is the balanced criterion over those same records. Buckets are
    ordered numerically for depth and alphabetically otherwise.

    Args:
        records: Prediction records (gold frames schema-valid)
        bucket_by: 'language', 'domain', 'depth' or 'all'
        ood_labels: Explicit out-of-domain label set (default: prefix rule)

    Raises:
        ValueError: If bucket_by is unknown
        MissingBucketKey: If a record lacks the bucket tag
    """
    if bucket_by not in BUCKET_KEYS:
        raise ValueError(f"bucket_by must be one of {', '.join(BUCKET_KEYS)}, got '{bucket_by}'")

    distributions: Dict[str, ErrorDistribution] = {}
    for record in records:
        bucket = _bucket_of(record, bucket_by)
        dist = distributions.setdefault(bucket, ErrorDistribution(bucket))
        analysis = analyze_record(record, ood_labels, ood_prefix)
        if analysis is None:
            dist.add(None, True, None)
        else:
            dist.add(analysis.error_type, analysis.pred_balanced, analysis.divergence.source)

    ordered = [distributions[key] for key in sorted(distributions, key=_bucket_sort_key)]
    logger.debug(f"Aggregated {sum(d.records for d in ordered)} records into {len(ordered)} bucket(s)")
    return ordered
