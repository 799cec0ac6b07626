"""
Confidence Estimation Service.
Predicts whether a produced frame is correct from target-side features:

    length      number of predicted tokens
    validity    max(0, open brackets - close brackets) of the prediction
    confidence  mean per-token probability of the prediction

The classifier is a linear SVM trained from scratch on z-scored features with
inverse-frequency class weights (positive class = exact match with gold). The
reported score is the sigmoid of the margin.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Collection, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from services.errors import (
    DegenerateFeatures,
    InsufficientRecords,
    MaskMismatch,
    ProbLengthMismatch,
    SingleClassCorpus,
)
from services.frame_core import TokenKind
from services.records import PredictionRecord

# Configure logging
logger = logging.getLogger(__name__)

FEATURE_NAMES = ("length", "validity", "confidence")
MODEL_SCHEMA_VERSION = 1
MIN_TRAIN_RECORDS = 10
MAX_BACKTRACK = 20
CONSTANT_STD = 1e-12


def normalize_mask(mask: Optional[Collection[str]] = None) -> Tuple[str, ...]:
    """Feature subset in canonical order; None means all features."""
    if mask is None:
        return FEATURE_NAMES
    unknown = sorted(set(mask) - set(FEATURE_NAMES))
    if unknown:
        raise ValueError(f"Unknown feature(s): {', '.join(unknown)}. Expected: {', '.join(FEATURE_NAMES)}")
    return tuple(name for name in FEATURE_NAMES if name in mask)


@dataclass(frozen=True)
class FeatureVector:
    """Raw feature values of one prediction; masked-out features are zero."""
    length: float
    validity: float
    confidence: float
    active_mask: FrozenSet[str] = frozenset(FEATURE_NAMES)

    def value(self, name: str) -> float:
        return getattr(self, name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "length": self.length,
            "validity": self.validity,
            "confidence": self.confidence,
            "active_mask": [name for name in FEATURE_NAMES if name in self.active_mask],
        }


@dataclass(frozen=True)
class LabeledExample:
    features: FeatureVector
    label: int  # +1 correct frame, -1 incorrect


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the subgradient solver."""
    epochs: int = 500
    step_size: float = 0.5
    l2: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.l2 < 0:
            raise ValueError(f"l2 must be non-negative, got {self.l2}")

    def to_dict(self) -> Dict[str, Any]:
        return {"epochs": self.epochs, "step_size": self.step_size, "l2": self.l2, "seed": self.seed}


@dataclass(frozen=True)
class LinearModel:
    """
    Trained linear classifier.

    `mask` is the requested feature subset; `feature_names` are the features
    that survived (constant ones are listed in `dropped`). Weights, means and
    stds align with `feature_names`.
    """
    mask: Tuple[str, ...]
    feature_names: Tuple[str, ...]
    weights: Tuple[float, ...]
    bias: float
    means: Tuple[float, ...]
    stds: Tuple[float, ...]
    class_weights: Dict[str, float]
    config: TrainConfig
    threshold: float = 0.0
    dropped: Tuple[str, ...] = ()
    fingerprint: str = ""
    loss_history: Tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not (len(self.weights) == len(self.feature_names) == len(self.means) == len(self.stds)):
            raise ValueError("weights, means and stds must align with feature_names")
        if any(s <= 0 for s in self.stds):
            raise ValueError("feature stds must be positive")

    def weight(self, name: str) -> float:
        """Weight of a feature; 0.0 for masked or dropped features."""
        if name in self.feature_names:
            return self.weights[self.feature_names.index(name)]
        return 0.0

    def margin(self, fv: FeatureVector) -> float:
        if set(fv.active_mask) != set(self.mask):
            raise MaskMismatch(
                f"Feature mask {sorted(fv.active_mask)} does not match model mask {sorted(self.mask)}"
            )
        raw = np.array([fv.value(name) for name in self.feature_names], dtype=float)
        z = (raw - np.array(self.means)) / np.array(self.stds)
        return float(np.dot(np.array(self.weights), z) + self.bias)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "mask": list(self.mask),
            "feature_names": list(self.feature_names),
            "weights": list(self.weights),
            "bias": self.bias,
            "means": list(self.means),
            "stds": list(self.stds),
            "class_weights": dict(self.class_weights),
            "config": self.config.to_dict(),
            "threshold": self.threshold,
            "dropped": list(self.dropped),
            "fingerprint": self.fingerprint,
            "loss_history": list(self.loss_history),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LinearModel":
        """
        Rebuild a model from its JSON form.

        Raises:
            ValueError: If the schema version is unsupported or a field is missing
        """
        version = data.get("schema_version")
        if version != MODEL_SCHEMA_VERSION:
            raise ValueError(f"Unsupported model schema version {version!r} (expected {MODEL_SCHEMA_VERSION})")
        try:
            return cls(
                mask=tuple(data["mask"]),
                feature_names=tuple(data["feature_names"]),
                weights=tuple(float(w) for w in data["weights"]),
                bias=float(data["bias"]),
                means=tuple(float(m) for m in data["means"]),
                stds=tuple(float(s) for s in data["stds"]),
                class_weights={k: float(v) for k, v in data["class_weights"].items()},
                config=TrainConfig(**data["config"]),
                threshold=float(data.get("threshold", 0.0)),
                dropped=tuple(data.get("dropped", ())),
                fingerprint=data.get("fingerprint", ""),
                loss_history=tuple(float(x) for x in data.get("loss_history", ())),
            )
        except KeyError as e:
            raise ValueError(f"Model file is missing field {e}") from e


@dataclass(frozen=True)
class PRF:
    """Precision, recall and F1 on the positive (correct frame) class."""
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    precision_defined: bool = True

    @property
    def support(self) -> int:
        return self.tp + self.fn

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def coverage(self) -> float:
        """Share of records predicted positive."""
        return (self.tp + self.fp) / self.total if self.total else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "precision": round(self.precision, 4),
            "recall": round(self.recall, 4),
            "f1": round(self.f1, 4),
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "support": self.support,
            "coverage": round(self.coverage, 4),
            "precision_defined": self.precision_defined,
        }


@dataclass(frozen=True)
class AblationRow:
    name: str
    dropped: Optional[str]
    prf: PRF


def extract_features(record: PredictionRecord, mask: Optional[Collection[str]] = None) -> FeatureVector:
    """
    Compute the target-side features of one prediction.

    Args:
        record: Prediction record
        mask: Active feature subset (default: all)

    Returns:
        FeatureVector with masked-out features set to zero

    Raises:
        ProbLengthMismatch: If confidence is active and token_probs is missing
            or does not align with the predicted tokens

    Example:
        >>> rec = PredictionRecord("hi", "[IN:X ]", "[IN:X ]", token_probs=(0.9, 0.9))
        >>> extract_features(rec).confidence
        0.9
    """
    active = normalize_mask(mask)
    tokens = record.pred_tokens
    length = float(len(tokens))

    opens = sum(1 for token in tokens if token.kind.is_open)
    closes = sum(1 for token in tokens if token.kind is TokenKind.CLOSE)
    validity = float(max(0, opens - closes))

    confidence = 0.0
    if "confidence" in active:
        probs = record.token_probs
        if probs is None:
            raise ProbLengthMismatch(f"Record for '{record.utterance}' has no token_probs")
        if len(probs) != len(tokens):
            raise ProbLengthMismatch(
                f"token_probs has {len(probs)} values for {len(tokens)} predicted tokens"
            )
        confidence = float(np.mean(probs)) if probs else 0.0

    return FeatureVector(
        length=length if "length" in active else 0.0,
        validity=validity if "validity" in active else 0.0,
        confidence=confidence,
        active_mask=frozenset(active),
    )


def label_examples(records: Iterable[PredictionRecord],
                   mask: Optional[Collection[str]] = None) -> List[LabeledExample]:
    """Features plus +1/-1 correctness labels for a list of records."""
    return [
        LabeledExample(extract_features(record, mask), 1 if record.is_correct else -1)
        for record in records
    ]


def class_weights(labels: Sequence[int]) -> Tuple[float, float]:
    """
    Inverse-frequency class weights c_k = n / (2 * n_k).

    Returns:
        (positive weight, negative weight)

    Raises:
        SingleClassCorpus: If one class is absent
    """
    n = len(labels)
    n_pos = sum(1 for y in labels if y > 0)
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassCorpus(f"Training data needs both classes (positive={n_pos}, negative={n_neg})")
    return n / (2.0 * n_pos), n / (2.0 * n_neg)


def _fingerprint(examples: Sequence[LabeledExample], mask: Sequence[str]) -> str:
    rows = [[ex.features.value(name) for name in mask] + [ex.label] for ex in examples]
    payload = json.dumps({"mask": list(mask), "rows": rows}, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _objective(X: np.ndarray, y: np.ndarray, c: np.ndarray, w: np.ndarray, b: float, l2: float) -> float:
    hinge = np.maximum(0.0, 1.0 - y * (X @ w + b))
    return float(np.mean(c * hinge) + l2 * np.dot(w, w))


def _subgradient(X: np.ndarray, y: np.ndarray, c: np.ndarray, w: np.ndarray, b: float,
                 l2: float) -> Tuple[np.ndarray, float]:
    n = len(y)
    violated = (y * (X @ w + b)) < 1.0
    coef = np.where(violated, c * y, 0.0)
    grad_w = -(coef @ X) / n + 2.0 * l2 * w
    grad_b = -float(np.sum(coef)) / n
    return grad_w, grad_b


def train_examples(examples: Sequence[LabeledExample], config: TrainConfig = TrainConfig(),
                   mask: Optional[Collection[str]] = None) -> LinearModel:
    """
    Train on pre-extracted examples.

    Minimizes mean_i c_{y_i} * max(0, 1 - y_i (w.x_i + b)) + l2 * ||w||^2 by
    full-batch subgradient descent with step step_size / sqrt(t), starting
    from zero. A step that would raise the objective is halved up to
    MAX_BACKTRACK times and skipped if it still does, so the recorded loss
    never increases. l2 applies to the per-example mean loss.

    Raises:
        InsufficientRecords: If fewer than MIN_TRAIN_RECORDS examples are given
        SingleClassCorpus: If one class is absent
        DegenerateFeatures: If every active feature is constant
    """
    active = normalize_mask(mask)
    if len(examples) < MIN_TRAIN_RECORDS:
        raise InsufficientRecords(f"Need at least {MIN_TRAIN_RECORDS} training records, got {len(examples)}")
    for ex in examples:
        if set(ex.features.active_mask) != set(active):
            raise MaskMismatch(f"Example mask {sorted(ex.features.active_mask)} does not match {list(active)}")

    labels = [ex.label for ex in examples]
    c_pos, c_neg = class_weights(labels)

    raw = np.array([[ex.features.value(name) for name in active] for ex in examples], dtype=float)
    raw = raw.reshape(len(examples), len(active))
    means = raw.mean(axis=0)
    stds = raw.std(axis=0)
    keep = [i for i in range(len(active)) if stds[i] > CONSTANT_STD]
    dropped = tuple(active[i] for i in range(len(active)) if i not in keep)
    if not keep:
        raise DegenerateFeatures(f"All active features are constant: {', '.join(active) or '(none)'}")
    if dropped:
        logger.warning(f"Dropping constant feature(s): {', '.join(dropped)}")

    X = (raw[:, keep] - means[keep]) / stds[keep]
    y = np.array(labels, dtype=float)
    c = np.where(y > 0, c_pos, c_neg)

    w = np.zeros(len(keep))
    b = 0.0
    current = _objective(X, y, c, w, b, config.l2)
    history: List[float] = []
    for t in range(1, config.epochs + 1):
        grad_w, grad_b = _subgradient(X, y, c, w, b, config.l2)
        step = config.step_size / np.sqrt(t)
        for _ in range(MAX_BACKTRACK + 1):
            cand_w = w - step * grad_w
            cand_b = b - step * grad_b
            candidate = _objective(X, y, c, cand_w, cand_b, config.l2)
            if candidate <= current:
                w, b, current = cand_w, cand_b, candidate
                break
            step /= 2.0
        history.append(current)

    model = LinearModel(
        mask=active,
        feature_names=tuple(active[i] for i in keep),
        weights=tuple(float(v) for v in w),
        bias=float(b),
        means=tuple(float(means[i]) for i in keep),
        stds=tuple(float(stds[i]) for i in keep),
        class_weights={"positive": c_pos, "negative": c_neg},
        config=config,
        dropped=dropped,
        fingerprint=_fingerprint(examples, active),
        loss_history=tuple(history),
    )
    logger.info(
        f"Trained on {len(examples)} records ({sum(1 for v in labels if v > 0)} positive), "
        f"final loss {current:.4f}"
    )
    return model


def train(records: Sequence[PredictionRecord], config: TrainConfig = TrainConfig(),
          mask: Optional[Collection[str]] = None) -> LinearModel:
    """
    Train the confidence classifier on prediction records.

    Args:
        records: Records with pred, gold and token_probs
        config: Solver hyperparameters
        mask: Active feature subset (default: all)

    Returns:
        LinearModel with margin threshold 0

    Raises:
        SingleClassCorpus, InsufficientRecords, DegenerateFeatures, ProbLengthMismatch
    """
    return train_examples(label_examples(records, mask), config, mask)


def _sigmoid(margin: float) -> float:
    if margin >= 0:
        return float(1.0 / (1.0 + np.exp(-margin)))
    e = float(np.exp(margin))
    return e / (1.0 + e)


def predict(model: LinearModel, fv: FeatureVector) -> Tuple[float, bool]:
    """
    Score one feature vector.

    Returns:
        (sigmoid of the margin, True when the margin exceeds the threshold)

    Raises:
        MaskMismatch: If the vector's mask differs from the model's
    """
    margin = model.margin(fv)
    return _sigmoid(margin), margin > model.threshold


def prf_from_counts(tp: int, fp: int, fn: int, tn: int = 0) -> PRF:
    """
    Precision/recall/F1 from confusion counts.

    Undefined precision (nothing predicted positive) is reported as 0 with
    precision_defined=False.
    """
    precision_defined = (tp + fp) > 0
    precision = tp / (tp + fp) if precision_defined else 0.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
    return PRF(precision, recall, f1, tp, fp, fn, tn, precision_defined)


def evaluate_examples(model: LinearModel, examples: Iterable[LabeledExample]) -> PRF:
    tp = fp = fn = tn = 0
    for ex in examples:
        _, positive = predict(model, ex.features)
        if positive and ex.label > 0:
            tp += 1
        elif positive:
            fp += 1
        elif ex.label > 0:
            fn += 1
        else:
            tn += 1
    return prf_from_counts(tp, fp, fn, tn)


def evaluate(model: LinearModel, records: Iterable[PredictionRecord]) -> PRF:
    """
    Positive-class PRF of a model on labeled records.

    Margins equal to the threshold count as negative.
    """
    return evaluate_examples(model, label_examples(records, model.mask))


def tune_threshold(model: LinearModel, records: Sequence[PredictionRecord]) -> Tuple[LinearModel, PRF]:
    """
    Pick the margin threshold that maximizes F1 on a dev split.

    Candidates are midpoints between consecutive distinct dev margins plus
    one threshold below all of them; ties keep the higher threshold.

    Returns:
        (model with the tuned threshold, dev PRF at that threshold)
    """
    examples = label_examples(records, model.mask)
    if not examples:
        raise InsufficientRecords("Threshold tuning needs at least one dev record")

    margins = sorted({model.margin(ex.features) for ex in examples})
    candidates = [margins[0] - 1.0]
    candidates.extend((a + b) / 2.0 for a, b in zip(margins, margins[1:]))

    best_model, best_prf = model, None
    for threshold in candidates:
        tuned = replace(model, threshold=float(threshold))
        prf = evaluate_examples(tuned, examples)
        if best_prf is None or prf.f1 >= best_prf.f1:
            best_model, best_prf = tuned, prf

    logger.info(f"Tuned margin threshold {best_model.threshold:.4f} (dev F1 {best_prf.f1:.4f})")
    return best_model, best_prf


def ablation_names() -> List[Tuple[str, Optional[str]]]:
    """Row names of the ablation table with the feature each row drops."""
    return [("full", None)] + [(f"-{name}", name) for name in FEATURE_NAMES]


def ablate(train_records: Sequence[PredictionRecord], test_records: Sequence[PredictionRecord],
           config: TrainConfig = TrainConfig()) -> List[AblationRow]:
    """
    Retrain from scratch with each feature omitted in turn.

    Returns:
        Four rows: full, -length, -validity, -confidence

    Raises:
        As train
    """
    rows: List[AblationRow] = []
    for name, dropped in ablation_names():
        mask = tuple(f for f in FEATURE_NAMES if f != dropped)
        model = train(train_records, config, mask)
        prf = evaluate(model, test_records)
        logger.info(f"Ablation {name}: P={prf.precision:.4f} R={prf.recall:.4f} F1={prf.f1:.4f}")
        rows.append(AblationRow(name, dropped, prf))
    return rows
