"""
Prediction records.
One model output per record: utterance, gold frame, predicted frame and the
optional per-token probabilities, forced-decoding output and bucket tags.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

from services.errors import EmptyInput, MalformedBracketToken, ProbLengthMismatch
from services.frame_core import TokenSeq, check_validity, exact_match, tokenize

# Configure logging
logger = logging.getLogger(__name__)

RECORD_SCHEMA_VERSION = 1

RECORD_SCHEMA_HELP = """\
PredictionRecord JSONL schema (version 1), one JSON object per line:
  utterance          string, required   source utterance x
  gold               string, required   gold frame, must be schema-valid
  pred               string, required   predicted frame (may be empty or invalid)
  token_probs        list of floats     optional; one probability in (0, 1] per pred token
  forced_pred        string             optional; teacher-forced argmax frame
  language           string             optional bucket tag
  domain             string             optional bucket tag
  injected_type      string             optional; set by `frameprobe perturb`
  injected_position  integer            optional; set by `frameprobe perturb`
Dataset formats: TSV (utterance TAB frame [TAB language [TAB domain]]),
JSONL ({"utterance", "frame", optional "language", "domain"}), or frames (one frame per line).
"""


@dataclass(frozen=True)
class PredictionRecord:
    """A single (utterance, gold, prediction) triple with its side information."""
    utterance: str
    gold: str
    pred: str
    token_probs: Optional[Tuple[float, ...]] = None
    forced_pred: Optional[str] = None
    language: Optional[str] = None
    domain: Optional[str] = None
    injected_type: Optional[str] = None
    injected_position: Optional[int] = None

    @property
    def gold_tokens(self) -> TokenSeq:
        return tokenize(self.gold)

    @property
    def pred_tokens(self) -> TokenSeq:
        """Predicted tokens; an empty prediction is an empty sequence."""
        if not self.pred or not self.pred.strip():
            return TokenSeq(())
        return tokenize(self.pred)

    @property
    def forced_tokens(self) -> Optional[TokenSeq]:
        if self.forced_pred is None or not self.forced_pred.strip():
            return None
        return tokenize(self.forced_pred)

    @property
    def is_correct(self) -> bool:
        return exact_match(self.pred, self.gold)

    def validate(self) -> None:
        """
        Check the record constraints.

        Raises:
            ValueError: If the gold frame is not schema-valid, a frame is
                malformed, or a probability is out of range
            ProbLengthMismatch: If token_probs does not align with pred tokens
        """
        try:
            gold_report = check_validity(self.gold_tokens)
        except (EmptyInput, MalformedBracketToken) as e:
            raise ValueError(f"gold frame is malformed: {e}") from e
        if not gold_report.schema_valid:
            raise ValueError(
                f"gold frame is not schema-valid "
                f"(balanced={gold_report.balanced}, error at {gold_report.error_index})"
            )

        try:
            pred_tokens = self.pred_tokens
            _ = self.forced_tokens
        except MalformedBracketToken as e:
            raise ValueError(f"prediction is malformed: {e}") from e

        if self.token_probs is not None:
            if len(self.token_probs) != len(pred_tokens):
                raise ProbLengthMismatch(
                    f"token_probs has {len(self.token_probs)} values for {len(pred_tokens)} predicted tokens"
                )
            for p in self.token_probs:
                if not 0.0 < p <= 1.0:
                    raise ValueError(f"token probability {p} outside (0, 1]")

    def tag(self, key: str) -> Optional[str]:
        """Bucket tag by name ('language' or 'domain')."""
        if key == "language":
            return self.language
        if key == "domain":
            return self.domain
        raise KeyError(key)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready dict in fixed key order; absent optional fields are omitted."""
        data: Dict[str, Any] = {
            "utterance": self.utterance,
            "gold": self.gold,
            "pred": self.pred,
        }
        if self.token_probs is not None:
            data["token_probs"] = list(self.token_probs)
        optional = (
            ("forced_pred", self.forced_pred),
            ("language", self.language),
            ("domain", self.domain),
            ("injected_type", self.injected_type),
            ("injected_position", self.injected_position),
        )
        for key, value in optional:
            if value is not None:
                data[key] = value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PredictionRecord":
        """
        Build a record from a decoded JSON object.

        Raises:
            ValueError: If required keys are missing or have the wrong type
        """
        if not isinstance(data, dict):
            raise ValueError(f"expected a JSON object, got {type(data).__name__}")

        missing = [key for key in ("utterance", "gold", "pred") if key not in data]
        if missing:
            raise ValueError(f"missing required field(s): {', '.join(missing)}")

        for key in ("utterance", "gold", "pred"):
            if not isinstance(data[key], str):
                raise ValueError(f"field '{key}' must be a string")

        probs = data.get("token_probs")
        if probs is not None:
            if not isinstance(probs, list) or not all(
                isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs
            ):
                raise ValueError("field 'token_probs' must be a list of numbers")
            probs = tuple(float(p) for p in probs)

        position = data.get("injected_position")
        if position is not None and (not isinstance(position, int) or isinstance(position, bool)):
            raise ValueError("field 'injected_position' must be an integer")

        return cls(
            utterance=data["utterance"],
            gold=data["gold"],
            pred=data["pred"],
            token_probs=probs,
            forced_pred=data.get("forced_pred"),
            language=data.get("language"),
            domain=data.get("domain"),
            injected_type=data.get("injected_type"),
            injected_position=position,
        )


@dataclass(frozen=True)
class DatasetRecord:
    """One gold sample: utterance, frame text and optional bucket tags."""
    utterance: str
    frame: str
    language: Optional[str] = None
    domain: Optional[str] = None
    line_number: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"utterance": self.utterance, "frame": self.frame}
        if self.language is not None:
            data["language"] = self.language
        if self.domain is not None:
            data["domain"] = self.domain
        return data

    def as_sample(self) -> Tuple[str, str, Optional[str], Optional[str]]:
        return (self.utterance, self.frame, self.language, self.domain)
