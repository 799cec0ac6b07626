"""
Oracle Builder Service.
Builds regular, span-oracle and structure-oracle source/target pairs from
(utterance, gold frame).

    regular        source: utterance
    span oracle    source: utterance [sep] [span1] fireworks [span2] tonight
    struct oracle  source: utterance [sep] [IN:GET_EVENT [SL:CAT [span1] ] [SL:DATE [span2] ] ]

The target is always the full gold frame. Span markers never appear in targets.
"""

import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence, Tuple

from services.errors import MarkerMismatch
from services.frame_core import (
    FrameLike,
    FrameToken,
    FrameTree,
    IntentNode,
    SlotNode,
    TokenSeq,
    iter_slots,
    parse,
    tokenize,
    tree_tokens,
)
from services.utils import clean_string

# Configure logging
logger = logging.getLogger(__name__)

SEPARATOR = "[sep]"
MARKER_PATTERN = re.compile(r"^\[span([1-9][0-9]*)\]$")


class OracleKind(Enum):
    REGULAR = "regular"
    SPAN = "span"
    STRUCT = "struct"


@dataclass(frozen=True)
class LeafSpan:
    """A non-empty leaf span, numbered from 1 in left-to-right frame order."""
    index: int
    tokens: Tuple[str, ...]
    slot_label: str


@dataclass(frozen=True)
class OraclePair:
    """Source/target pair for one oracle condition."""
    kind: OracleKind
    source: str
    target: str
    snippet: str

    def to_dict(self) -> Dict[str, str]:
        return {
            "source": self.source,
            "target": self.target,
            "kind": self.kind.value,
            "snippet": self.snippet,
        }


def span_marker(index: int) -> str:
    return f"[span{index}]"


def extract_leaf_spans(tree: FrameTree) -> List[LeafSpan]:
    """Non-empty leaf spans in serialization order; empty slots are skipped."""
    spans: List[LeafSpan] = []
    for slot in iter_slots(tree):
        if slot.leaf_span:
            spans.append(LeafSpan(len(spans) + 1, slot.leaf_span, slot.label))
    return spans


def _source(utterance: str, snippet: str) -> str:
    parts = [clean_string(utterance), SEPARATOR]
    if snippet:
        parts.append(snippet)
    return " ".join(part for part in parts if part)


def _tree_of(frame: FrameLike) -> Tuple[FrameTree, str]:
    tree = parse(frame)
    return tree, tree_tokens(tree).text()


def build_regular_pair(utterance: str, frame: FrameLike) -> OraclePair:
    """Plain seq2seq pair without a snippet."""
    _, target = _tree_of(frame)
    return OraclePair(OracleKind.REGULAR, clean_string(utterance), target, "")


def build_span_oracle(utterance: str, frame: FrameLike) -> OraclePair:
    """
    Span oracle: the snippet lists every gold leaf span behind its marker.

    Raises:
        NotSchemaValid: If the frame is not schema-valid

    Example:
        >>> build_span_oracle("Where can I see fireworks tonight?",
        ...     "[IN:GET_EVENT [SL:CAT fireworks ] [SL:DATE tonight ] ]").snippet
        '[span1] fireworks [span2] tonight'
    """
    tree, target = _tree_of(frame)
    parts: List[str] = []
    for span in extract_leaf_spans(tree):
        parts.append(span_marker(span.index))
        parts.extend(span.tokens)
    snippet = " ".join(parts)
    return OraclePair(OracleKind.SPAN, _source(utterance, snippet), target, snippet)


def _struct_intent(node: IntentNode, counter: List[int], out: List[str]) -> None:
    out.append(FrameToken.open_intent(node.label).surface)
    for slot in node.children:
        _struct_slot(slot, counter, out)
    out.append(FrameToken.close().surface)


def _struct_slot(node: SlotNode, counter: List[int], out: List[str]) -> None:
    out.append(FrameToken.open_slot(node.label).surface)
    for child in node.children:
        _struct_intent(child, counter, out)
    if node.leaf_span:
        counter[0] += 1
        out.append(span_marker(counter[0]))
    out.append(FrameToken.close().surface)


def build_struct_oracle(utterance: str, frame: FrameLike) -> OraclePair:
    """
    Structure oracle: the gold frame with each leaf span replaced by its marker.

    Full intent and slot labels are kept in the snippet.

    Raises:
        NotSchemaValid: If the frame is not schema-valid
    """
    tree, target = _tree_of(frame)
    out: List[str] = []
    _struct_intent(tree.root, [0], out)
    snippet = " ".join(out)
    return OraclePair(OracleKind.STRUCT, _source(utterance, snippet), target, snippet)


def build_pair(kind: OracleKind, utterance: str, frame: FrameLike) -> OraclePair:
    builders = {
        OracleKind.REGULAR: build_regular_pair,
        OracleKind.SPAN: build_span_oracle,
        OracleKind.STRUCT: build_struct_oracle,
    }
    return builders[kind](utterance, frame)


def reconstruct(struct_snippet: str, spans: Sequence[LeafSpan]) -> TokenSeq:
    """
    Substitute leaf spans back into a structure-oracle snippet.

    Raises:
        MarkerMismatch: If markers are duplicated, missing, or do not match the spans
    """
    by_index = {span.index: span for span in spans}
    if len(by_index) != len(spans) or set(by_index) != set(range(1, len(spans) + 1)):
        raise MarkerMismatch(f"Span indices must be 1..{len(spans)} without gaps or repeats")

    seen = set()
    units: List[str] = []
    for unit in struct_snippet.split():
        match = MARKER_PATTERN.match(unit)
        if match is None:
            units.append(unit)
            continue
        index = int(match.group(1))
        if index in seen:
            raise MarkerMismatch(f"Marker {unit} appears more than once")
        if index not in by_index:
            raise MarkerMismatch(f"Marker {unit} has no matching span (have {len(spans)})")
        seen.add(index)
        units.extend(by_index[index].tokens)

    if len(seen) != len(spans):
        missing = sorted(set(by_index) - seen)
        raise MarkerMismatch(f"Missing marker(s) for span(s): {', '.join(span_marker(i) for i in missing)}")

    return tokenize(" ".join(units))
