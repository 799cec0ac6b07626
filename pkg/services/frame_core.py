"""
Frame Core Service.
Tokenizes, parses, serializes and measures linearized decoupled semantic frames.

Surface syntax: whitespace-separated tokens where "[IN:LABEL" opens an intent,
"[SL:LABEL" opens a slot, "]" closes the innermost bracket and anything else is
a token copied from the utterance, e.g.

    [IN:GET_EVENT [SL:CATEGORY_EVENT fireworks ] [SL:DATE_TIME tonight ] ]

Conventions used by every report:
    - depth counts both intent and slot nesting levels; a bare intent has depth 1.
    - exact match compares tokens after whitespace normalization only; copy
      tokens are compared as opaque strings with no unicode normalization.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple, Union

from services.errors import EmptyInput, MalformedBracketToken, NotSchemaValid

# Configure logging
logger = logging.getLogger(__name__)

INTENT_PREFIX = "[IN:"
SLOT_PREFIX = "[SL:"
CLOSE_SURFACE = "]"

DEPTH_RULE = "depth counts intent and slot nesting levels; a bare intent has depth 1"
EM_RULE = "exact match on whitespace-normalized tokens; no tree-equivalent reorderings"


class TokenKind(Enum):
    """The four token kinds of a linearized frame."""
    OPEN_INTENT = "open_intent"
    OPEN_SLOT = "open_slot"
    CLOSE = "close"
    COPY = "copy"

    @property
    def is_open(self) -> bool:
        return self in (TokenKind.OPEN_INTENT, TokenKind.OPEN_SLOT)


@dataclass(frozen=True)
class FrameToken:
    """
    One token of a linearized frame.

    Open tokens carry an ontology label, copy tokens carry the surface text,
    and CLOSE carries neither.
    """
    kind: TokenKind
    label: Optional[str] = None
    text: Optional[str] = None

    def __post_init__(self):
        if self.kind.is_open:
            if self.text is not None:
                raise ValueError(f"{self.kind.name} token cannot carry text")
            if not self.label or not _is_legal_label(self.label):
                raise ValueError(f"Illegal ontology label for {self.kind.name}: {self.label!r}")
        elif self.kind is TokenKind.COPY:
            if self.label is not None:
                raise ValueError("COPY token cannot carry a label")
            if not self.text or any(ch.isspace() for ch in self.text):
                raise ValueError(f"COPY token text must be a non-empty whitespace-free string, got {self.text!r}")
        elif self.label is not None or self.text is not None:
            raise ValueError("CLOSE token carries neither label nor text")

    @classmethod
    def open_intent(cls, label: str) -> "FrameToken":
        return cls(TokenKind.OPEN_INTENT, label=label)

    @classmethod
    def open_slot(cls, label: str) -> "FrameToken":
        return cls(TokenKind.OPEN_SLOT, label=label)

    @classmethod
    def close(cls) -> "FrameToken":
        return cls(TokenKind.CLOSE)

    @classmethod
    def copy(cls, text: str) -> "FrameToken":
        return cls(TokenKind.COPY, text=text)

    @property
    def surface(self) -> str:
        """Canonical surface form of this token."""
        if self.kind is TokenKind.OPEN_INTENT:
            return f"{INTENT_PREFIX}{self.label}"
        if self.kind is TokenKind.OPEN_SLOT:
            return f"{SLOT_PREFIX}{self.label}"
        if self.kind is TokenKind.CLOSE:
            return CLOSE_SURFACE
        return self.text

    def __str__(self) -> str:
        return self.surface


@dataclass(frozen=True)
class TokenSeq:
    """Ordered, immutable sequence of FrameTokens."""
    tokens: Tuple[FrameToken, ...] = ()

    def __post_init__(self):
        if not isinstance(self.tokens, tuple):
            object.__setattr__(self, "tokens", tuple(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[FrameToken]:
        return iter(self.tokens)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return TokenSeq(self.tokens[index])
        return self.tokens[index]

    def text(self) -> str:
        """Canonical frame text (single spaces between tokens)."""
        return " ".join(token.surface for token in self.tokens)

    @classmethod
    def from_text(cls, text: str, case_insensitive: bool = False) -> "TokenSeq":
        return tokenize(text, case_insensitive=case_insensitive)

    def __str__(self) -> str:
        return self.text()


@dataclass(frozen=True)
class SlotNode:
    """A slot: either child intents or a (possibly empty) leaf span, never both."""
    label: str
    children: Tuple["IntentNode", ...] = ()
    leaf_span: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.children and self.leaf_span:
            raise ValueError(f"Slot {self.label} has both child intents and a leaf span")


@dataclass(frozen=True)
class IntentNode:
    """An intent and its slots."""
    label: str
    children: Tuple[SlotNode, ...] = ()


@dataclass(frozen=True)
class FrameTree:
    """Tree recovered from a schema-valid token sequence."""
    root: IntentNode


@dataclass(frozen=True)
class ValidityReport:
    """Bracket and schema validity of a token sequence."""
    open_count: int
    close_count: int
    balanced: bool
    prefix_legal: bool
    schema_valid: bool
    depth: Optional[int] = None
    error_index: Optional[int] = None
    error_reason: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "open_count": self.open_count,
            "close_count": self.close_count,
            "balanced": self.balanced,
            "prefix_legal": self.prefix_legal,
            "schema_valid": self.schema_valid,
            "depth": self.depth,
            "error_index": self.error_index,
            "error_reason": self.error_reason,
        }


FrameLike = Union[str, TokenSeq, Sequence[FrameToken]]


def _is_legal_label(label: str) -> bool:
    return bool(label) and not any(ch.isspace() or ch in "[]" for ch in label)


def canonicalize(text: str) -> str:
    """Collapse all whitespace runs to single spaces and trim."""
    return " ".join(text.split())


def _tokenize_unit(unit: str, index: int, case_insensitive: bool) -> FrameToken:
    if unit == CLOSE_SURFACE:
        return FrameToken.close()

    head = unit[:len(INTENT_PREFIX)]
    if case_insensitive:
        head = head.upper()

    if head in (INTENT_PREFIX, SLOT_PREFIX):
        label = unit[len(INTENT_PREFIX):]
        if case_insensitive:
            label = label.upper()
        if not label:
            raise MalformedBracketToken(unit, index, "empty label")
        if not _is_legal_label(label):
            raise MalformedBracketToken(unit, index, "label contains bracket characters")
        if head == INTENT_PREFIX:
            return FrameToken.open_intent(label)
        return FrameToken.open_slot(label)

    return FrameToken.copy(unit)


def tokenize(text: str, case_insensitive: bool = False) -> TokenSeq:
    """
    Split a frame string into FrameTokens.

    Args:
        text: Whitespace-separated frame string
        case_insensitive: Accept "[in:"/"[sl:" prefixes and upper-case their labels

    Returns:
        TokenSeq with exactly one token per whitespace-delimited unit

    Raises:
        EmptyInput: If text is empty after trimming
        MalformedBracketToken: If an open bracket has an empty or illegal label

    Example:
        >>> tokenize("[IN:GET_EVENT [SL:DATE tonight ] ]").text()
        '[IN:GET_EVENT [SL:DATE tonight ] ]'
    """
    if text is None or not text.strip():
        raise EmptyInput("Frame text is empty")

    units = text.split()
    return TokenSeq(tuple(_tokenize_unit(unit, i, case_insensitive) for i, unit in enumerate(units)))


def as_token_seq(frame: FrameLike) -> TokenSeq:
    """Accept frame text, a TokenSeq or a list of FrameTokens."""
    if isinstance(frame, TokenSeq):
        return frame
    if isinstance(frame, str):
        return tokenize(frame)
    return TokenSeq(tuple(frame))


class _IntentBuilder:
    __slots__ = ("label", "children")

    def __init__(self, label: str):
        self.label = label
        self.children: List["_SlotBuilder"] = []

    def freeze(self) -> IntentNode:
        return IntentNode(self.label, tuple(child.freeze() for child in self.children))


class _SlotBuilder:
    __slots__ = ("label", "children", "leaf_span")

    def __init__(self, label: str):
        self.label = label
        self.children: List[_IntentBuilder] = []
        self.leaf_span: List[str] = []

    def freeze(self) -> SlotNode:
        return SlotNode(
            self.label,
            tuple(child.freeze() for child in self.children),
            tuple(self.leaf_span),
        )


def parse(frame: FrameLike) -> FrameTree:
    """
    Rebuild the frame tree with an explicit stack.

    Args:
        frame: TokenSeq, list of FrameTokens, or frame text

    Returns:
        FrameTree whose in-order serialization reproduces the input

    Raises:
        NotSchemaValid: With the index of the first offending token
            (len(seq) when brackets are left open)
    """
    seq = as_token_seq(frame)
    if len(seq) == 0:
        raise NotSchemaValid(0, "empty frame")

    root: Optional[_IntentBuilder] = None
    stack: list = []

    for i, token in enumerate(seq):
        kind = token.kind

        if not stack:
            if root is not None:
                raise NotSchemaValid(i, "token after the root intent closed")
            if kind is not TokenKind.OPEN_INTENT:
                raise NotSchemaValid(i, "root must be an intent")
            root = _IntentBuilder(token.label)
            stack.append(root)
            continue

        top = stack[-1]
        if kind is TokenKind.CLOSE:
            stack.pop()
        elif isinstance(top, _IntentBuilder):
            if kind is TokenKind.OPEN_SLOT:
                slot = _SlotBuilder(token.label)
                top.children.append(slot)
                stack.append(slot)
            elif kind is TokenKind.OPEN_INTENT:
                raise NotSchemaValid(i, "intent directly under an intent")
            else:
                raise NotSchemaValid(i, "copy token directly under an intent")
        else:
            if kind is TokenKind.OPEN_INTENT:
                if top.leaf_span:
                    raise NotSchemaValid(i, "slot mixes a leaf span with child intents")
                intent = _IntentBuilder(token.label)
                top.children.append(intent)
                stack.append(intent)
            elif kind is TokenKind.COPY:
                if top.children:
                    raise NotSchemaValid(i, "slot mixes child intents with a leaf span")
                top.leaf_span.append(token.text)
            else:
                raise NotSchemaValid(i, "slot directly under a slot")

    if stack:
        raise NotSchemaValid(len(seq), f"{len(stack)} bracket(s) left open")

    return FrameTree(root.freeze())


def _intent_tokens(node: IntentNode) -> Iterator[FrameToken]:
    yield FrameToken.open_intent(node.label)
    for slot in node.children:
        yield from _slot_tokens(slot)
    yield FrameToken.close()


def _slot_tokens(node: SlotNode) -> Iterator[FrameToken]:
    yield FrameToken.open_slot(node.label)
    for child in node.children:
        yield from _intent_tokens(child)
    for text in node.leaf_span:
        yield FrameToken.copy(text)
    yield FrameToken.close()


def tree_tokens(tree: FrameTree) -> TokenSeq:
    """In-order token sequence of a tree."""
    return TokenSeq(tuple(_intent_tokens(tree.root)))


def serialize(tree: FrameTree) -> str:
    """Canonical frame text of a tree."""
    return tree_tokens(tree).text()


def _intent_depth(node: IntentNode) -> int:
    return 1 + max((_slot_depth(slot) for slot in node.children), default=0)


def _slot_depth(node: SlotNode) -> int:
    return 1 + max((_intent_depth(child) for child in node.children), default=0)


def depth(tree: FrameTree) -> int:
    """Number of bracket nodes on the longest root-to-leaf path."""
    return _intent_depth(tree.root)


def iter_slots(tree: FrameTree) -> Iterator[SlotNode]:
    """Slots in left-to-right serialization order."""
    pending: list = [tree.root]
    while pending:
        node = pending.pop()
        if isinstance(node, IntentNode):
            pending.extend(reversed(node.children))
        else:
            yield node
            pending.extend(reversed(node.children))


def frame_labels(tree: FrameTree) -> Tuple[frozenset, frozenset]:
    """Return (intent labels, slot labels) used anywhere in the tree."""
    intents = set()
    slots = set()
    pending: list = [tree.root]
    while pending:
        node = pending.pop()
        if isinstance(node, IntentNode):
            intents.add(node.label)
        else:
            slots.add(node.label)
        pending.extend(node.children)
    return frozenset(intents), frozenset(slots)


def check_validity(frame: FrameLike) -> ValidityReport:
    """
    Measure bracket balance and schema validity.

    Invalid sequences produce reports, never exceptions. Schema validity is only
    attempted for balanced sequences.

    Args:
        frame: TokenSeq, list of FrameTokens, or frame text

    Returns:
        ValidityReport; depth is set iff schema_valid
    """
    seq = as_token_seq(frame)
    open_count = 0
    close_count = 0
    prefix_legal = True

    for token in seq:
        if token.kind.is_open:
            open_count += 1
        elif token.kind is TokenKind.CLOSE:
            close_count += 1
            if close_count > open_count:
                prefix_legal = False

    balanced = prefix_legal and open_count == close_count
    if not balanced:
        return ValidityReport(open_count, close_count, False, prefix_legal, False)

    try:
        tree = parse(seq)
    except NotSchemaValid as e:
        return ValidityReport(
            open_count, close_count, True, prefix_legal, False,
            error_index=e.index, error_reason=e.reason,
        )

    return ValidityReport(open_count, close_count, True, prefix_legal, True, depth=depth(tree))


def exact_match(pred: FrameLike, gold: FrameLike) -> bool:
    """
    Token-for-token equality after whitespace normalization.

    Text inputs are compared without tokenizing, so malformed predictions
    simply fail to match.
    """
    if isinstance(pred, str) or isinstance(gold, str):
        pred_text = pred if isinstance(pred, str) else as_token_seq(pred).text()
        gold_text = gold if isinstance(gold, str) else as_token_seq(gold).text()
        return canonicalize(pred_text) == canonicalize(gold_text)
    return as_token_seq(pred).tokens == as_token_seq(gold).tokens


def is_schema_valid(frame: FrameLike) -> bool:
    """Convenience wrapper around check_validity."""
    try:
        return check_validity(frame).schema_valid
    except (EmptyInput, MalformedBracketToken):
        return False


def is_tree_valid(frame: FrameLike) -> bool:
    """Tree validity as reported per depth: non-empty and bracket-balanced."""
    seq = as_token_seq(frame)
    return len(seq) > 0 and check_validity(seq).balanced
