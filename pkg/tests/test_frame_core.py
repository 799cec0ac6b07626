"""
Tests for frame tokenization, parsing, validity and depth.
"""

import itertools

import numpy as np
import pytest

from services.errors import EmptyInput, MalformedBracketToken, NotSchemaValid
from services.frame_core import (
    FrameToken,
    FrameTree,
    IntentNode,
    SlotNode,
    TokenKind,
    TokenSeq,
    canonicalize,
    check_validity,
    depth,
    exact_match,
    frame_labels,
    is_schema_valid,
    is_tree_valid,
    iter_slots,
    parse,
    serialize,
    tokenize,
)
from services.frame_generator import Vocabulary, random_tree


def test_tokenize_event_frame():
    """Test that each whitespace unit becomes one token of the right kind."""
    seq = tokenize("[IN:GET_EVENT [SL:DATE tonight ] ]")

    assert list(seq) == [
        FrameToken.open_intent("GET_EVENT"),
        FrameToken.open_slot("DATE"),
        FrameToken.copy("tonight"),
        FrameToken.close(),
        FrameToken.close(),
    ]


def test_tokenize_single_close():
    """Test that a lone close bracket tokenizes."""
    assert list(tokenize("]")) == [FrameToken.close()]


def test_tokenize_empty_label_is_malformed():
    """Test that an open bracket without a label is rejected with its index."""
    with pytest.raises(MalformedBracketToken) as exc_info:
        tokenize("[IN:X [SL: a ] ]")
    assert exc_info.value.index == 1


def test_tokenize_empty_text():
    """Test that blank input raises EmptyInput."""
    with pytest.raises(EmptyInput):
        tokenize("   \t ")


def test_tokenize_case_insensitive():
    """Test that lower-case prefixes are accepted and upper-cased on request."""
    seq = tokenize("[in:unsupported ]", case_insensitive=True)
    assert seq[0] == FrameToken.open_intent("UNSUPPORTED")
    # without the flag the unit is an ordinary copy token
    assert tokenize("[in:unsupported ]")[0].kind is TokenKind.COPY


def test_token_seq_slicing_and_text():
    """Test TokenSeq helpers."""
    seq = TokenSeq.from_text("[IN:X  [SL:A   a ] ]")
    assert seq.text() == "[IN:X [SL:A a ] ]"
    assert isinstance(seq[1:3], TokenSeq)
    assert seq[1:3].text() == "[SL:A a"


def test_frame_token_rejects_bad_fields():
    """Test FrameToken invariants."""
    with pytest.raises(ValueError):
        FrameToken(TokenKind.CLOSE, label="X")
    with pytest.raises(ValueError):
        FrameToken.copy("two words")
    with pytest.raises(ValueError):
        FrameToken.open_intent("")


def test_check_validity_minimal_frame():
    """Test the report of the smallest valid frame."""
    report = check_validity(tokenize("[IN:X ]"))

    assert report.open_count == 1
    assert report.close_count == 1
    assert report.balanced
    assert report.schema_valid
    assert report.depth == 1


def test_check_validity_missing_close():
    """Test that a missing close is unbalanced and never schema-valid."""
    report = check_validity(tokenize("[IN:X [SL:A a ]"))

    assert report.open_count == 2
    assert report.close_count == 1
    assert not report.balanced
    assert not report.schema_valid
    assert report.depth is None


def test_check_validity_nested_depth():
    """Test depth of an intent nested in a slot."""
    report = check_validity(tokenize("[IN:X [SL:A [IN:Y ] ] ]"))
    assert report.schema_valid
    assert report.depth == 3


def test_check_validity_balanced_but_not_schema_valid():
    """Test that balance is reported even when the tree constraints fail."""
    report = check_validity(tokenize("[IN:X a ]"))

    assert report.balanced
    assert not report.schema_valid
    assert report.error_index == 1


def test_check_validity_close_before_open():
    """Test that an early close makes the prefix illegal."""
    report = check_validity(tokenize("] [IN:X"))
    assert not report.prefix_legal
    assert not report.balanced


def test_parse_event_frame():
    """Test the tree of a one-slot frame."""
    tree = parse("[IN:GET_EVENT [SL:DATE tonight ] ]")

    assert tree.root.label == "GET_EVENT"
    assert len(tree.root.children) == 1
    assert tree.root.children[0].label == "DATE"
    assert tree.root.children[0].leaf_span == ("tonight",)


def test_parse_unsupported_frame():
    """Test the bare out-of-domain frame."""
    tree = parse("[IN:UNSUPPORTED ]")
    assert tree.root == IntentNode("UNSUPPORTED")


@pytest.mark.parametrize("text, index", [
    ("[SL:DATE ]", 0),
    ("[IN:X a ]", 1),
    ("[IN:X [IN:Y ] ]", 1),
    ("[IN:X [SL:A [SL:B ] ] ]", 2),
    ("[IN:X [SL:A a [IN:Y ] ] ]", 3),
    ("[IN:X [SL:A [IN:Y ] a ] ]", 4),
    ("[IN:X ] [IN:Y ]", 2),
    ("[IN:X [SL:A a ]", 4),
])
def test_parse_reports_first_offending_index(text, index):
    """Test NotSchemaValid indices for each violated constraint."""
    with pytest.raises(NotSchemaValid) as exc_info:
        parse(text)
    assert exc_info.value.index == index


@pytest.mark.parametrize("text, expected", [
    ("[IN:X ]", 1),
    ("[IN:X [SL:A a ] ]", 2),
    ("[IN:X [SL:A [IN:Y [SL:B b ] ] ] ]", 4),
    ("[IN:X [SL:A ] ]", 2),
])
def test_depth(text, expected):
    """Test depth counts intent and slot levels."""
    assert depth(parse(text)) == expected


@pytest.mark.parametrize("text", [
    "[IN:GET_EVENT [SL:DATE tonight ] ]",
    "[IN:UNSUPPORTED ]",
    "[IN:X [SL:A [IN:Y [SL:B b c ] ] ] [SL:C ] ]",
])
def test_serialize_round_trip(text):
    """Test tokenize -> parse -> serialize is the identity on canonical text."""
    assert serialize(parse(tokenize(text))) == text


def test_exact_match():
    """Test exact match rules."""
    gold = "[IN:X [SL:A a ] ]"
    assert exact_match(gold, gold)
    assert exact_match("[IN:X  [SL:A a ]\t]", gold)
    assert not exact_match("[IN:X ]", "[IN:Y ]")
    assert not exact_match("[IN:X [SL:A a ] ]", "[IN:X [SL:A a ]")
    assert exact_match(tokenize(gold), tokenize(gold))


def test_canonicalize():
    """Test whitespace normalization."""
    assert canonicalize("  [IN:X \n ] ") == "[IN:X ]"


def test_iter_slots_and_labels(nested_frame):
    """Test slot order and collected labels."""
    tree = parse(nested_frame)
    assert [slot.label for slot in iter_slots(tree)] == ["DESTINATION", "POINT_ON_MAP"]

    intents, slots = frame_labels(tree)
    assert intents == {"GET_ESTIMATED_DURATION", "GET_LOCATION"}
    assert slots == {"DESTINATION", "POINT_ON_MAP"}


def test_is_schema_valid_never_raises():
    """Test the boolean wrapper on malformed text."""
    assert is_schema_valid("[IN:X ]")
    assert not is_schema_valid("[IN: ]")
    assert not is_schema_valid("")


def test_is_tree_valid():
    """Test tree validity is non-empty and balanced."""
    assert is_tree_valid("[IN:X a ]")
    assert not is_tree_valid("[IN:X")
    assert not is_tree_valid(TokenSeq(()))


def test_slot_node_rejects_mixed_children():
    """Test a slot cannot hold intents and a leaf span at once."""
    with pytest.raises(ValueError):
        SlotNode("A", children=(IntentNode("X"),), leaf_span=("a",))


def _stack_balanced(tokens):
    stack = []
    for token in tokens:
        if token.kind is TokenKind.CLOSE:
            if not stack:
                return False
            stack.pop()
        elif token.kind is not TokenKind.COPY:
            stack.append(token)
    return not stack


def _recursive_depth(node):
    # intents and slots both add one level
    return 1 + max([_recursive_depth(child) for child in node.children] or [0])


FULL_ALPHABET = (
    FrameToken.open_intent("X"),
    FrameToken.open_intent("Y"),
    FrameToken.open_slot("A"),
    FrameToken.open_slot("B"),
    FrameToken.close(),
    FrameToken.copy("a"),
    FrameToken.copy("b"),
)


def test_balance_matches_stack_simulator_full_alphabet():
    """Test balance against an independent stack over every sequence of length <= 5."""
    for length in range(1, 6):
        for combo in itertools.product(FULL_ALPHABET, repeat=length):
            assert check_validity(TokenSeq(combo)).balanced == _stack_balanced(combo), combo


@pytest.mark.slow
def test_balance_matches_stack_simulator_up_to_twelve():
    """Test balance on every sequence of length <= 12 over one symbol per bracket role."""
    # balance depends on token kind only, so one open, one close and one copy cover all kind patterns
    reduced = (FrameToken.open_intent("X"), FrameToken.close(), FrameToken.copy("a"))
    for length in range(1, 13):
        for combo in itertools.product(reduced, repeat=length):
            assert check_validity(TokenSeq(combo)).balanced == _stack_balanced(combo), combo


def test_depth_matches_recursive_oracle():
    """Test depth against an independent recursion on 1,000 random trees."""
    rng = np.random.default_rng(2024)
    vocab = Vocabulary.synthetic(30, 30)
    for _ in range(1000):
        tree = random_tree(rng, vocab, max_depth=8)
        assert depth(tree) == _recursive_depth(tree.root)
        assert depth(parse(serialize(tree))) == depth(tree)


def test_frame_tree_equality_after_round_trip():
    """Test that parsing the serialization yields an equal tree."""
    tree = FrameTree(IntentNode("X", (SlotNode("A", leaf_span=("a", "b")), SlotNode("B"))))
    assert parse(serialize(tree)) == tree
