"""
Tests for error injection, probability synthesis and perturbed corpora.
"""

import numpy as np
import pytest

from services.error_taxonomy import ErrorType
from services.errors import EmptyCorpus, NotSchemaValid, TypeNotApplicable
from services.frame_core import TokenSeq, check_validity, tokenize
from services.perturbation import (
    Ontology,
    PerturbationSpec,
    ProbProfile,
    Variant,
    build_perturbed_corpus,
    perturb,
    record_seed,
    scan_ontology,
    synth_probs,
)

SMALL = Ontology(frozenset({"X", "Y", "UNSUPPORTED"}), frozenset({"A", "B"}), frozenset({"UNSUPPORTED"}))


def _edit_distance(a, b):
    a, b = list(a), list(b)
    table = np.zeros((len(a) + 1, len(b) + 1), dtype=int)
    table[:, 0] = np.arange(len(a) + 1)
    table[0, :] = np.arange(len(b) + 1)
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i, j] = min(table[i - 1, j] + 1, table[i, j - 1] + 1, table[i - 1, j - 1] + cost)
    return int(table[len(a), len(b)])


def test_scan_ontology_single_frame():
    """Test label collection from one frame."""
    ontology = scan_ontology(["[IN:X [SL:A a ] ]"])

    assert ontology.intent_labels == {"X"}
    assert ontology.slot_labels == {"A"}
    assert ontology.ood_labels == frozenset()


def test_scan_ontology_finds_ood_labels():
    """Test that prefixed intents become out-of-domain labels."""
    ontology = scan_ontology(["[IN:X [SL:A a ] ]", "[IN:UNSUPPORTED ]"])
    assert ontology.ood_labels == {"UNSUPPORTED"}
    assert ontology.in_domain_intents == {"X"}


def test_scan_ontology_empty_corpus():
    """Test that scanning nothing raises EmptyCorpus."""
    with pytest.raises(EmptyCorpus):
        scan_ontology([])


def test_perturb_slot_picks_only_alternative():
    """Test slot substitution with a single alternative label."""
    ontology = Ontology(frozenset({"X"}), frozenset({"A", "B"}))
    seq, position = perturb("[IN:X [SL:A a ] ]", PerturbationSpec(ErrorType.SLOT), ontology)

    assert seq.text() == "[IN:X [SL:B a ] ]"
    assert position == 1


def test_perturb_delete_close_bare_intent():
    """Test removing the only close bracket."""
    seq, position = perturb("[IN:X ]", PerturbationSpec(ErrorType.MODE, variant=Variant.DELETE_CLOSE), SMALL)

    assert seq.text() == "[IN:X"
    assert position == 1
    assert not check_validity(seq).balanced


def test_perturb_drop_first_leaf_token():
    """Test dropping the preposition of a span."""
    spec = PerturbationSpec(ErrorType.LEAF, variant=Variant.DROP_FIRST)
    seq, position = perturb("[IN:X [SL:A on Monday ] ]", spec, SMALL)

    assert seq.text() == "[IN:X [SL:A Monday ] ]"
    assert position == 2


def test_perturb_substitute_leaf_uses_smallest_other_text():
    """Test leaf substitution picks the smallest other copy text."""
    spec = PerturbationSpec(ErrorType.LEAF, variant=Variant.SUBSTITUTE)
    seq, _ = perturb("[IN:X [SL:A on ] ]", spec, SMALL)
    assert seq.text() == "[IN:X [SL:A onon ] ]"


def test_perturb_ood_at_root():
    """Test OOD injection in both directions."""
    seq, position = perturb("[IN:X [SL:A a ] ]", PerturbationSpec(ErrorType.OOD), SMALL)
    assert seq.text() == "[IN:UNSUPPORTED [SL:A a ] ]"
    assert position == 0

    seq, _ = perturb("[IN:UNSUPPORTED ]", PerturbationSpec(ErrorType.OOD), SMALL)
    assert seq.text() == "[IN:X ]"


def test_perturb_intent_skips_ood_root():
    """Test that an out-of-domain root cannot host an intent error."""
    with pytest.raises(TypeNotApplicable):
        perturb("[IN:UNSUPPORTED ]", PerturbationSpec(ErrorType.INTENT), SMALL)


def test_perturb_slot_requires_a_slot():
    """Test that a bare intent cannot host a slot error."""
    with pytest.raises(TypeNotApplicable):
        perturb("[IN:X ]", PerturbationSpec(ErrorType.SLOT), SMALL)


def test_perturb_leaf_requires_a_span():
    """Test that a frame without copy tokens cannot host a leaf error."""
    with pytest.raises(TypeNotApplicable):
        perturb("[IN:X [SL:A ] ]", PerturbationSpec(ErrorType.LEAF), SMALL)


def test_perturb_rejects_invalid_gold():
    """Test that the gold frame must be schema-valid."""
    with pytest.raises(NotSchemaValid):
        perturb("[IN:X a ]", PerturbationSpec(ErrorType.MODE), SMALL)


def test_spec_rejects_foreign_variant():
    """Test that a variant must realize its error type."""
    with pytest.raises(ValueError):
        PerturbationSpec(ErrorType.SLOT, variant=Variant.DELETE_CLOSE)
    with pytest.raises(ValueError):
        PerturbationSpec(ErrorType.LEAF, seed=-1)


def test_perturb_is_deterministic():
    """Test that the same seed gives the same edit."""
    frame = "[IN:X [SL:A a b c ] [SL:B d e ] ]"
    spec = PerturbationSpec(ErrorType.MODE, seed=123)
    assert perturb(frame, spec, SMALL) == perturb(frame, spec, SMALL)


def test_single_edit_property(perturbed_corpus):
    """Test that every injection is one substitution or deletion."""
    for record in perturbed_corpus(200, seed=9):
        pred, gold = record.pred_tokens.tokens, record.gold_tokens.tokens
        assert _edit_distance(pred, gold) == 1
        assert len(gold) - len(pred) in (0, 1)


def test_mode_injections_change_token_kind(perturbed_corpus):
    """Test that mode edits change the kind at the injected position."""
    for record in perturbed_corpus(100, seed=2, error_types=[ErrorType.MODE]):
        position = record.injected_position
        gold = record.gold_tokens[position]
        pred = record.pred_tokens[position] if position < len(record.pred_tokens) else None
        assert pred is None or pred.kind is not gold.kind


def test_synth_probs_without_jitter():
    """Test that zero jitter yields the exact target mean."""
    spec = PerturbationSpec(ErrorType.SLOT, prob_profile=ProbProfile(0.9, 0.6, 0.0))
    tokens = tokenize("[IN:X [SL:A a ] ]")

    assert synth_probs(tokens, True, spec) == [0.9] * 5
    assert synth_probs(tokens, False, spec) == [0.6] * 5


def test_synth_probs_deterministic():
    """Test that equal seeds give equal lists."""
    spec = PerturbationSpec(ErrorType.SLOT, seed=42)
    tokens = tokenize("[IN:X [SL:A a ] ]")
    assert synth_probs(tokens, True, spec) == synth_probs(tokens, True, spec)


def test_synth_probs_sample_means():
    """Test that 50-token samples stay near their target means."""
    tokens = tokenize("[IN:X [SL:A " + " ".join(["w"] * 46) + " ] ]")
    assert len(tokens) == 50
    spec = PerturbationSpec(ErrorType.LEAF, seed=8, prob_profile=ProbProfile(0.9, 0.6, 0.05))

    correct = synth_probs(tokens, True, spec)
    incorrect = synth_probs(tokens, False, spec)

    assert abs(np.mean(correct) - 0.9) < 0.05
    assert abs(np.mean(incorrect) - 0.6) < 0.05
    assert all(0.0 < p <= 1.0 for p in correct + incorrect)


def test_synth_probs_empty_sequence():
    """Test that an empty sequence is refused."""
    with pytest.raises(ValueError):
        synth_probs(TokenSeq(()), True, PerturbationSpec(ErrorType.MODE))


@pytest.mark.parametrize("value", ["0.9,0.6", "0.6,0.9,0.02", "0.9,0.6,0.5", "a,b,c"])
def test_prob_profile_rejects_bad_values(value):
    """Test profile parsing and range checks."""
    with pytest.raises(ValueError):
        ProbProfile.parse(value)


def test_prob_profile_parse():
    """Test a valid profile string."""
    assert ProbProfile.parse("0.8, 0.5, 0.01") == ProbProfile(0.8, 0.5, 0.01)


def test_record_seed():
    """Test per-record seeds are seed XOR index."""
    assert record_seed(7, 0) == 7
    assert record_seed(7, 3) == 4


def test_build_perturbed_corpus_round_robin(event_frame):
    """Test type cycling and record fields."""
    samples = [("see fireworks tonight", event_frame, "en", "event")] * 4
    records, skipped = build_perturbed_corpus(
        samples, [ErrorType.SLOT, ErrorType.LEAF], seed=1, ontology=scan_ontology([event_frame, "[IN:X [SL:A a ] ]"]),
    )

    assert skipped == 0
    assert [r.injected_type for r in records] == ["slot", "leaf", "slot", "leaf"]
    for record in records:
        assert len(record.token_probs) == len(record.pred_tokens)
        assert record.language == "en"
        assert not record.is_correct


def test_build_perturbed_corpus_counts_skips(event_frame):
    """Test that inapplicable samples are skipped and counted."""
    samples = [("u", "[IN:X ]", None, None), ("u", event_frame, None, None)]
    ontology = scan_ontology([event_frame, "[IN:X ]"])

    records, skipped = build_perturbed_corpus(samples, [ErrorType.SLOT], seed=0, ontology=ontology)

    assert skipped == 1
    assert len(records) == 1


def test_build_perturbed_corpus_correct_fraction(perturbed_corpus):
    """Test that a correct share is kept with high probabilities."""
    records = perturbed_corpus(600, seed=4, correct_fraction=0.5)
    correct = [r for r in records if r.is_correct]

    assert 0.4 < len(correct) / len(records) < 0.6
    assert all(r.injected_type is None for r in correct)
    assert all(np.mean(r.token_probs) > 0.85 for r in correct)


def test_build_perturbed_corpus_rejects_bad_arguments(event_frame):
    """Test argument validation."""
    ontology = scan_ontology([event_frame])
    with pytest.raises(ValueError):
        build_perturbed_corpus([], [], 0, ontology)
    with pytest.raises(ValueError):
        build_perturbed_corpus([], [ErrorType.MODE], 0, ontology, correct_fraction=1.0)
