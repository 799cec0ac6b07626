"""
Shared fixtures for frameprobe tests.
"""

import json

import pytest

from services.error_taxonomy import ErrorType
from services.frame_generator import DEFAULT_INTENTS, DEFAULT_OOD_INTENTS, DEFAULT_SLOTS, generate_dataset
from services.perturbation import Ontology, ProbProfile, build_perturbed_corpus
from services.records import PredictionRecord

EVENT_FRAME = "[IN:GET_EVENT [SL:CATEGORY_EVENT fireworks ] [SL:DATE_TIME tonight ] ]"
NESTED_FRAME = "[IN:GET_ESTIMATED_DURATION [SL:DESTINATION [IN:GET_LOCATION [SL:POINT_ON_MAP the park ] ] ] ]"


@pytest.fixture
def event_frame():
    return EVENT_FRAME


@pytest.fixture
def nested_frame():
    return NESTED_FRAME


@pytest.fixture
def write_jsonl(tmp_path):
    """Write dicts (or raw strings) as lines of a JSONL file under tmp_path."""
    def _write(name, rows):
        path = tmp_path / name
        lines = [row if isinstance(row, str) else json.dumps(row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path
    return _write


@pytest.fixture
def mixed_records():
    """Four records: one correct, one slot error, one unbalanced mode error, one leaf error."""
    return [
        PredictionRecord("see fireworks tonight", EVENT_FRAME, EVENT_FRAME,
                         token_probs=(0.9,) * 8, language="en", domain="event"),
        PredictionRecord("see fireworks tonight", EVENT_FRAME,
                         "[IN:GET_EVENT [SL:NAME_EVENT fireworks ] [SL:DATE_TIME tonight ] ]",
                         token_probs=(0.6,) * 8, language="en", domain="event"),
        PredictionRecord("see fireworks tonight", EVENT_FRAME,
                         "[IN:GET_EVENT [SL:CATEGORY_EVENT fireworks [SL:DATE_TIME tonight ] ]",
                         token_probs=(0.6,) * 7, language="es", domain="event"),
        PredictionRecord("how long to the park", NESTED_FRAME,
                         "[IN:GET_ESTIMATED_DURATION [SL:DESTINATION [IN:GET_LOCATION [SL:POINT_ON_MAP park ] ] ] ]",
                         token_probs=(0.6,) * 9, language="es", domain="navigation"),
    ]


@pytest.fixture
def default_ontology():
    return Ontology(
        frozenset(DEFAULT_INTENTS + DEFAULT_OOD_INTENTS),
        frozenset(DEFAULT_SLOTS),
        frozenset(DEFAULT_OOD_INTENTS),
    )


@pytest.fixture
def perturbed_corpus(default_ontology):
    """Factory for synthetic prediction corpora built from generated gold frames."""
    def _build(n, seed=0, error_types=tuple(ErrorType), correct_fraction=0.0,
               prob_profile=ProbProfile(), variant=None, **generate_kwargs):
        samples = [r.as_sample() for r in generate_dataset(n, seed, **generate_kwargs)]
        records, _ = build_perturbed_corpus(
            samples, list(error_types), seed, default_ontology,
            prob_profile=prob_profile, correct_fraction=correct_fraction, variant=variant,
        )
        return records
    return _build
