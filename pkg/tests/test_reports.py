"""
Tests for report tables and their JSON/markdown renderings.
"""

import json
from pathlib import Path

import pytest

from services.confidence import ablate
from services.errors import ParseFailure
from services.records import DatasetRecord, PredictionRecord
from services.reports import (
    CE_COLUMNS,
    ReportKind,
    report_ce_results,
    report_em_tv_by_depth,
    report_error_distribution,
    report_stats,
    report_validity,
)

GOLDEN = Path(__file__).parent / "golden"

FRAMES_BY_DEPTH = {
    1: "[IN:A ]",
    2: "[IN:A [SL:S a ] ]",
    3: "[IN:A [SL:S [IN:B ] ] ]",
    4: "[IN:A [SL:S [IN:B [SL:T b ] ] ] ]",
    5: "[IN:A [SL:S [IN:B [SL:T [IN:C ] ] ] ] ]",
    6: "[IN:A [SL:S [IN:B [SL:T [IN:C [SL:U c ] ] ] ] ] ]",
}


def _depth_records():
    """Per depth: one exact match, one balanced miss, and an unbalanced miss at even depths."""
    records = []
    for d, gold in FRAMES_BY_DEPTH.items():
        records.append(PredictionRecord("u", gold, gold))
        records.append(PredictionRecord("u", gold, "[IN:Z ]"))
        if d % 2 == 0:
            records.append(PredictionRecord("u", gold, gold.rsplit(" ", 1)[0]))
    return records


def _shape(markdown):
    """Keep table headers and first cells; blank out the numbers."""
    table = [line for line in markdown.splitlines() if line.startswith("|")]
    shaped = table[:2]
    for line in table[2:]:
        cells = line.strip("|").split("|")
        shaped.append("| " + cells[0].strip() + " |" + " x |" * (len(cells) - 1))
    return "\n".join(shaped) + "\n"


def test_em_tv_by_depth_golden():
    """Test the depth table against its golden rendering."""
    report = report_em_tv_by_depth(_depth_records())
    expected = (GOLDEN / "em_tv_by_depth.md").read_text(encoding="utf-8")
    assert report.to_markdown() + "\n" == expected


def test_em_tv_all_correct_is_hundred():
    """Test perfect predictions on depths 1..6."""
    records = [PredictionRecord("u", gold, gold) for gold in FRAMES_BY_DEPTH.values()]
    rows = report_em_tv_by_depth(records).rows

    assert [row["depth"] for row in rows] == [1, 2, 3, 4, 5, 6]
    assert all(row["em"] == 100.0 and row["tv"] == 100.0 for row in rows)


def test_em_tv_unbalanced_depth_two():
    """Test that one unbalanced prediction scores zero on both metrics."""
    gold = FRAMES_BY_DEPTH[2]
    [row1, row2] = report_em_tv_by_depth([PredictionRecord("u", gold, "[IN:A [SL:S a ]")]).rows

    assert row1["n"] == 0 and row1["em"] is None
    assert (row2["em"], row2["tv"], row2["n"]) == (0.0, 0.0, 1)


def test_json_and_markdown_carry_same_values():
    """Test that both renderings show the same numbers."""
    report = report_em_tv_by_depth(_depth_records(), quarantined=3)
    data = json.loads(report.to_json())
    markdown = report.to_markdown()

    assert data["kind"] == ReportKind.EM_TV_BY_DEPTH.value
    assert data["metadata"]["quarantined"] == 3
    assert "- quarantined: 3" in markdown
    for row in data["rows"]:
        line = f"| {row['depth']} | {row['em']:.2f} | {row['tv']:.2f} | {row['n']} |"
        assert line in markdown


def test_error_distribution_by_language(mixed_records):
    """Test language buckets and the overall row."""
    report = report_error_distribution(mixed_records, bucket_by="language")
    rows = {row["bucket"]: row for row in report.rows}

    assert rows["en"]["sl"] == 100.0
    assert (rows["en"]["n"], rows["en"]["records"]) == (1, 2)
    assert rows["es"]["md"] == 50.0 and rows["es"]["lf"] == 50.0
    assert rows["es"]["valid"] == 50.0
    assert report.metadata["bucket_by"] == "language"


def test_error_distribution_overall(mixed_records):
    """Test the single overall bucket."""
    [row] = report_error_distribution(mixed_records).rows

    assert (row["in"], row["sl"], row["od"], row["md"], row["lf"]) == (0.0, 33.33, 0.0, 33.33, 33.33)
    assert row["valid"] == 66.67
    assert row["sl_count"] == 1
    assert sum(report_error_distribution(mixed_records).metadata["divergence_sources"].values()) == 3


def test_error_distribution_zero_errors():
    """Test that a bucket of exact matches has no percentages."""
    gold = FRAMES_BY_DEPTH[1]
    [row] = report_error_distribution([PredictionRecord("u", gold, gold)]).rows

    assert row["sl"] is None
    assert row["valid"] is None
    assert row["records"] == 1


def test_ce_ablation_table_shape(perturbed_corpus):
    """Test the ablation header and row labels against the golden shape."""
    train_set = perturbed_corpus(300, seed=1, correct_fraction=5 / 6)
    test_set = perturbed_corpus(120, seed=2, correct_fraction=5 / 6)
    report = report_ce_results(ablate(train_set, test_set), quarantined=0)

    expected = (GOLDEN / "ce_ablation_shape.md").read_text(encoding="utf-8")
    assert _shape(report.to_markdown()) == expected
    assert report.columns == CE_COLUMNS
    assert all(0.0 <= row["F1"] <= 100.0 for row in report.rows)


def test_validity_report_lists_failures():
    """Test valid, invalid and malformed lines in line order."""
    records = [
        DatasetRecord("", "[IN:X ]", line_number=1),
        DatasetRecord("", "[IN:X [SL:A a ]", line_number=3),
    ]
    report = report_validity(records, [ParseFailure(2, "empty label")])

    assert [row["line"] for row in report.rows] == [1, 2, 3]
    assert [row["schema_valid"] for row in report.rows] == [True, False, False]
    assert (report.metadata["valid"], report.metadata["invalid"]) == (1, 2)
    assert report.metadata["quarantined"] == 1


def test_stats_report(event_frame, nested_frame):
    """Test group counts in the dataset profile."""
    records = [
        DatasetRecord("u", event_frame, "en", "event"),
        DatasetRecord("u", event_frame, "en", "event"),
        DatasetRecord("u", nested_frame, "es", "navigation"),
        DatasetRecord("u", "[IN:X [SL:A a ]"),
    ]
    report = report_stats(records)
    counts = {(row["group"], row["value"]): row["count"] for row in report.rows}

    assert counts[("language", "en")] == 2
    assert counts[("language", "-")] == 1
    assert counts[("depth", "2")] == 2
    assert counts[("depth", "4")] == 1
    assert counts[("intent", "GET_EVENT")] == 2
    assert counts[("slot", "POINT_ON_MAP")] == 1
    assert report.metadata["not_schema_valid"] == 1


@pytest.mark.parametrize("value, cell", [(None, "-"), (True, "yes"), (12.5, "12.50"), (7, "7")])
def test_markdown_cells(value, cell):
    """Test cell formatting in markdown tables."""
    report = report_ce_results([])
    report.rows = [{"row": value}]
    assert f"| {cell} |" in report.to_markdown()


def _scan_brackets(frame):
    """(deepest nesting, balanced) by a running bracket level."""
    level = deepest = 0
    for unit in frame.split():
        if unit.startswith("["):
            level += 1
            deepest = max(deepest, level)
        elif unit == "]":
            level -= 1
            if level < 0:
                return deepest, False
    return deepest, level == 0


def test_em_tv_matches_direct_counts(perturbed_corpus):
    """Test depth-table percentages against hand-counted fractions."""
    records = perturbed_corpus(400, seed=6, correct_fraction=0.3, depths=[1, 2, 3, 4, 5, 6])
    rows = {row["depth"]: row for row in report_em_tv_by_depth(records).rows}

    for d in range(1, 7):
        bucket = [r for r in records if _scan_brackets(r.gold)[0] == d]
        em = sum(1 for r in bucket if r.pred == r.gold)
        tv = sum(1 for r in bucket if r.pred and _scan_brackets(r.pred)[1])
        assert rows[d]["n"] == len(bucket)
        assert (rows[d]["em_count"], rows[d]["tv_count"]) == (em, tv)
        assert rows[d]["em"] == round(100.0 * em / len(bucket), 2)
