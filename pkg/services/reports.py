"""
Reports Service.
Builds tabular reports (exact match / tree validity by depth, error
distributions, confidence results, validity listings and dataset statistics)
that render to JSON and markdown with the same values.

All percentages are rounded to 2 decimals; raw counts are always included.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Collection, Dict, Iterable, List, Optional, Sequence

import pandas as pd

from services import __version__
from services.confidence import PRF, AblationRow
from services.error_taxonomy import (
    DEFAULT_OOD_PREFIX,
    DivergenceSource,
    ErrorType,
    aggregate,
)
from services.errors import ParseFailure
from services.frame_core import (
    DEPTH_RULE,
    EM_RULE,
    TokenKind,
    check_validity,
    depth,
    exact_match,
    is_tree_valid,
    parse,
    tokenize,
)
from services.records import DatasetRecord, PredictionRecord
from services.utils import dumps_json

# Configure logging
logger = logging.getLogger(__name__)


class ReportKind(Enum):
    EM_TV_BY_DEPTH = "em_tv_by_depth"
    ERROR_DISTRIBUTION = "error_distribution"
    CE_RESULTS = "ce_results"
    VALIDITY = "validity"
    STATS = "stats"


def _pct(count: int, total: int) -> Optional[float]:
    if total == 0:
        return None
    return round(100.0 * count / total, 2)


def _cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value)


def base_metadata(quarantined: int = 0, **extra: Any) -> Dict[str, Any]:
    """Metadata carried by every report."""
    metadata: Dict[str, Any] = {
        "tool_version": __version__,
        "depth_rule": DEPTH_RULE,
        "em_rule": EM_RULE,
        "quarantined": quarantined,
    }
    metadata.update(extra)
    return metadata


@dataclass
class Report:
    """A titled table plus metadata."""
    kind: ReportKind
    title: str
    columns: List[str]
    rows: List[Dict[str, Any]]
    metadata: Dict[str, Any] = field(default_factory=base_metadata)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "title": self.title,
            "columns": list(self.columns),
            "rows": [{column: row.get(column) for column in self.columns} for row in self.rows],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return dumps_json(self.to_dict(), indent=2)

    def to_markdown(self) -> str:
        lines = [f"## {self.title}", ""]
        lines.append("| " + " | ".join(self.columns) + " |")
        lines.append("|" + "|".join("---" for _ in self.columns) + "|")
        for row in self.rows:
            lines.append("| " + " | ".join(_cell(row.get(column)) for column in self.columns) + " |")
        lines.append("")
        for key in sorted(self.metadata):
            value = self.metadata[key]
            if isinstance(value, dict):
                value = ", ".join(f"{k}={_cell(v)}" for k, v in value.items())
            lines.append(f"- {key}: {_cell(value)}")
        return "\n".join(lines)


def report_em_tv_by_depth(records: Sequence[PredictionRecord], quarantined: int = 0) -> Report:
    """
    Exact match and tree validity per gold depth.

    Rows cover every depth from 1 to the deepest gold frame; depths without
    records have n = 0 and no percentages.

    Example:
        >>> report = report_em_tv_by_depth(records)
        >>> [row["depth"] for row in report.rows]
        [1, 2, 3, 4, 5, 6]
    """
    table = pd.DataFrame(
        {
            "depth": [depth(parse(r.gold_tokens)) for r in records],
            "em": [exact_match(r.pred, r.gold) for r in records],
            "tv": [is_tree_valid(r.pred_tokens) for r in records],
        },
        columns=["depth", "em", "tv"],
    )

    rows: List[Dict[str, Any]] = []
    if not table.empty:
        grouped = table.groupby("depth").agg(
            n=("em", "size"), em_count=("em", "sum"), tv_count=("tv", "sum")
        )
        grouped = grouped.reindex(range(1, int(table["depth"].max()) + 1), fill_value=0)
        for d, row in grouped.iterrows():
            n, em_count, tv_count = int(row["n"]), int(row["em_count"]), int(row["tv_count"])
            rows.append({
                "depth": int(d),
                "em": _pct(em_count, n),
                "tv": _pct(tv_count, n),
                "n": n,
                "em_count": em_count,
                "tv_count": tv_count,
            })

    logger.info(f"EM/TV report over {len(records)} record(s), {len(rows)} depth row(s)")
    return Report(
        kind=ReportKind.EM_TV_BY_DEPTH,
        title="Exact match and tree validity by depth",
        columns=["depth", "em", "tv", "n", "em_count", "tv_count"],
        rows=rows,
        metadata=base_metadata(
            quarantined,
            records=len(records),
            tv_rule="tree validity: prediction is non-empty and bracket-balanced",
        ),
    )


def report_error_distribution(records: Sequence[PredictionRecord], bucket_by: str = "all",
                              quarantined: int = 0,
                              ood_labels: Optional[Collection[str]] = None,
                              ood_prefix: str = DEFAULT_OOD_PREFIX) -> Report:
    """
    First-error type distribution per bucket with tree validity of the
    incorrect predictions.
    """
    distributions = aggregate(records, bucket_by, ood_labels, ood_prefix)
    codes = [t.code for t in ErrorType]

    rows: List[Dict[str, Any]] = []
    sources = {s.value: 0 for s in DivergenceSource}
    for dist in distributions:
        percentages = dist.percentages()
        row: Dict[str, Any] = {"bucket": dist.bucket}
        for error_type in ErrorType:
            value = percentages[error_type]
            row[error_type.code] = None if value is None else round(value, 2)
        row["valid"] = _pct(dist.valid_count, dist.total)
        row["n"] = dist.total
        row["records"] = dist.records
        for error_type in ErrorType:
            row[f"{error_type.code}_count"] = dist.counts[error_type]
        rows.append(row)
        for source, count in dist.sources.items():
            sources[source.value] += count

    return Report(
        kind=ReportKind.ERROR_DISTRIBUTION,
        title=f"Error distribution by {bucket_by}",
        columns=["bucket"] + codes + ["valid", "n", "records"] + [f"{c}_count" for c in codes],
        rows=rows,
        metadata=base_metadata(
            quarantined,
            bucket_by=bucket_by,
            divergence_sources=sources,
            ood_rule=(f"explicit labels: {', '.join(sorted(ood_labels))}" if ood_labels
                      else f"intent label starts with '{ood_prefix}'"),
        ),
    )


def _prf_row(name: str, prf: PRF) -> Dict[str, Any]:
    return {
        "row": name,
        "P": round(100.0 * prf.precision, 2),
        "R": round(100.0 * prf.recall, 2),
        "F1": round(100.0 * prf.f1, 2),
        "tp": prf.tp,
        "fp": prf.fp,
        "fn": prf.fn,
        "tn": prf.tn,
        "precision_defined": prf.precision_defined,
    }


CE_COLUMNS = ["row", "P", "R", "F1", "tp", "fp", "fn", "tn", "precision_defined"]


def report_ce_results(rows: Iterable[AblationRow], quarantined: int = 0, **extra: Any) -> Report:
    """Positive-class P/R/F1 per ablation row (full, -length, -validity, -confidence)."""
    return Report(
        kind=ReportKind.CE_RESULTS,
        title="Confidence estimation (positive class = correct frame)",
        columns=list(CE_COLUMNS),
        rows=[_prf_row(row.name, row.prf) for row in rows],
        metadata=base_metadata(quarantined, **extra),
    )


def report_ce_eval(prf: PRF, quarantined: int = 0, **extra: Any) -> Report:
    """Single-row confidence result for one trained model."""
    return report_ce_results([AblationRow("model", None, prf)], quarantined, **extra)


def report_validity(records: Sequence[DatasetRecord], failures: Sequence[ParseFailure] = ()) -> Report:
    """
    Per-line validity listing of a frame file.

    Malformed lines count as invalid with their tokenizer error.
    """
    rows: List[Dict[str, Any]] = []
    for record in records:
        report = check_validity(tokenize(record.frame))
        row: Dict[str, Any] = {"line": record.line_number}
        row.update(report.to_dict())
        rows.append(row)
    for failure in failures:
        rows.append({
            "line": failure.line_number,
            "balanced": False,
            "prefix_legal": False,
            "schema_valid": False,
            "error_reason": failure.reason,
        })
    rows.sort(key=lambda r: r["line"] or 0)

    valid = sum(1 for row in rows if row["schema_valid"])
    invalid = len(rows) - valid
    return Report(
        kind=ReportKind.VALIDITY,
        title="Frame validity",
        columns=["line", "balanced", "prefix_legal", "schema_valid", "depth", "open_count",
                 "close_count", "error_index", "error_reason"],
        rows=rows,
        metadata=base_metadata(len(failures), valid=valid, invalid=invalid),
    )


def _ordered_counts(counter: Counter, numeric: bool = False) -> List[tuple]:
    if numeric:
        return sorted(counter.items())
    return sorted(counter.items(), key=lambda item: (-item[1], item[0]))


def report_stats(records: Sequence[DatasetRecord], quarantined: int = 0) -> Report:
    """
    Dataset profile: records per language and domain, gold depth histogram
    and intent/slot label occurrence counts.
    """
    tags = pd.DataFrame(
        [{"language": r.language or "-", "domain": r.domain or "-"} for r in records],
        columns=["language", "domain"],
    )
    depths: Counter = Counter()
    intents: Counter = Counter()
    slots: Counter = Counter()
    invalid = 0
    for record in records:
        tokens = tokenize(record.frame)
        report = check_validity(tokens)
        if not report.schema_valid:
            invalid += 1
            continue
        depths[report.depth] += 1
        for token in tokens:
            if token.kind is TokenKind.OPEN_INTENT:
                intents[token.label] += 1
            elif token.kind is TokenKind.OPEN_SLOT:
                slots[token.label] += 1

    rows: List[Dict[str, Any]] = []
    for group in ("language", "domain"):
        counts = Counter(tags[group].tolist()) if not tags.empty else Counter()
        rows.extend({"group": group, "value": value, "count": int(count)}
                    for value, count in _ordered_counts(counts))
    rows.extend({"group": "depth", "value": str(d), "count": n} for d, n in _ordered_counts(depths, numeric=True))
    rows.extend({"group": "intent", "value": v, "count": n} for v, n in _ordered_counts(intents))
    rows.extend({"group": "slot", "value": v, "count": n} for v, n in _ordered_counts(slots))

    return Report(
        kind=ReportKind.STATS,
        title="Dataset statistics",
        columns=["group", "value", "count"],
        rows=rows,
        metadata=base_metadata(quarantined, records=len(records), not_schema_valid=invalid),
    )
