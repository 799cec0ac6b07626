"""
Corpus I/O Service.
Reads gold datasets and prediction files, and writes datasets, prediction
corpora and oracle pair files.

Malformed lines are collected as ParseFailure entries with their 1-based line
numbers instead of being dropped silently. Loading only checks that frames
tokenize; schema validity is judged by the consumer (`validate` reports it,
`load_predictions` quarantines records whose gold is not schema-valid).
"""

import csv
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import pandas as pd

from services.errors import EmptyDataset, EmptyInput, MalformedBracketToken, ParseFailure, UnreadableFile
from services.frame_core import tokenize
from services.oracle_builder import MARKER_PATTERN, SEPARATOR, OracleKind, OraclePair
from services.records import DatasetRecord, PredictionRecord
from services.utils import PathLike, clean_string, read_lines, write_json, write_jsonl, write_lines

# Configure logging
logger = logging.getLogger(__name__)

TSV_COLUMNS = ["utterance", "frame", "language", "domain"]


class DatasetFormat(Enum):
    TSV = "tsv"
    JSONL = "jsonl"
    FRAMES = "frames"

    @classmethod
    def from_path(cls, path: PathLike) -> "DatasetFormat":
        """Guess the format from the file suffix (.tsv, .jsonl/.json, anything else: frames)."""
        suffix = Path(path).suffix.lower()
        if suffix == ".tsv":
            return cls.TSV
        if suffix in (".jsonl", ".json"):
            return cls.JSONL
        return cls.FRAMES


@dataclass
class LoadResult:
    """Records loaded from one file plus the lines that failed."""
    records: List[Any] = field(default_factory=list)
    failures: List[ParseFailure] = field(default_factory=list)

    @property
    def quarantined(self) -> int:
        return len(self.failures)


def _optional_tag(value: Any) -> Optional[str]:
    if value is None:
        return None
    text = str(value).strip()
    return text or None


class CorpusImporter:
    """
    Loads one dataset file into DatasetRecord entries.

    Handles:
    - TSV: utterance TAB frame [TAB language [TAB domain]]
    - JSONL: {"utterance", "frame", optional "language", "domain"} per line
    - frames: one frame per line, utterance left empty
    """

    def __init__(self, path: PathLike, fmt: Optional[DatasetFormat] = None):
        """
        Initialize the importer.

        Args:
            path: Dataset file
            fmt: Format; guessed from the suffix when omitted
        """
        self.path = Path(path)
        self.fmt = fmt or DatasetFormat.from_path(self.path)
        logger.debug(f"CorpusImporter initialized for {self.path} ({self.fmt.value})")

    def _check_frame(self, frame: str, line_number: int) -> None:
        try:
            tokenize(frame)
        except (EmptyInput, MalformedBracketToken) as e:
            raise ParseFailure(line_number, str(e)) from e

    def load_tsv(self) -> LoadResult:
        """
        Read the TSV layout with pandas.

        Quoting is disabled so quotes in utterances survive; columns beyond
        the fourth are ignored.

        Raises:
            UnreadableFile: If the file is missing or not UTF-8
        """
        if not self.path.is_file():
            raise UnreadableFile(f"File not found: {self.path}")

        extra_columns = []

        def _truncate(bad_line: List[str]) -> List[str]:
            extra_columns.append(len(bad_line))
            return bad_line[:len(TSV_COLUMNS)]

        try:
            df = pd.read_csv(
                self.path,
                sep="\t",
                header=None,
                names=TSV_COLUMNS,
                index_col=False,
                dtype=str,
                keep_default_na=False,
                quoting=csv.QUOTE_NONE,
                skip_blank_lines=False,
                engine="python",
                encoding="utf-8-sig",
                on_bad_lines=_truncate,
            )
        except pd.errors.EmptyDataError:
            df = pd.DataFrame(columns=TSV_COLUMNS)
        except (OSError, UnicodeDecodeError) as e:
            raise UnreadableFile(f"Cannot read {self.path} as UTF-8: {e}") from e

        df = df.fillna("")
        if extra_columns:
            logger.warning(f"{len(extra_columns)} TSV row(s) in {self.path.name} had extra columns (ignored)")

        result = LoadResult()
        for index, row in enumerate(df.to_dict(orient="records")):
            line_number = index + 1
            utterance = row["utterance"].strip()
            frame = row["frame"].strip()
            if not utterance and not frame and not row["language"] and not row["domain"]:
                continue
            try:
                if not frame:
                    raise ParseFailure(line_number, "missing frame column")
                self._check_frame(frame, line_number)
            except ParseFailure as e:
                result.failures.append(e)
                continue
            result.records.append(DatasetRecord(
                utterance=utterance,
                frame=frame,
                language=_optional_tag(row["language"]),
                domain=_optional_tag(row["domain"]),
                line_number=line_number,
            ))
        return result

    def load_jsonl(self) -> LoadResult:
        """Read one JSON object per line; blank lines are skipped."""
        result = LoadResult()
        for index, line in enumerate(read_lines(self.path)):
            line_number = index + 1
            if not line.strip():
                continue
            try:
                result.records.append(self._jsonl_record(line, line_number))
            except ParseFailure as e:
                result.failures.append(e)
        return result

    def _jsonl_record(self, line: str, line_number: int) -> DatasetRecord:
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseFailure(line_number, f"invalid JSON: {e.msg}") from e
        if not isinstance(data, dict):
            raise ParseFailure(line_number, "expected a JSON object")
        for key in ("utterance", "frame"):
            if key not in data:
                raise ParseFailure(line_number, f"missing '{key}' key")
            if not isinstance(data[key], str):
                raise ParseFailure(line_number, f"'{key}' must be a string")
        for key in ("language", "domain"):
            if data.get(key) is not None and not isinstance(data[key], str):
                raise ParseFailure(line_number, f"'{key}' must be a string")

        self._check_frame(data["frame"], line_number)
        return DatasetRecord(
            utterance=data["utterance"].strip(),
            frame=data["frame"].strip(),
            language=_optional_tag(data.get("language")),
            domain=_optional_tag(data.get("domain")),
            line_number=line_number,
        )

    def load_frames(self) -> LoadResult:
        """Read one frame per line."""
        result = LoadResult()
        for index, line in enumerate(read_lines(self.path)):
            line_number = index + 1
            frame = line.strip()
            if not frame:
                continue
            try:
                self._check_frame(frame, line_number)
            except ParseFailure as e:
                result.failures.append(e)
                continue
            result.records.append(DatasetRecord("", frame, line_number=line_number))
        return result

    def load(self) -> LoadResult:
        """
        Load the file in its format.

        Raises:
            UnreadableFile: If the file cannot be read
            EmptyDataset: If no line produced a record
        """
        logger.info(f"Loading {self.fmt.value} dataset: {self.path}")
        loaders = {
            DatasetFormat.TSV: self.load_tsv,
            DatasetFormat.JSONL: self.load_jsonl,
            DatasetFormat.FRAMES: self.load_frames,
        }
        result = loaders[self.fmt]()
        if not result.records:
            raise EmptyDataset(str(self.path), result.failures)

        logger.info(f"Loaded {len(result.records)} record(s) from {self.path.name}, {result.quarantined} malformed line(s)")
        for failure in result.failures:
            logger.warning(f"{self.path.name}: {failure}")
        return result


def load_dataset(path: PathLike, fmt: Optional[DatasetFormat] = None) -> LoadResult:
    """
    Load a gold dataset.

    Args:
        path: TSV, JSONL or frames file
        fmt: Format; guessed from the suffix when omitted

    Returns:
        LoadResult with DatasetRecord entries and per-line failures

    Raises:
        UnreadableFile: If the file cannot be read
        EmptyDataset: If nothing loads

    Example:
        >>> result = load_dataset("data/dev.tsv")
        >>> print(f"{len(result.records)} records, {result.quarantined} failures")
    """
    return CorpusImporter(path, fmt).load()


def load_predictions(path: PathLike) -> LoadResult:
    """
    Load a PredictionRecord JSONL file.

    Records that fail to decode or violate the record invariants (gold not
    schema-valid, malformed pred, token_probs misaligned) are quarantined with
    their line number and reason and never reach any metric.

    Raises:
        UnreadableFile: If the file cannot be read
        EmptyDataset: If no record survives
    """
    path = Path(path)
    logger.info(f"Loading predictions: {path}")
    result = LoadResult()
    for index, line in enumerate(read_lines(path)):
        line_number = index + 1
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            result.failures.append(ParseFailure(line_number, f"invalid JSON: {e.msg}"))
            continue
        try:
            record = PredictionRecord.from_dict(data)
            record.validate()
        except ValueError as e:
            result.failures.append(ParseFailure(line_number, str(e)))
            continue
        result.records.append(record)

    if not result.records:
        raise EmptyDataset(str(path), result.failures)

    logger.info(f"Loaded {len(result.records)} prediction(s), quarantined {result.quarantined}")
    for failure in result.failures:
        logger.warning(f"{path.name}: quarantined {failure}")
    return result


def write_dataset(path: PathLike, records: Iterable[DatasetRecord],
                  fmt: Optional[DatasetFormat] = None) -> Path:
    """Write a gold dataset in TSV, JSONL or frames layout."""
    fmt = fmt or DatasetFormat.from_path(path)
    records = list(records)
    if fmt is DatasetFormat.JSONL:
        return write_jsonl(path, (record.to_dict() for record in records))
    if fmt is DatasetFormat.FRAMES:
        return write_lines(path, (record.frame for record in records))

    lines = []
    for record in records:
        columns = [clean_string(record.utterance), record.frame, record.language or "", record.domain or ""]
        while len(columns) > 2 and not columns[-1]:
            columns.pop()
        lines.append("\t".join(columns))
    return write_lines(path, lines)


def write_predictions(path: PathLike, records: Iterable[PredictionRecord]) -> Path:
    """Write PredictionRecord JSONL in fixed key order."""
    return write_jsonl(path, (record.to_dict() for record in records))


def write_oracle_files(out_dir: PathLike, kind: OracleKind, pairs: Sequence[OraclePair],
                       skipped: int = 0) -> List[Path]:
    """
    Write one oracle condition as `<kind>.tsv`, `<kind>.jsonl` and `<kind>.meta.json`.

    Returns:
        The three written paths
    """
    out_dir = Path(out_dir)
    tsv = write_lines(out_dir / f"{kind.value}.tsv", (f"{p.source}\t{p.target}" for p in pairs))
    jsonl = write_jsonl(out_dir / f"{kind.value}.jsonl", (p.to_dict() for p in pairs))
    meta: Dict[str, Any] = {
        "kind": kind.value,
        "separator": SEPARATOR,
        "marker_pattern": MARKER_PATTERN.pattern,
        "pairs": len(pairs),
        "skipped": skipped,
    }
    meta_path = write_json(out_dir / f"{kind.value}.meta.json", meta)
    logger.info(f"Wrote {len(pairs)} {kind.value} pair(s) to {out_dir}")
    return [tsv, jsonl, meta_path]
