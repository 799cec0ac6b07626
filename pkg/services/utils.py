"""
Utility functions and helpers for frameprobe.
Text file reading and writing shared by the loaders, writers and model store.

All files are UTF-8. A BOM is tolerated on read and never written; output
uses "\n" line endings so repeated runs are byte-identical.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from services.errors import UnreadableFile

PathLike = Union[str, Path]


def read_lines(path: PathLike) -> List[str]:
    """
    Read a UTF-8 text file into lines without line terminators.

    CRLF and LF endings give identical results.

    Raises:
        UnreadableFile: If the file is missing, unreadable or not UTF-8
    """
    path = Path(path)
    if not path.is_file():
        raise UnreadableFile(f"File not found: {path}")
    try:
        text = path.read_text(encoding="utf-8-sig")
    except (OSError, UnicodeDecodeError) as e:
        raise UnreadableFile(f"Cannot read {path} as UTF-8: {e}") from e
    return text.splitlines()


def clean_string(text: Optional[str]) -> str:
    """Collapse runs of whitespace to single spaces."""
    if not text:
        return ""
    return " ".join(text.split())


def ensure_directory(path: Path) -> Path:
    """
    Ensure a directory exists, creating it if necessary.

    Args:
        path: Directory path to ensure exists

    Returns:
        Path object of the directory
    """
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_lines(path: PathLike, lines: Iterable[str]) -> Path:
    """Write lines as UTF-8 with "\n" terminators, creating parent directories."""
    path = Path(path)
    ensure_directory(path.parent)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line)
            f.write("\n")
    return path


def dumps_json(data: Any, indent: Optional[int] = None) -> str:
    """Deterministic JSON text: sorted keys, non-ASCII kept as is."""
    if indent is None:
        return json.dumps(data, ensure_ascii=False, sort_keys=True, separators=(", ", ": "))
    return json.dumps(data, ensure_ascii=False, sort_keys=True, indent=indent)


def write_json(path: PathLike, data: Any) -> Path:
    """Write one pretty-printed JSON document."""
    return write_lines(path, [dumps_json(data, indent=2)])


def write_jsonl(path: PathLike, rows: Iterable[Dict[str, Any]]) -> Path:
    """
    Write one JSON object per line.

    Keys keep their insertion order so record files read naturally.
    """
    return write_lines(path, (json.dumps(row, ensure_ascii=False) for row in rows))
