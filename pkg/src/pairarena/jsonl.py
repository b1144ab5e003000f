"""Line-delimited JSON helpers shared by every file format in the arena."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator


class LineParseError(ValueError):
    """A line in a record file is not valid JSON."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: invalid JSON: {message}")
        self.line_no = line_no


def dumps_record(record: dict[str, Any]) -> str:
    """Canonical single-line form: UTF-8, insertion-ordered keys."""
    return json.dumps(record, ensure_ascii=False)


def read_records(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line_number, record) pairs, skipping blank lines."""
    with Path(path).open("r", encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                yield line_no, json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise LineParseError(line_no, exc.msg) from exc


def write_records(path: str | Path, records: Iterable[dict[str, Any]]) -> int:
    """Write records one per line; returns the number written."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with out.open("w", encoding="utf-8") as fp:
        for record in records:
            fp.write(dumps_record(record) + "\n")
            count += 1
    return count
