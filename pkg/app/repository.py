"""
Artifact repository — all disk output in one place.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Iterable, Sequence

from pydantic import BaseModel

logger = logging.getLogger(__name__)


def format_value(value) -> str:
    """Deterministic text for a CSV cell: floats as shortest round-trip repr."""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    try:
        number = float(value)
    except (TypeError, ValueError):
        return str(value)
    return repr(number)


class ArtifactRepository:
    """Writes CSV tables, JSON documents and rendered text under one output directory."""

    def __init__(self, output_dir: Path):
        self.output_dir = Path(output_dir)
        self.written: list[str] = []

    def _path(self, name: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir / name

    def _record(self, path: Path) -> str:
        if path.name not in self.written:
            self.written.append(path.name)
        logger.info(f"Wrote {path}")
        return path.name

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
        path = self._path(name)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
        return self._record(path)

    def write_json(self, name: str, document: BaseModel | dict) -> str:
        path = self._path(name)
        if isinstance(document, BaseModel):
            text = document.model_dump_json(indent=2)
        else:
            text = json.dumps(document, indent=2, sort_keys=True, allow_nan=True)
        path.write_text(text + "\n", encoding="utf-8")
        return self._record(path)

    def write_text(self, name: str, text: str) -> str:
        path = self._path(name)
        path.write_text(text, encoding="utf-8")
        return self._record(path)
