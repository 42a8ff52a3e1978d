"""
Report client.
Writes plot-ready delimited tables and structured JSON summaries under an output directory.
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from core.utils.error_handler import ReportWriteError
from core.utils.logging_utils import get_logger

logger = get_logger(__name__)


def _plain(value: Any) -> Any:
    """numpy scalars and arrays to JSON-native values."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    return value


class ReportClient:
    """Client for the output directory of one command run."""

    def __init__(self, out_dir: Union[str, Path], delimiter: str = ","):
        self.out_dir = Path(out_dir)
        self.delimiter = delimiter
        self.written: List[Path] = []

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def _prepare(self, name: str) -> Path:
        target = self.path(name)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ReportWriteError(f"cannot create output directory {target.parent}: {e}") from e
        return target

    def write_table(self, name: str, rows: Sequence[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> Path:
        """Delimited table; an empty row list still writes the header when columns are given."""
        target = self._prepare(name)
        frame = pd.DataFrame(list(rows), columns=list(columns) if columns else None)
        try:
            frame.to_csv(target, sep=self.delimiter, index=False, lineterminator="\n")
        except OSError as e:
            raise ReportWriteError(f"cannot write {target}: {e}") from e
        self.written.append(target)
        logger.info(f"Wrote {len(frame)} row(s) to {target}")
        return target

    def write_json(self, name: str, payload: Any) -> Path:
        target = self._prepare(name)
        try:
            target.write_text(json.dumps(_plain(payload), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            raise ReportWriteError(f"cannot write {target}: {e}") from e
        self.written.append(target)
        logger.info(f"Wrote {target}")
        return target
