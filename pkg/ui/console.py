# ui/console.py
import sys
from pathlib import Path
from typing import Any, Dict, Mapping, Sequence, TextIO

import pandas as pd

from core.utils.logging_utils import get_logger

logger = get_logger(__name__)


def render_table(title: str, rows: Sequence[Dict[str, Any]], stream: TextIO = None) -> None:
    """Print rows as an aligned text table under a heading."""
    stream = stream or sys.stdout
    print(f"\n{title}", file=stream)
    print("-" * len(title), file=stream)
    if not rows:
        print("(no rows)", file=stream)
        return
    frame = pd.DataFrame(list(rows))
    print(frame.to_string(index=False, na_rep="-"), file=stream)


def render_summary(title: str, values: Mapping[str, Any], stream: TextIO = None) -> None:
    stream = stream or sys.stdout
    print(f"\n{title}", file=stream)
    width = max((len(str(k)) for k in values), default=0)
    for key, value in values.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        print(f"  {str(key).ljust(width)}  {value}", file=stream)


def render_written(paths: Sequence[Path], stream: TextIO = None) -> None:
    stream = stream or sys.stdout
    if not paths:
        return
    print("\nWrote:", file=stream)
    for path in paths:
        print(f"  {path}", file=stream)


def render_dry_run(command: str, plan: Mapping[str, Any], stream: TextIO = None) -> None:
    """Dry runs print what would happen and touch nothing."""
    render_summary(f"[dry-run] {command}: configuration is valid, nothing written", plan, stream)
