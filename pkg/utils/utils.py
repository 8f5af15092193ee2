# utils/utils.py
from __future__ import annotations

import os
import sys
from pathlib import Path
from typing import Union

PathLike = Union[str, Path]


def get_base_path() -> str:
    """
    Return the project root.

    Inside a frozen (PyInstaller) build this is the directory of the
    executable, otherwise the repository root one level above ``utils/``.
    """
    if getattr(sys, "frozen", False):
        return os.path.dirname(sys.executable)
    return os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))


def ensure_dir(p: PathLike) -> Path:
    pth = Path(p).expanduser()
    pth.mkdir(parents=True, exist_ok=True)
    return pth


def round_half_up(x: float) -> int:
    """Round to the nearest integer with halves away from zero."""
    return int(x + 0.5) if x >= 0 else -int(-x + 0.5)
