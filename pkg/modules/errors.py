# modules/errors.py
"""Exception hierarchy shared by the library and the command line.

The CLI maps ``ConfigError`` to exit code 1, ``DatasetError`` and
``CheckpointError`` to 2 and ``DivergenceError`` to 3.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional


class HgvaeError(Exception):
    """Root of every error raised on purpose by this package."""


class ConfigError(HgvaeError, ValueError):
    pass


class DatasetError(HgvaeError, ValueError):
    def __init__(self, message: str, path: Optional[Path] = None, line: Optional[int] = None):
        self.path = Path(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = f"{self.path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(f"{where}{message}")


class MissingFileError(DatasetError):
    pass


class ShapeMismatchError(DatasetError):
    pass


class DanglingEdgeError(DatasetError):
    pass


class InvalidValueError(DatasetError):
    pass


class SchemaError(DatasetError):
    pass


class CheckpointError(HgvaeError, ValueError):
    pass


class DivergenceError(HgvaeError, ArithmeticError):
    def __init__(self, component: str, epoch: int, value: float):
        self.component = component
        self.epoch = epoch
        self.value = value
        super().__init__(f"loss component '{component}' is not finite ({value}) at epoch {epoch}")
