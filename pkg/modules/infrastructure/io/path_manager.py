# modules/infrastructure/io/path_manager.py
from __future__ import annotations

from pathlib import Path
from typing import Union


class RunPaths:
    """
    Every output path of one run.

    Layout:
    <out_dir>/
    ├── resolved_config.yaml
    ├── loss_history.csv
    ├── embeddings.csv
    ├── report.json
    ├── report.md
    ├── logs/
    └── checkpoints/
        ├── epoch_0050.hgv
        └── last.hgv
    """

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir).expanduser()
        self._checkpoint_dir = self.out_dir / "checkpoints"
        self._checkpoint_dir.mkdir(parents=True, exist_ok=True)

    @property
    def resolved_config(self) -> Path:
        return self.out_dir / "resolved_config.yaml"

    @property
    def loss_history(self) -> Path:
        return self.out_dir / "loss_history.csv"

    @property
    def embeddings(self) -> Path:
        return self.out_dir / "embeddings.csv"

    @property
    def report_json(self) -> Path:
        return self.out_dir / "report.json"

    @property
    def report_markdown(self) -> Path:
        return self.out_dir / "report.md"

    @property
    def log_dir(self) -> Path:
        return self.out_dir / "logs"

    @property
    def checkpoint_dir(self) -> Path:
        return self._checkpoint_dir

    def checkpoint(self, epoch: int) -> Path:
        """Checkpoint written after ``epoch`` epochs have completed."""
        return self._checkpoint_dir / f"epoch_{epoch:04d}.hgv"

    @property
    def last_checkpoint(self) -> Path:
        return self._checkpoint_dir / "last.hgv"

    def sweep_dir(self, param: str, value) -> Path:
        d = self.out_dir / f"sweep_{param}_{value}"
        d.mkdir(parents=True, exist_ok=True)
        return d
