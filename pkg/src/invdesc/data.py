"""Paths to the bundled synthetic image corpus.

Three 128x128 piecewise-smooth shape scenes plus one 64x64 crop with
strong gradient content, stored as binary PGM under ``invdesc/data``.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

__all__ = ["corpus_paths", "sample_path"]


def _data_dir() -> Path:
    return Path(resources.files("invdesc") / "data" / "patches")


def corpus_paths() -> list[Path]:
    """Sorted paths of the bundled full-size corpus images."""
    paths = sorted(_data_dir().glob("shapes_*.pgm"))
    if not paths:
        raise FileNotFoundError("bundled corpus images are missing")
    return paths


def sample_path() -> Path:
    """Path of the bundled 64x64 high-gradient sample crop."""
    p = _data_dir() / "sample_64.pgm"
    if not p.exists():
        raise FileNotFoundError("bundled sample crop is missing")
    return p
