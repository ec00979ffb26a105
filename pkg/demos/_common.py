"""Shared output handling for the demo scripts."""

import sys
from pathlib import Path

from sagnacsim import io as sio


def output_dir(name: str) -> Path:
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / "output"
    path = root / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def save_table(directory: Path, filename: str, header, rows) -> Path:
    path = sio.write_table(directory / filename, header, rows)
    print(f"  wrote {path}")
    return path
