"""File formats for grids, density matrices, count tables and summaries.

Grids: ``#`` comment header, then a first row holding a corner label and
the idler axis, then one row per signal sample with the signal axis value
first.  Complex grids are split into ``<stem>_re.csv`` and ``<stem>_im.csv``.
Floats are written with ``%.17g`` so a round trip is lossless.

All writers go through :func:`atomic_write`: contents land in a temporary
file in the destination directory and are renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from . import polarization as pol
from .errors import DomainError

FLOAT_FMT = "%.17g"


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(x) -> str:
    return FLOAT_FMT % float(x)


def grid_to_csv(signal_axis, idler_axis, values, comments: Sequence[str] = ()) -> str:
    values = np.asarray(values)
    if np.iscomplexobj(values):
        raise DomainError("complex grids are written as separate _re/_im files")
    if values.shape != (len(signal_axis), len(idler_axis)):
        raise DomainError("grid shape does not match the axes")
    out = io.StringIO()
    for line in comments:
        out.write(f"# {line}\n")
    out.write(",".join(["signal\\idler"] + [_fmt(w) for w in idler_axis]) + "\n")
    for w, row in zip(signal_axis, values):
        out.write(",".join([_fmt(w)] + [_fmt(v) for v in row]) + "\n")
    return out.getvalue()


GRID_HEADER = (
    "rows: signal angular frequency (rad/fs); columns: idler angular frequency (rad/fs)",
)


def write_grid(path, signal_axis, idler_axis, values, comments: Sequence[str] = ()) -> List[Path]:
    """Write a real grid to ``path`` or a complex grid to ``_re``/``_im`` siblings."""
    path = Path(path)
    header = list(GRID_HEADER) + list(comments)
    values = np.asarray(values)
    if np.iscomplexobj(values):
        stem = path.with_suffix("")
        return [
            atomic_write(f"{stem}_re.csv", grid_to_csv(signal_axis, idler_axis, values.real, header + ["part: real"])),
            atomic_write(f"{stem}_im.csv", grid_to_csv(signal_axis, idler_axis, values.imag, header + ["part: imaginary"])),
        ]
    return [atomic_write(path, grid_to_csv(signal_axis, idler_axis, values, header))]


def parse_grid(text: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`grid_to_csv`: ``(signal_axis, idler_axis, values)``."""
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    head = rows[0].split(",")
    idler = np.array([float(x) for x in head[1:]])
    body = np.array([[float(x) for x in ln.split(",")] for ln in rows[1:]])
    return body[:, 0], idler, body[:, 1:]


def read_grid(path) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return parse_grid(Path(path).read_text(encoding="utf-8"))


def density_matrix_to_json(rho) -> dict:
    rho = np.asarray(rho, dtype=complex)
    return {
        "basis": list(pol.BASIS_LABELS),
        "matrix": [[[float(v.real), float(v.imag)] for v in row] for row in rho],
    }


def density_matrix_from_json(doc: dict) -> np.ndarray:
    if list(doc.get("basis", [])) != list(pol.BASIS_LABELS):
        raise DomainError("density matrix basis must be HH, HV, VH, VV")
    m = np.array(doc["matrix"], dtype=float)
    if m.shape != (4, 4, 2):
        raise DomainError("matrix must be 4x4 of [re, im] pairs")
    return m[..., 0] + 1j * m[..., 1]


def dumps_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, doc) -> Path:
    return atomic_write(path, dumps_json(doc))


def table_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return out.getvalue()


def write_table(path, header, rows) -> Path:
    return atomic_write(path, table_to_csv(header, rows))


COUNT_COLUMNS = ("setting_signal", "setting_idler", "counts", "integration_s")


def counts_to_csv(records) -> str:
    rows = []
    for r in records:
        label = r.setting.label
        if len(label) != 2:
            raise DomainError("only lettered settings can be written to a count file")
        rows.append((label[0], label[1], r.counts, float(r.integration_time)))
    return table_to_csv(COUNT_COLUMNS, rows)


def read_counts(path):
    from .tomography import CountRecord, MeasurementSetting

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COUNT_COLUMNS:
            raise DomainError(f"count file columns must be {', '.join(COUNT_COLUMNS)}")
        return [
            CountRecord(MeasurementSetting.from_labels(row["setting_signal"], row["setting_idler"]),
                        int(row["counts"]), float(row["integration_s"]))
            for row in reader
        ]
