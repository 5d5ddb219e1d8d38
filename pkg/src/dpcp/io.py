"""Dataset file formats: a CSV form and a compact binary container.

CSV: first line is the header marker ``dim,label``; every following line is
one dataset column as D comma-separated coordinates followed by a label field
in {in, out, unk} (``unk`` on every row iff the dataset is unlabeled).

Binary container: magic ``DPCP``, version u16, D u32, L u32, label-flag u8,
then the columns as little-endian float64 in column-major order, then (when
the flag is 1) one label byte per column (1 = inlier, 0 = outlier).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import Dataset

MAGIC = b"DPCP"
VERSION = 1

_LABEL_TO_TEXT = {True: "in", False: "out"}
_TEXT_TO_LABEL = {"in": True, "out": False}


def write_csv(data: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", encoding="ascii", newline="\n") as fh:
        fh.write("dim,label\n")
        for j in range(data.n_columns):
            coords = ",".join(repr(float(v)) for v in data.columns[:, j])
            label = "unk" if data.inlier_mask is None else _LABEL_TO_TEXT[bool(data.inlier_mask[j])]
            fh.write(f"{coords},{label}\n")


def read_csv(path) -> Dataset:
    path = Path(path)
    cols: list[list[float]] = []
    labels: list[str] = []
    with path.open("r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "dim,label":
            raise ValueError(f"{path}: bad CSV header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) < 3:
                raise ValueError(f"{path}:{lineno}: expected >= 2 coordinates plus a label")
            try:
                cols.append([float(v) for v in fields[:-1]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad coordinate ({exc})") from None
            labels.append(fields[-1])
    if not cols:
        raise ValueError(f"{path}: no data rows")
    widths = {len(c) for c in cols}
    if len(widths) != 1:
        raise ValueError(f"{path}: inconsistent row widths {sorted(widths)}")
    columns = np.array(cols, dtype=np.float64).T
    if all(lab == "unk" for lab in labels):
        mask = None
    else:
        try:
            mask = np.array([_TEXT_TO_LABEL[lab] for lab in labels])
        except KeyError as exc:
            raise ValueError(f"{path}: unknown label {exc}") from None
    return Dataset(columns, mask)


def write_binary(data: Dataset, path) -> None:
    path = Path(path)
    flag = 1 if data.inlier_mask is not None else 0
    header = MAGIC + struct.pack("<HIIB", VERSION, data.ambient_dim, data.n_columns, flag)
    body = np.asfortranarray(data.columns, dtype="<f8").tobytes(order="F")
    with path.open("wb") as fh:
        fh.write(header)
        fh.write(body)
        if flag:
            fh.write(data.inlier_mask.astype(np.uint8).tobytes())


def read_binary(path) -> Dataset:
    path = Path(path)
    raw = path.read_bytes()
    head_len = len(MAGIC) + struct.calcsize("<HIIB")
    if len(raw) < head_len or raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a DPCP container")
    version, D, L, flag = struct.unpack_from("<HIIB", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    need = head_len + 8 * D * L + (L if flag else 0)
    if len(raw) != need:
        raise ValueError(f"{path}: expected {need} bytes, found {len(raw)}")
    cols = np.frombuffer(raw, dtype="<f8", count=D * L, offset=head_len)
    columns = cols.reshape((D, L), order="F")
    mask = None
    if flag:
        mask = np.frombuffer(raw, dtype=np.uint8, count=L, offset=head_len + 8 * D * L).astype(bool)
    return Dataset(columns, mask)


def write_dataset(data: Dataset, path) -> None:
    """Dispatch on extension: ``.csv`` for text, anything else binary."""
    if str(path).endswith(".csv"):
        write_csv(data, path)
    else:
        write_binary(data, path)


def read_dataset(path) -> Dataset:
    if str(path).endswith(".csv"):
        return read_csv(path)
    return read_binary(path)
