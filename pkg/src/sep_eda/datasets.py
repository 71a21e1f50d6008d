"""Dataset loading, normalization and synthesis.

The only module that reads input files.  Every loader returns a validated
``DataMatrix`` with finite values and, when labels are present, contiguous
0-based integer labels.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from sep_eda.errors import DataError


@dataclass
class DataMatrix:
    """Dense n-by-d feature table with optional ground-truth labels."""

    values: np.ndarray
    labels: np.ndarray | None = None
    name: str = "unnamed"

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def num_classes(self) -> int:
        if self.labels is None:
            return 0
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def validate(self) -> "DataMatrix":
        """Check the structural invariants; raise DataError on violation."""
        if self.values.ndim != 2:
            raise DataError(f"values must be 2-D, got shape {self.values.shape}")
        if self.n < 1 or self.d < 1:
            raise DataError(f"need n >= 1 and d >= 1, got n={self.n}, d={self.d}")
        if not np.isfinite(self.values).all():
            raise DataError("values contain NaN or Inf")
        if self.labels is not None:
            if self.labels.shape != (self.n,):
                raise DataError(
                    f"labels shape {self.labels.shape} does not match n={self.n}"
                )
            if self.labels.size and self.labels.min() < 0:
                raise DataError("labels must be non-negative")
        return self


def _remap_labels(raw: np.ndarray) -> np.ndarray:
    """Map arbitrary numeric labels to contiguous 0-based integers.

    Classes are ordered by sorted raw value, so {3, 7} becomes {0, 1}.
    """
    _, inverse = np.unique(raw, return_inverse=True)
    return inverse.astype(np.int64)


def load_csv(
    path: str | Path,
    has_label_column: bool = False,
    skip_header: bool = False,
    name: str | None = None,
) -> DataMatrix:
    """Load a comma-separated numeric table.

    The optional label column is the last one.  Errors report 1-based
    row/column positions of the offending cell.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    lines = text.splitlines()
    if skip_header and lines:
        lines = lines[1:]
    rows: list[list[float]] = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise DataError(
                f"{path}: row {lineno} has {len(cells)} columns, expected {width}"
            )
        parsed = []
        for colno, cell in enumerate(cells, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell at row {lineno}, column {colno}: {cell!r}"
                ) from None
        rows.append(parsed)

    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=np.float64)
    labels = None
    if has_label_column:
        if arr.shape[1] < 2:
            raise DataError(f"{path}: need at least 2 columns to split off labels")
        labels = _remap_labels(arr[:, -1])
        arr = arr[:, :-1]
    return DataMatrix(arr, labels, name or path.stem).validate()


def load_libsvm(path: str | Path, name: str | None = None) -> DataMatrix:
    """Load sparse ``label idx:val`` lines into a dense matrix.

    Indices are 1-based and must be strictly increasing within a line;
    absent indices are filled with zeros.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    raw_labels: list[float] = []
    row_entries: list[list[tuple[int, float]]] = []
    max_index = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            label = float(parts[0])
        except ValueError:
            raise DataError(f"{path}: line {lineno}: bad label {parts[0]!r}") from None
        entries = []
        prev = 0
        for token in parts[1:]:
            if ":" not in token:
                raise DataError(f"{path}: line {lineno}: malformed pair {token!r}")
            idx_s, val_s = token.split(":", 1)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise DataError(
                    f"{path}: line {lineno}: malformed pair {token!r}"
                ) from None
            if idx < 1:
                raise DataError(
                    f"{path}: line {lineno}: index {idx} must be >= 1"
                )
            if idx <= prev:
                raise DataError(
                    f"{path}: line {lineno}: indices must increase, got {idx} after {prev}"
                )
            prev = idx
            entries.append((idx, val))
        max_index = max(max_index, prev)
        raw_labels.append(label)
        row_entries.append(entries)

    if not row_entries:
        raise DataError(f"{path}: no data rows")
    if max_index == 0:
        raise DataError(f"{path}: no feature values found")
    arr = np.zeros((len(row_entries), max_index), dtype=np.float64)
    for i, entries in enumerate(row_entries):
        for idx, val in entries:
            arr[i, idx - 1] = val
    labels = _remap_labels(np.asarray(raw_labels))
    return DataMatrix(arr, labels, name or path.stem).validate()


_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def _open_maybe_gzip(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(
    images_path: str | Path,
    labels_path: str | Path,
    name: str | None = None,
) -> DataMatrix:
    """Load big-endian IDX image/label file pairs (pixels scaled to [0, 1])."""
    images_path = Path(images_path)
    labels_path = Path(labels_path)
    try:
        with _open_maybe_gzip(images_path) as fh:
            header = fh.read(16)
            if len(header) < 16:
                raise DataError(f"{images_path}: truncated header")
            magic, count, rows, cols = struct.unpack(">IIII", header)
            if magic != _IDX_IMAGES_MAGIC:
                raise DataError(
                    f"{images_path}: bad magic 0x{magic:08x}, expected 0x{_IDX_IMAGES_MAGIC:08x}"
                )
            pixels = np.frombuffer(fh.read(count * rows * cols), dtype=np.uint8)
        with _open_maybe_gzip(labels_path) as fh:
            header = fh.read(8)
            if len(header) < 8:
                raise DataError(f"{labels_path}: truncated header")
            magic, label_count = struct.unpack(">II", header)
            if magic != _IDX_LABELS_MAGIC:
                raise DataError(
                    f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{_IDX_LABELS_MAGIC:08x}"
                )
            raw_labels = np.frombuffer(fh.read(label_count), dtype=np.uint8)
    except OSError as exc:
        raise DataError(f"cannot read IDX files: {exc}") from exc

    if pixels.size != count * rows * cols:
        raise DataError(f"{images_path}: expected {count * rows * cols} pixels, got {pixels.size}")
    if raw_labels.size != label_count:
        raise DataError(f"{labels_path}: expected {label_count} labels, got {raw_labels.size}")
    if label_count != count:
        raise DataError(
            f"image count {count} != label count {label_count}"
        )
    values = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    labels = _remap_labels(raw_labels)
    return DataMatrix(values, labels, name or images_path.stem).validate()


def normalize(data: DataMatrix, mode: str = "minmax") -> DataMatrix:
    """Return a feature-wise rescaled copy; constant features map to 0."""
    if mode == "none":
        return DataMatrix(data.values.copy(), None if data.labels is None else data.labels.copy(), data.name)
    values = data.values
    if mode == "minmax":
        lo = values.min(axis=0)
        hi = values.max(axis=0)
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        out = (values - lo) / safe
        out[:, span == 0] = 0.0
    elif mode == "zscore":
        mean = values.mean(axis=0)
        std = values.std(axis=0)
        safe = np.where(std > 0, std, 1.0)
        out = (values - mean) / safe
        out[:, std == 0] = 0.0
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    labels = None if data.labels is None else data.labels.copy()
    return DataMatrix(out, labels, data.name).validate()


def make_blobs(
    k: int,
    per_cluster: int,
    d: int,
    separation: float,
    spread: float,
    seed: int,
) -> DataMatrix:
    """Generate k isotropic Gaussian clusters with centers >= `separation` apart.

    Deterministic for a fixed seed; labels record the generating cluster.
    """
    if k < 1 or per_cluster < 1:
        raise ValueError("k and per_cluster must be >= 1")
    if separation <= 0 or spread <= 0:
        raise ValueError("separation and spread must be positive")
    rng = np.random.default_rng(seed)
    box = separation * max(2.0, 2.0 * k ** (1.0 / d))
    centers: list[np.ndarray] = []
    while len(centers) < k:
        placed = False
        for _ in range(200):
            cand = rng.uniform(-box, box, size=d)
            if all(np.linalg.norm(cand - c) >= separation for c in centers):
                centers.append(cand)
                placed = True
                break
        if not placed:
            box *= 1.5
    values = np.empty((k * per_cluster, d), dtype=np.float64)
    labels = np.empty(k * per_cluster, dtype=np.int64)
    for i, center in enumerate(centers):
        block = slice(i * per_cluster, (i + 1) * per_cluster)
        values[block] = center + spread * rng.standard_normal((per_cluster, d))
        labels[block] = i
    return DataMatrix(values, labels, f"blobs-k{k}-s{seed}").validate()
