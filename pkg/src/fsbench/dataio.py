"""Dataset loading, validation, standardization and synthesis.

A :class:`Dataset` is an immutable ``n x d`` dense real matrix with an
optional integer label vector.  CSV is the only ingestion format; labels
may be integers or categorical strings and are always remapped to the
contiguous set ``{0..c-1}``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
from pathlib import Path

import numpy as np

__all__ = [
    "CsvFormatError",
    "Dataset",
    "StandardizationParams",
    "load_csv",
    "write_csv",
    "standardize",
    "synth_blobs",
]


class CsvFormatError(ValueError):
    """CSV content that cannot be turned into a valid dataset.

    ``row`` and ``column`` are 1-based file coordinates of the offending
    cell when known.
    """

    def __init__(self, message: str, *, row: int | None = None, column: int | None = None):
        self.row = row
        self.column = column
        where = ""
        if row is not None and column is not None:
            where = f" (row {row}, column {column})"
        elif row is not None:
            where = f" (row {row})"
        super().__init__(message + where)


@dataclasses.dataclass(frozen=True)
class Dataset:
    """Immutable numeric dataset with optional class labels.

    ``X`` is an ``n x d`` float64 matrix with only finite entries; ``y``,
    when present, holds ``n`` labels from the contiguous set ``{0..c-1}``
    (labels are remapped on construction).  Arrays are write-locked so a
    dataset can be shared freely across workers.
    """

    name: str
    X: np.ndarray
    y: np.ndarray | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, copy=True)
        if X.ndim != 2:
            raise ValueError(f"dataset {self.name!r}: X must be 2-dimensional, got ndim={X.ndim}")
        n, d = X.shape
        if n < 2:
            raise ValueError(f"dataset {self.name!r}: needs at least 2 instances, got {n}")
        if d < 1:
            raise ValueError(f"dataset {self.name!r}: needs at least 1 feature")
        if not np.all(np.isfinite(X)):
            i, j = np.argwhere(~np.isfinite(X))[0]
            raise ValueError(
                f"dataset {self.name!r}: non-finite value at instance {i}, feature {j}"
            )
        X.setflags(write=False)
        object.__setattr__(self, "X", X)

        if self.y is not None:
            y = np.asarray(self.y)
            if y.ndim != 1 or y.shape[0] != n:
                raise ValueError(
                    f"dataset {self.name!r}: y must have length {n}, got shape {y.shape}"
                )
            # remap to contiguous {0..c-1}, preserving sorted original order
            _, y = np.unique(y, return_inverse=True)
            y = y.astype(np.int64)
            y.setflags(write=False)
            object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        if self.y is None:
            raise ValueError(f"dataset {self.name!r} has no labels")
        return int(self.y.max()) + 1

    def require_labels(self) -> np.ndarray:
        if self.y is None:
            raise ValueError(f"dataset {self.name!r} has no labels")
        return self.y


@dataclasses.dataclass(frozen=True)
class StandardizationParams:
    """Per-feature shift/scale recorded by :func:`standardize`.

    ``std`` entries are strictly positive: zero-variance features record a
    std of 1 so the stored transform is a pure shift.
    """

    mean: np.ndarray
    std: np.ndarray


def _parse_float(cell: str, row: int, col: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise CsvFormatError(f"cannot parse {cell!r} as a number", row=row, column=col) from None
    if not np.isfinite(value):
        raise CsvFormatError(f"non-finite value {cell!r}", row=row, column=col)
    return value


def _resolve_label_column(
    label_column: int | str | None, header: list[str] | None, width: int
) -> int | None:
    if label_column is None:
        return None
    if isinstance(label_column, str):
        if header is None:
            raise CsvFormatError(
                f"label column {label_column!r} given by name but the file has no header"
            )
        try:
            return header.index(label_column)
        except ValueError:
            raise CsvFormatError(
                f"label column {label_column!r} not found in header {header}"
            ) from None
    idx = int(label_column)
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise CsvFormatError(f"label column index {label_column} out of range for {width} columns")
    return idx


def load_csv(
    path: str | Path,
    label_column: int | str | None = None,
    *,
    has_header: bool = False,
    name: str | None = None,
) -> Dataset:
    """Load a dataset from a CSV file.

    ``label_column`` selects the class column by 0-based index (negative
    counts from the right) or, when ``has_header``, by column name.  When
    absent the dataset is unlabeled.  Labels may be integers or arbitrary
    strings; either way they are remapped onto ``{0..c-1}`` in sorted
    order of the original values.

    Raises :class:`CsvFormatError` naming the offending row/column for
    ragged rows, unparseable cells and non-finite values.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if name is None:
        name = path.stem

    header: list[str] | None = None
    line0 = 1
    if has_header:
        if not rows:
            raise CsvFormatError("empty file")
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        line0 = 2
    rows = [r for r in rows if r and not (len(r) == 1 and r[0].strip() == "")]
    if not rows:
        raise CsvFormatError("no data rows")

    width = len(rows[0])
    if header is not None and len(header) != width:
        raise CsvFormatError(f"header has {len(header)} columns but data rows have {width}")
    label_idx = _resolve_label_column(label_column, header, width)

    raw_labels: list[str] = []
    data: list[list[float]] = []
    for i, row in enumerate(rows):
        line = line0 + i
        if len(row) != width:
            raise CsvFormatError(
                f"ragged row: expected {width} columns, found {len(row)}", row=line
            )
        values = []
        for j, cell in enumerate(row):
            if j == label_idx:
                raw_labels.append(cell.strip())
            else:
                values.append(_parse_float(cell.strip(), line, j + 1))
        data.append(values)

    X = np.asarray(data, dtype=np.float64)
    y: np.ndarray | None = None
    if label_idx is not None:
        try:
            y = np.asarray([int(v) for v in raw_labels], dtype=np.int64)
        except ValueError:
            y = np.asarray(raw_labels)
    return Dataset(name=name, X=X, y=y)


def write_csv(ds: Dataset, path: str | Path, *, header: bool = False) -> None:
    """Write a dataset as CSV, labels (if any) in the last column.

    Feature values are written with shortest round-trip formatting, so a
    load of the written file reproduces ``X`` bit-exactly and ``y``
    exactly.
    """
    buf = io.StringIO()
    if header:
        cols = [f"f{j}" for j in range(ds.d)]
        if ds.y is not None:
            cols.append("label")
        buf.write(",".join(cols) + "\n")
    for i in range(ds.n):
        cells = [repr(float(v)) for v in ds.X[i]]
        if ds.y is not None:
            cells.append(str(int(ds.y[i])))
        buf.write(",".join(cells) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def standardize(ds: Dataset) -> tuple[Dataset, StandardizationParams]:
    """Shift/scale each feature to mean 0 and population std 1.

    Zero-variance features (std below numerical noise) become exactly
    all-zero columns and record std 1.  Applying the operation twice
    changes nothing beyond 1e-12.
    """
    mean = ds.X.mean(axis=0)
    std = ds.X.std(axis=0)
    constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    safe_std = np.where(constant, 1.0, std)
    Z = (ds.X - mean) / safe_std
    Z[:, constant] = 0.0
    out = Dataset(name=ds.name, X=Z, y=ds.y)
    return out, StandardizationParams(mean=mean, std=safe_std)


def synth_blobs(
    n: int,
    d: int,
    c: int,
    informative: int,
    seed: int,
    *,
    separation: float = 6.0,
    name: str | None = None,
) -> Dataset:
    """Generate ``c`` unit-variance Gaussian clusters plus noise features.

    Cluster centers live in the first ``informative`` coordinates, spaced
    ``separation`` apart (center ``j`` sits at level ``1 + j // informative``
    along axis ``j % informative``); the remaining ``d - informative``
    features are pure standard normal noise.  Labels are assigned round
    robin, so class sizes differ by at most one.  Bit-deterministic under
    ``seed``.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if c < 1:
        raise ValueError(f"c must be >= 1, got {c}")
    if c > n:
        raise ValueError(f"cannot place {c} clusters in {n} instances")
    if not 1 <= informative <= d:
        raise ValueError(f"informative must be in [1, {d}], got {informative}")

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = np.arange(n, dtype=np.int64) % c
    centers = np.zeros((c, informative))
    for j in range(c):
        centers[j, j % informative] = separation * (1 + j // informative)
    X[:, :informative] += centers[y]
    if name is None:
        name = f"blobs_n{n}_d{d}_c{c}_i{informative}_s{seed}"
    return Dataset(name=name, X=X, y=y)
