"""Datasets, CSV ingestion and export, reports, and run configuration.

CSV layout: one header line, one row per sample, comma separated, no
quoting, ``\n`` line endings. Features are float64; the label column
may hold arbitrary strings, which are mapped to dense integer codes in
first-appearance order. Non-finite feature values are rejected at
ingestion with the offending row and column named in the error.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "LabeledDataset",
    "RunConfig",
    "load_csv",
    "save_csv",
    "save_report",
    "load_report",
    "parse_config",
    "REPORT_COLUMNS",
]

REPORT_COLUMNS = (
    "estimator", "n", "d", "mu", "pi", "seed",
    "h_y", "h_y_given_x", "mi", "mi_normalized", "wall_time_ms",
)


@dataclass(frozen=True)
class LabeledDataset:
    """A feature matrix with optional dense-coded class labels.

    ``labels`` is either None (unlabeled rows, usable only for
    evaluation) or an int64 vector of codes in ``0..K-1`` where
    ``K = len(label_names)``. ``label_names[c]`` is the display string
    for code ``c``, in first-appearance order when read from a file.
    """

    features: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray | None = None
    label_names: tuple[str, ...] = ()

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        if f.ndim != 2:
            raise DataError("feature matrix must be 2-dimensional")
        if f.shape[0] == 0:
            raise DataError("dataset has no rows")
        if not np.isfinite(f).all():
            raise DataError("feature matrix contains non-finite values")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "label_names", tuple(self.label_names))
        if len(self.feature_names) != f.shape[1]:
            raise DataError(
                f"{len(self.feature_names)} feature names for {f.shape[1]} columns")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DataError("duplicate feature names")
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (f.shape[0],):
                raise DataError("labels must have one entry per row")
            k = len(self.label_names)
            if k < 1:
                raise DataError("labeled dataset needs label names")
            if lab.min() < 0 or lab.max() >= k:
                raise DataError(f"label codes must be dense in 0..{k - 1}")
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def select_features(self, names) -> "LabeledDataset":
        """Restriction to the named columns, keeping labels."""
        names = tuple(names)
        pos = []
        for name in names:
            if name not in self.feature_names:
                raise DataError(f"unknown feature name {name!r}")
            pos.append(self.feature_names.index(name))
        if not pos:
            raise DataError("feature selection is empty")
        return LabeledDataset(self.features[:, pos], names, self.labels,
                              self.label_names)


def load_csv(path: str, label_column: str | None = None) -> LabeledDataset:
    """Read a dataset; ``label_column=None`` loads all columns as features."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            header = [h.strip() for h in header]
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no data rows")

    if label_column is not None and label_column not in header:
        raise DataError(f"{path}: no column named {label_column!r}")
    label_pos = header.index(label_column) if label_column is not None else -1
    feature_names = tuple(h for i, h in enumerate(header) if i != label_pos)

    n, d = len(rows), len(feature_names)
    features = np.empty((n, d), dtype=np.float64)
    codes = np.empty(n, dtype=np.int64) if label_column is not None else None
    name_to_code: dict[str, int] = {}
    label_names: list[str] = []

    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {i + 1} has {len(row)} cells, expected {len(header)}")
        j = 0
        for pos, cell in enumerate(row):
            if pos == label_pos:
                name = cell.strip()
                if name == "":
                    raise DataError(f"{path}: row {i + 1}: empty label")
                code = name_to_code.get(name)
                if code is None:
                    code = len(label_names)
                    name_to_code[name] = code
                    label_names.append(name)
                codes[i] = code
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: row {i + 1}, column {header[pos]!r}: "
                    f"non-numeric value {cell!r}") from None
            if not np.isfinite(v):
                raise DataError(
                    f"{path}: row {i + 1}, column {header[pos]!r}: "
                    f"non-finite value {cell!r}")
            features[i, j] = v
            j += 1

    return LabeledDataset(features, feature_names, codes, tuple(label_names))


def save_csv(ds: LabeledDataset, path: str, label_column: str = "label") -> None:
    """Write a dataset in the canonical layout; floats use shortest repr."""
    with open(path, "w", newline="") as fh:
        cols = list(ds.feature_names)
        if ds.labels is not None:
            cols.append(label_column)
        fh.write(",".join(cols) + "\n")
        for i in range(ds.n):
            cells = [repr(float(v)) for v in ds.features[i]]
            if ds.labels is not None:
                cells.append(ds.label_names[ds.labels[i]])
            fh.write(",".join(cells) + "\n")


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def save_report(rows, path: str) -> None:
    """Write estimate rows under the fixed report schema, 17 digits."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        for row in rows:
            extra = set(row) - set(REPORT_COLUMNS)
            if extra:
                raise ConfigError(f"unknown report columns: {sorted(extra)}")
            fh.write(",".join(_fmt_cell(row.get(c)) for c in REPORT_COLUMNS) + "\n")


def load_report(path: str) -> list[dict]:
    """Read back a report CSV; numeric cells become int or float."""
    out = []
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
                raise DataError(f"{path}: not a report file")
            for raw in reader:
                row = {}
                for key, cell in raw.items():
                    if cell == "" or cell is None:
                        row[key] = None
                    elif key in ("estimator",):
                        row[key] = cell
                    elif key in ("n", "d", "seed"):
                        row[key] = int(cell)
                    else:
                        row[key] = float(cell)
                out.append(row)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return out


def parse_config(text: str) -> dict[str, str]:
    """Parse the flat ``key = value`` config grammar.

    Blank lines and ``#`` comments are allowed; keys may not repeat.
    Which keys are meaningful is decided by the consuming command, where
    unknown keys are rejected.
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"config line {lineno}: empty key")
        if key in values:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = value
    return values


@dataclass
class RunConfig:
    """Resolved parameters of one CLI run, echoed as flat key = value."""

    command: str
    values: dict[str, object] = field(default_factory=dict)

    def echo_lines(self) -> list[str]:
        lines = [f"command = {self.command}"]
        for key in sorted(self.values):
            v = self.values[key]
            if v is None:
                continue
            if isinstance(v, bool):
                v = str(v).lower()
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{key} = {v}")
        return lines
