"""Tabular data with first-class missing values.

A :class:`Dataset` is an ordered, immutable collection of :class:`Column`
objects, each carrying an explicit boolean missing mask. Masked cells hold a
placeholder payload (``nan`` for numeric columns, ``-1`` for categorical
codes) that no consumer is allowed to interpret.

Every row selection keeps the original row order and carries the source
``row_ids`` along, so subsets can always be traced back to the rows of the
file they were loaded from.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateSplit,
    EmptyGroup,
    InvalidGroupSpec,
    LabelDropForbidden,
    ParseError,
    RaggedRows,
    SampleTooLarge,
    SchemaMismatch,
    UnknownColumn,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
DEFAULT_MISSING_TOKENS = frozenset({"?", "", "NA"})


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Column:
    """One named column of cells plus its missing mask.

    Numeric columns store ``float64`` values; categorical columns store
    ``int64`` codes into ``categories`` (sorted lexicographically when built
    from raw strings).
    """

    name: str
    kind: str
    values: np.ndarray
    missing: np.ndarray
    categories: tuple = ()

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ValueError(f"unknown column kind {self.kind!r}")
        values = np.asarray(self.values, dtype=float if self.kind == NUMERIC else np.int64)
        missing = np.asarray(self.missing, dtype=bool)
        if values.shape != missing.shape or values.ndim != 1:
            raise ValueError(f"column {self.name!r}: values and missing mask differ in length")
        if self.kind == NUMERIC:
            values = np.where(missing, np.nan, values)
        else:
            values = np.where(missing, -1, values)
            if np.any(values[~missing] >= len(self.categories)) or np.any(values[~missing] < 0):
                raise ValueError(f"column {self.name!r}: category code out of range")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "missing", _frozen(missing))
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))

    @classmethod
    def numeric(cls, name, values, missing=None):
        values = np.asarray(values, dtype=float)
        if missing is None:
            missing = np.isnan(values)
        return cls(name, NUMERIC, values, missing)

    @classmethod
    def categorical(cls, name, cells, categories=None):
        """Build from string cells; ``None`` marks a missing cell."""
        cells = list(cells)
        missing = np.array([c is None for c in cells], dtype=bool)
        observed = sorted({str(c) for c in cells if c is not None})
        if categories is None:
            categories = observed
        else:
            categories = [str(c) for c in categories]
            unknown = set(observed) - set(categories)
            if unknown:
                raise ValueError(f"column {name!r}: cells outside the category set: {sorted(unknown)}")
        index = {c: i for i, c in enumerate(categories)}
        codes = np.array([-1 if c is None else index[str(c)] for c in cells], dtype=np.int64)
        return cls(name, CATEGORICAL, codes, missing, tuple(categories))

    def __len__(self):
        return len(self.values)

    @property
    def n_missing(self):
        return int(self.missing.sum())

    @property
    def is_numeric(self):
        return self.kind == NUMERIC

    def take(self, indices):
        return Column(self.name, self.kind, self.values[indices], self.missing[indices], self.categories)

    def with_cells(self, values, missing):
        return Column(self.name, self.kind, values, missing, self.categories)

    def cells(self):
        """Python-level cells: floats or category strings, ``None`` when masked."""
        if self.is_numeric:
            return [None if m else float(v) for v, m in zip(self.values, self.missing)]
        cats = self.categories
        return [None if m else cats[v] for v, m in zip(self.values, self.missing)]

    def strings(self):
        """Category strings as a numpy array (masked cells become ``None``)."""
        if self.is_numeric:
            raise TypeError(f"column {self.name!r} is numeric")
        lookup = np.array(self.categories + (None,), dtype=object)
        return lookup[self.values]

    def equals(self, other):
        return (
            self.name == other.name
            and self.kind == other.kind
            and self.categories == other.categories
            and np.array_equal(self.missing, other.missing)
            and np.array_equal(self.values[~self.missing], other.values[~other.missing])
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    columns: tuple
    label: str | None = None
    row_ids: np.ndarray | None = None
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        columns = tuple(self.columns)
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise SchemaMismatch(f"duplicate column names: {names}")
        lengths = {len(c) for c in columns}
        if len(lengths) > 1:
            raise RaggedRows(f"columns have different lengths: {sorted(lengths)}")
        n = lengths.pop() if lengths else 0
        if self.label is not None:
            if self.label not in names:
                raise UnknownColumn(f"label column {self.label!r} not found")
            lab = columns[names.index(self.label)]
            if lab.kind != CATEGORICAL:
                raise SchemaMismatch(f"label column {self.label!r} must be categorical")
            if lab.missing.any():
                raise SchemaMismatch(f"label column {self.label!r} contains missing values")
        row_ids = np.arange(n) if self.row_ids is None else np.asarray(self.row_ids, dtype=np.int64)
        if len(row_ids) != n:
            raise ValueError("row_ids length differs from n_rows")
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "row_ids", _frozen(row_ids))
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(names)})

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence], kinds: Mapping[str, str] | None = None,
                  label: str | None = None):
        """Convenience constructor for small in-memory tables.

        ``None`` (or ``nan`` in a numeric column) marks a missing cell. Kinds
        not given explicitly are inferred: all-number columns are numeric,
        anything else (and the label) is categorical.
        """
        kinds = dict(kinds or {})
        columns = []
        for name, cells in data.items():
            cells = list(cells)
            kind = kinds.get(name)
            if kind is None:
                observed = [c for c in cells if c is not None]
                numeric = name != label and all(
                    isinstance(c, (int, float, np.integer, np.floating)) and not isinstance(c, bool)
                    for c in observed
                )
                kind = NUMERIC if numeric else CATEGORICAL
            if kind == NUMERIC:
                columns.append(Column.numeric(name, [np.nan if c is None else c for c in cells]))
            else:
                columns.append(Column.categorical(name, [None if c is None else str(c) for c in cells]))
        return cls(tuple(columns), label=label)

    @property
    def n_rows(self):
        return len(self.row_ids)

    def __len__(self):
        return self.n_rows

    @property
    def names(self):
        return tuple(c.name for c in self.columns)

    @property
    def feature_names(self):
        return tuple(c.name for c in self.columns if c.name != self.label)

    @property
    def features(self):
        return [c for c in self.columns if c.name != self.label]

    def __contains__(self, name):
        return name in self._index

    def column(self, name) -> Column:
        try:
            return self.columns[self._index[name]]
        except KeyError:
            raise UnknownColumn(f"no column named {name!r}") from None

    def __getitem__(self, name):
        return self.column(name)

    @property
    def label_column(self) -> Column:
        if self.label is None:
            raise SchemaMismatch("dataset has no label column")
        return self.column(self.label)

    @property
    def classes(self):
        return self.label_column.categories

    @property
    def labels(self):
        """Label values as a numpy array of strings."""
        return self.label_column.strings()

    def missing_matrix(self):
        """Boolean (n_rows, n_features) mask over the non-label columns."""
        feats = self.features
        if not feats:
            return np.zeros((self.n_rows, 0), dtype=bool)
        return np.column_stack([c.missing for c in feats])

    def row_has_missing(self):
        return self.missing_matrix().any(axis=1)

    @property
    def n_missing_cells(self):
        return int(self.missing_matrix().sum())

    def take(self, indices) -> "Dataset":
        indices = np.asarray(indices)
        if indices.dtype == bool:
            indices = np.flatnonzero(indices)
        return Dataset(tuple(c.take(indices) for c in self.columns), self.label, self.row_ids[indices])

    def select_columns(self, names: Iterable[str]) -> "Dataset":
        names = list(names)
        keep = [self.column(n) for n in names]
        label = self.label if self.label in names else None
        return Dataset(tuple(keep), label, self.row_ids)

    def replace_columns(self, replacements: Mapping[str, Column]) -> "Dataset":
        cols = tuple(replacements.get(c.name, c) for c in self.columns)
        return Dataset(cols, self.label, self.row_ids)

    def equals(self, other) -> bool:
        return (
            self.names == other.names
            and self.label == other.label
            and np.array_equal(self.row_ids, other.row_ids)
            and all(a.equals(b) for a, b in zip(self.columns, other.columns))
        )

    def to_records(self):
        """Rows as dicts of Python cells; used for display and tests."""
        cols = [(c.name, c.cells()) for c in self.columns]
        return [{name: cells[i] for name, cells in cols} for i in range(self.n_rows)]


@dataclass(frozen=True)
class GroupSpec:
    """Fairness frame: protected attribute, privileged values, favourable class."""

    protected_attribute: str
    privileged_values: frozenset
    favourable_class: str

    def __post_init__(self):
        vals = self.privileged_values
        if isinstance(vals, str):
            vals = [vals]
        vals = frozenset(str(v) for v in vals)
        if not vals:
            raise InvalidGroupSpec("privileged_values must be nonempty")
        object.__setattr__(self, "privileged_values", vals)
        object.__setattr__(self, "favourable_class", str(self.favourable_class))

    def _protected(self, d: Dataset) -> Column:
        col = d.column(self.protected_attribute)
        if col.kind != CATEGORICAL:
            raise InvalidGroupSpec(f"protected attribute {col.name!r} must be categorical")
        if col.missing.any():
            raise InvalidGroupSpec(f"protected attribute {col.name!r} has missing values")
        unknown = self.privileged_values - set(col.categories)
        if unknown:
            raise InvalidGroupSpec(
                f"privileged values {sorted(unknown)} not among categories of {col.name!r}")
        return col

    def privileged_mask(self, d: Dataset) -> np.ndarray:
        col = self._protected(d)
        codes = [i for i, c in enumerate(col.categories) if c in self.privileged_values]
        return np.isin(col.values, codes)

    def check_groups(self, d: Dataset) -> np.ndarray:
        """Privileged mask, raising :class:`EmptyGroup` if either side is empty."""
        mask = self.privileged_mask(d)
        if mask.all():
            raise EmptyGroup(f"unprivileged group ({self.protected_attribute}) is empty")
        if not mask.any():
            raise EmptyGroup(f"privileged group ({self.protected_attribute}) is empty")
        return mask

    def swap_groups(self, d: Dataset) -> "GroupSpec":
        cats = set(self._protected(d).categories)
        return GroupSpec(self.protected_attribute, frozenset(cats - self.privileged_values),
                         self.favourable_class)

    def with_favourable(self, cls) -> "GroupSpec":
        return GroupSpec(self.protected_attribute, self.privileged_values, cls)

    def to_dict(self):
        return {
            "protected_attribute": self.protected_attribute,
            "privileged_values": sorted(self.privileged_values),
            "favourable_class": self.favourable_class,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["protected_attribute"], d["privileged_values"], d["favourable_class"])
        except KeyError as exc:
            raise InvalidGroupSpec(f"group config lacks {exc.args[0]!r}") from None

    def describe(self):
        return f"{self.protected_attribute}={'|'.join(sorted(self.privileged_values))}"


# ---------------------------------------------------------------------------
# ingestion


def _normalise_schema(schema):
    kinds, label = {}, None
    for name, spec in schema.items():
        if isinstance(spec, str):
            kind, is_label = spec, False
        else:
            kind, is_label = spec["kind"], bool(spec.get("is_label", False))
        if kind not in (NUMERIC, CATEGORICAL):
            raise SchemaMismatch(f"column {name!r}: unknown kind {kind!r}")
        kinds[name] = kind
        if is_label:
            if label is not None:
                raise SchemaMismatch(f"two label columns declared: {label!r}, {name!r}")
            label = name
    return kinds, label


def load_csv(source, schema: Mapping, missing_tokens=DEFAULT_MISSING_TOKENS,
             label: str | None = None) -> Dataset:
    """Parse a UTF-8 CSV byte stream into a :class:`Dataset`.

    ``schema`` maps every column name to either a kind string or a mapping
    ``{"kind": ..., "is_label": ...}``; the label may alternatively be named
    via ``label``. Cells whose raw text is in ``missing_tokens`` are masked.
    """
    kinds, schema_label = _normalise_schema(schema)
    label = label or schema_label
    tokens = frozenset(missing_tokens)
    text = io.TextIOWrapper(source, encoding="utf-8", newline="") if not isinstance(
        source, io.TextIOBase) else source
    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaMismatch("CSV has no header row") from None
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise SchemaMismatch(f"duplicate header names: {header}")
    missing_cols = [k for k in kinds if k not in header]
    extra_cols = [h for h in header if h not in kinds]
    if missing_cols or extra_cols:
        raise SchemaMismatch(f"schema/header mismatch: missing {missing_cols}, extra {extra_cols}")
    if label is not None and label not in kinds:
        raise SchemaMismatch(f"label column {label!r} not in schema")

    width = len(header)
    raw_cols = [[] for _ in header]
    for lineno, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != width:
            raise RaggedRows(f"data row {lineno} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            raw_cols[j].append(cell)

    columns = []
    for name, cells in zip(header, raw_cols):
        arr = np.array(cells, dtype=object)
        missing = np.isin(arr, list(tokens)) if len(arr) else np.zeros(0, dtype=bool)
        if kinds[name] == NUMERIC:
            values = np.full(len(arr), np.nan)
            observed = np.flatnonzero(~missing)
            try:
                parsed = np.array(arr[observed], dtype=float)
                bad = ~np.isfinite(parsed)
            except ValueError:
                parsed, bad = None, None
            if parsed is None or bad.any():
                for i in observed:
                    try:
                        v = float(arr[i])
                    except ValueError:
                        raise ParseError(int(i) + 1, name, arr[i]) from None
                    if not math.isfinite(v):
                        raise ParseError(int(i) + 1, name, arr[i])
            values[observed] = parsed
            columns.append(Column(name, NUMERIC, values, missing))
        else:
            obs = arr[~missing].astype(str)
            cats, inverse = np.unique(obs, return_inverse=True)
            codes = np.full(len(arr), -1, dtype=np.int64)
            codes[~missing] = inverse
            columns.append(Column(name, CATEGORICAL, codes, missing, tuple(cats.tolist())))
    return Dataset(tuple(columns), label=label)


def read_schema(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        schema = json.load(fh)
    if not isinstance(schema, dict):
        raise SchemaMismatch(f"{path}: schema must be a JSON object")
    return schema


def read_csv(path, schema=None, missing_tokens=DEFAULT_MISSING_TOKENS, label=None) -> Dataset:
    """Load a CSV file (optionally gzip-compressed) with its JSON schema sidecar.

    Without an explicit ``schema`` the sidecar is looked up next to the data
    file as ``<stem>.schema.json``.
    """
    path = Path(path)
    if schema is None:
        stem = path.name.removesuffix(".gz").removesuffix(".csv")
        schema = path.with_name(f"{stem}.schema.json")
    if isinstance(schema, (str, Path)):
        schema = read_schema(schema)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return load_csv(fh, schema, missing_tokens=missing_tokens, label=label)


# ---------------------------------------------------------------------------
# row and column selections


def split_by_missingness(d: Dataset):
    """Partition rows into (with at least one masked feature cell, fully observed)."""
    has = d.row_has_missing()
    return d.take(np.flatnonzero(has)), d.take(np.flatnonzero(~has))


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def stratified_split(d: Dataset, test_fraction: float = 0.3, seed=0):
    """Label-stratified train/test split that ignores missingness.

    Each class contributes ``test_fraction * n_class`` rows (halves rounded
    up) to the test side. Both parts keep the original row order.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    codes = d.label_column.values
    present = np.unique(codes)
    if len(present) < 2:
        raise DegenerateSplit("stratified split needs at least two classes")
    rng = _rng(seed)
    test_idx = []
    for c in present:
        members = np.flatnonzero(codes == c)
        n_test = int(math.floor(test_fraction * len(members) + 0.5))
        if n_test >= len(members):
            raise DegenerateSplit(
                f"class {d.classes[c]!r} ({len(members)} rows) would be absent from train")
        test_idx.append(rng.permutation(members)[:n_test])
    test_mask = np.zeros(d.n_rows, dtype=bool)
    test_mask[np.concatenate(test_idx)] = True
    return d.take(np.flatnonzero(~test_mask)), d.take(np.flatnonzero(test_mask))


def sample_rows(d: Dataset, n: int, seed=0) -> Dataset:
    """Uniform sample of ``n`` rows without replacement, in original order."""
    if n > d.n_rows or n < 0:
        raise SampleTooLarge(f"cannot sample {n} of {d.n_rows} rows")
    idx = _rng(seed).choice(d.n_rows, size=n, replace=False)
    return d.take(np.sort(idx))


def drop_columns(d: Dataset, names) -> Dataset:
    names = set(names)
    unknown = names - set(d.names)
    if unknown:
        raise UnknownColumn(f"unknown columns: {sorted(unknown)}")
    if d.label in names:
        raise LabelDropForbidden(f"cannot drop the label column {d.label!r}")
    return Dataset(tuple(c for c in d.columns if c.name not in names), d.label, d.row_ids)
