"""Missing-data treatments: listwise deletion (LD), column deletion (CD),
labelled category (LC) and mean/mode imputation (IM)."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import CATEGORICAL, NUMERIC, Column, Dataset, split_by_missingness
from .errors import AllMissingColumn, SchemaMismatch

LD, CD, LC, IM = "LD", "CD", "LC", "IM"
MISSING_CATEGORY = "(missing)"
FLAG_SUFFIX = "_missing"


@dataclass(frozen=True)
class HandlingReport:
    strategy: str
    rows_removed: int = 0
    columns_removed: tuple = ()
    cells_filled: int = 0

    def to_dict(self):
        return {
            "strategy": self.strategy,
            "rows_removed": self.rows_removed,
            "columns_removed": list(self.columns_removed),
            "cells_filled": self.cells_filled,
        }


def listwise_delete(d: Dataset):
    with_miss, without_miss = split_by_missingness(d)
    if without_miss.n_rows == 0 and d.n_rows > 0:
        warnings.warn("listwise deletion removed every row", stacklevel=2)
    return without_miss, HandlingReport(LD, rows_removed=with_miss.n_rows)


def column_delete(d: Dataset):
    """Remove every feature column with at least one masked cell."""
    drop = tuple(c.name for c in d.features if c.n_missing)
    kept = tuple(c for c in d.columns if c.name not in drop)
    return Dataset(kept, d.label, d.row_ids), HandlingReport(CD, columns_removed=drop)


def _fresh_name(base, taken):
    name = base
    while name in taken:
        name += "_"
    return name


def _equal_frequency_bins(col: Column, k: int):
    obs = col.values[~col.missing]
    edges = np.unique(np.quantile(obs, np.linspace(0, 1, k + 1)))
    if len(edges) < 2:
        warnings.warn(f"column {col.name!r} is constant; using a single bin", stacklevel=3)
        labels = [f"[{edges[0]:g}, {edges[0]:g}]"]
        codes = np.zeros(len(col), dtype=np.int64)
    else:
        inner = edges[1:-1]
        codes = np.searchsorted(inner, col.values, side="left")
        labels = [f"[{edges[0]:g}, {edges[1]:g}]"] + [
            f"({edges[i]:g}, {edges[i + 1]:g}]" for i in range(1, len(edges) - 1)]
    miss_label = _fresh_name(MISSING_CATEGORY, set(labels))
    codes = np.where(col.missing, len(labels), codes)
    return Column(col.name, CATEGORICAL, codes, np.zeros(len(col), bool), tuple(labels) + (miss_label,))


def labelled_category(d: Dataset, policy="flag", k: int = 4):
    """Make missingness explicit.

    ``policy="flag"`` replaces each column that has masked cells by a Boolean
    ``<name>_missing`` column. ``policy="bin"`` turns such numeric columns
    into ``k`` equal-frequency bins plus a missing category, and gives such
    categorical columns one extra missing category.
    """
    affected = [c for c in d.features if c.n_missing]
    affected_names = {c.name for c in affected}
    if policy == "flag":
        taken = set(d.names)
        cols = []
        for c in d.columns:
            if c.name in affected_names:
                name = _fresh_name(c.name + FLAG_SUFFIX, taken)
                taken.add(name)
                cols.append(Column(name, CATEGORICAL, c.missing.astype(np.int64),
                                   np.zeros(len(c), bool), ("false", "true")))
            else:
                cols.append(c)
        out = Dataset(tuple(cols), d.label, d.row_ids)
        return out, HandlingReport(LC, columns_removed=tuple(c.name for c in affected),
                                   cells_filled=sum(c.n_missing for c in affected))
    if policy != "bin":
        raise ValueError(f"unknown labelled-category policy {policy!r}")
    if k < 2:
        raise ValueError("bin policy needs k >= 2")
    replacements = {}
    for c in affected:
        if c.is_numeric:
            replacements[c.name] = _equal_frequency_bins(c, k)
        else:
            miss_label = _fresh_name(MISSING_CATEGORY, set(c.categories))
            cats = c.categories + (miss_label,)
            codes = np.where(c.missing, len(c.categories), c.values)
            replacements[c.name] = Column(c.name, CATEGORICAL, codes, np.zeros(len(c), bool), cats)
    return d.replace_columns(replacements), HandlingReport(
        LC, cells_filled=sum(c.n_missing for c in affected))


@dataclass(frozen=True)
class ImputationModel:
    """Per-column fill values learned from a training set.

    ``fills`` maps column name to ``(kind, value)``; numeric values are
    floats, categorical values are category strings.
    """

    fills: dict
    fitted_on: int
    numeric_strategy: str = "mean"
    columns: tuple = field(default=())

    def to_json(self) -> str:
        return json.dumps({
            "fills": {k: list(v) for k, v in self.fills.items()},
            "fitted_on": self.fitted_on,
            "numeric_strategy": self.numeric_strategy,
            "columns": list(self.columns),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls({k: tuple(v) for k, v in obj["fills"].items()}, obj["fitted_on"],
                   obj["numeric_strategy"], tuple(obj["columns"]))


def fit_imputer(train: Dataset, numeric_strategy="mean") -> ImputationModel:
    """Mean (or median) for numeric columns, mode for categorical ones.

    Mode ties go to the lexicographically smallest category.
    """
    fills = {}
    for c in train.features:
        obs = ~c.missing
        if not obs.any():
            raise AllMissingColumn(f"column {c.name!r} has no observed value to learn a fill from")
        if c.is_numeric:
            vals = c.values[obs]
            fill = float(np.median(vals) if numeric_strategy == "median" else vals.mean())
            fills[c.name] = (NUMERIC, fill)
        else:
            counts = np.bincount(c.values[obs], minlength=len(c.categories))
            top = counts.max()
            fills[c.name] = (CATEGORICAL, min(c.categories[i] for i in np.flatnonzero(counts == top)))
    return ImputationModel(fills, train.n_rows, numeric_strategy, tuple(fills))


def apply_imputer(m: ImputationModel, d: Dataset):
    replacements, filled = {}, 0
    for c in d.features:
        if c.name not in m.fills:
            raise SchemaMismatch(f"imputer has no fill value for column {c.name!r}")
        kind, value = m.fills[c.name]
        if kind != c.kind:
            raise SchemaMismatch(f"column {c.name!r} is {c.kind}, imputer expects {kind}")
        if not c.n_missing:
            continue
        filled += c.n_missing
        if kind == NUMERIC:
            replacements[c.name] = c.with_cells(np.where(c.missing, value, c.values),
                                                np.zeros(len(c), bool))
        else:
            cats = c.categories
            if value not in cats:
                cats = cats + (value,)
            code = cats.index(value)
            replacements[c.name] = Column(c.name, CATEGORICAL, np.where(c.missing, code, c.values),
                                          np.zeros(len(c), bool), cats)
    return d.replace_columns(replacements), HandlingReport(IM, cells_filled=filled)


def impute(d: Dataset, numeric_strategy="mean"):
    """Fit on ``d`` and fill ``d`` in one step."""
    return apply_imputer(fit_imputer(d, numeric_strategy), d)
