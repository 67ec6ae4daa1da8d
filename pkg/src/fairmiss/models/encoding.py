"""Translate datasets into float matrices using the training schema."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import CATEGORICAL, Dataset
from ..errors import SchemaMismatch

UNSEEN = -1.0  # categorical value absent from the training categories


@dataclass(frozen=True)
class FeatureSchema:
    """Feature names, kinds and category lists as seen at training time."""

    names: tuple
    kinds: tuple
    categories: tuple  # per column; () for numeric

    @classmethod
    def of(cls, d: Dataset):
        feats = d.features
        return cls(tuple(c.name for c in feats), tuple(c.kind for c in feats),
                   tuple(c.categories if c.kind == CATEGORICAL else () for c in feats))

    def to_dict(self):
        return {"names": list(self.names), "kinds": list(self.kinds),
                "categories": [list(c) for c in self.categories]}

    @classmethod
    def from_dict(cls, obj):
        return cls(tuple(obj["names"]), tuple(obj["kinds"]),
                   tuple(tuple(c) for c in obj["categories"]))

    def is_categorical(self, j):
        return self.kinds[j] == CATEGORICAL

    def transform(self, d: Dataset) -> np.ndarray:
        """(n, p) float matrix; NaN marks a masked cell.

        Categorical cells hold the training category code, or ``UNSEEN`` for
        a category the training data never listed.
        """
        x = np.empty((d.n_rows, len(self.names)))
        for j, (name, kind, cats) in enumerate(zip(self.names, self.kinds, self.categories)):
            if name not in d:
                raise SchemaMismatch(f"column {name!r} seen in training is absent")
            col = d.column(name)
            if col.kind != kind:
                raise SchemaMismatch(f"column {name!r} is {col.kind}, model expects {kind}")
            if kind == CATEGORICAL:
                if col.categories == cats:
                    codes = col.values.astype(float)
                else:
                    index = {c: i for i, c in enumerate(cats)}
                    remap = np.array([index.get(c, UNSEEN) for c in col.categories] or [UNSEEN])
                    codes = remap[np.maximum(col.values, 0)]
                x[:, j] = np.where(col.missing, np.nan, codes)
            else:
                x[:, j] = np.where(col.missing, np.nan, col.values)
        return x


def label_codes(d: Dataset, classes) -> np.ndarray:
    """Row labels as indices into ``classes``."""
    if d.label_column.categories == tuple(classes):
        return d.label_column.values.astype(np.int64)
    index = {c: i for i, c in enumerate(classes)}
    return np.array([index[v] for v in d.labels], dtype=np.int64)
