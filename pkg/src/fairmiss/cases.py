"""Bundled datasets and the six (dataset, protected attribute) audit cases."""

import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .dataset import GroupSpec, read_csv

BUILTIN = ("adult", "compas", "titanic")


@dataclass(frozen=True)
class Case:
    dataset: str
    group: GroupSpec

    @property
    def name(self):
        return f"{self.dataset}/{self.group.protected_attribute}"


CASES = (
    Case("adult", GroupSpec("race", {"White"}, ">50K")),
    Case("adult", GroupSpec("sex", {"Male"}, ">50K")),
    Case("compas", GroupSpec("race", {"Caucasian"}, "0")),
    Case("compas", GroupSpec("sex", {"Female"}, "0")),
    Case("titanic", GroupSpec("pclass", {"1"}, "1")),
    Case("titanic", GroupSpec("sex", {"female"}, "1")),
)


def groups_for(dataset):
    return [c.group for c in CASES if c.dataset == dataset]


def data_path(name, suffix=".csv.gz"):
    return resources.files("fairmiss") / "data" / f"{name}{suffix}"


def expected_digests():
    return json.loads(data_path("digests", ".json").read_text())


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def verify_builtin(name):
    """Check the decompressed CSV against the recorded content digest."""
    import gzip

    with gzip.open(data_path(name), "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    return digest == expected_digests()[name]["csv_sha256"]


@lru_cache(maxsize=None)
def load_builtin(name):
    """Load one of the bundled datasets (``adult``, ``compas``, ``titanic``)."""
    if name not in BUILTIN:
        raise KeyError(f"unknown builtin dataset {name!r}; choose from {BUILTIN}")
    return read_csv(data_path(name), schema=data_path(name, ".schema.json"))
