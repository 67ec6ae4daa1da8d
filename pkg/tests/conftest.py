import numpy as np
import pytest

from fairmiss.dataset import Dataset, GroupSpec


def make_binary(priv_labels, unpriv_labels, extra=None):
    """Dataset with a ``grp`` attribute (a = privileged, b = unprivileged) and label ``y``."""
    grp = ["a"] * len(priv_labels) + ["b"] * len(unpriv_labels)
    y = [str(v) for v in list(priv_labels) + list(unpriv_labels)]
    data = {"grp": grp, "y": y}
    data.update(extra or {})
    return Dataset.from_dict(data, label="y")


GROUP = GroupSpec("grp", {"a"}, "1")


@pytest.fixture
def group():
    return GROUP


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
