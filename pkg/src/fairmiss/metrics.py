"""Group fairness and performance metrics.

All group metrics are oriented privileged minus unprivileged. A label source
is either ``None`` (the dataset's own labels), a :class:`Predictions`
object, or any array of label strings aligned with the rows. Multiclass
labels collapse to favourable versus everything else.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, GroupSpec
from .errors import EmptyGroup, LengthMismatch, UndefinedRate, UndefinedRatio

PRIVILEGED = "privileged"
UNPRIVILEGED = "unprivileged"


@dataclass(frozen=True, eq=False)
class Predictions:
    """Predicted labels (strings) aligned with a dataset's rows."""

    labels: np.ndarray
    scores: np.ndarray | None = None  # (n, n_classes) class probabilities
    classes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=object))

    def __len__(self):
        return len(self.labels)


def _label_array(labels, rows: Dataset):
    if labels is None:
        out = rows.labels
    elif isinstance(labels, Predictions):
        out = labels.labels
    else:
        out = np.asarray(labels, dtype=object)
    if len(out) != rows.n_rows:
        raise LengthMismatch(f"{len(out)} labels for {rows.n_rows} rows")
    return out


def _favourable(labels, rows, g: GroupSpec):
    return _label_array(labels, rows) == g.favourable_class


def positive_rate(labels, rows: Dataset, g: GroupSpec, which=PRIVILEGED) -> float:
    """Fraction of the chosen group's rows labelled with the favourable class."""
    priv = g.privileged_mask(rows)
    members = priv if which == PRIVILEGED else ~priv
    if not members.any():
        raise EmptyGroup(f"{which} group of {g.protected_attribute!r} is empty")
    return float(_favourable(labels, rows, g)[members].mean())


def group_positive_rates(labels, rows: Dataset, g: GroupSpec):
    priv = g.check_groups(rows)
    fav = _favourable(labels, rows, g)
    return float(fav[priv].mean()), float(fav[~priv].mean())


def _group_tallies(labels, rows, g):
    priv = g.check_groups(rows)
    fav = _favourable(labels, rows, g)
    return int(np.sum(fav & priv)), int(priv.sum()), int(np.sum(fav & ~priv)), int((~priv).sum())


def spd_from_counts(pos_priv, n_priv, pos_unpriv, n_unpriv) -> float:
    """SPD from integer tallies with one rounding step.

    The numerator is an exact integer, so swapping the favourable class or
    the groups negates the result bit for bit.
    """
    return (pos_priv * n_unpriv - pos_unpriv * n_priv) / (n_priv * n_unpriv)


def spd(labels, rows: Dataset, g: GroupSpec) -> float:
    """Statistical parity difference: p(fav | privileged) - p(fav | unprivileged)."""
    return spd_from_counts(*_group_tallies(labels, rows, g))


def disparate_impact(labels, rows: Dataset, g: GroupSpec) -> float:
    """Unprivileged favourable rate divided by the privileged one."""
    p, u = group_positive_rates(labels, rows, g)
    if p == 0:
        raise UndefinedRatio("privileged favourable rate is 0")
    return u / p


@dataclass(frozen=True)
class GroupConfusion:
    privileged: dict
    unprivileged: dict

    def rates(self, group):
        c = getattr(self, group)
        pos, neg = c["tp"] + c["fn"], c["tn"] + c["fp"]
        tpr = c["tp"] / pos if pos else None
        fpr = c["fp"] / neg if neg else None
        return tpr, fpr

    def to_dict(self):
        return {PRIVILEGED: dict(self.privileged), UNPRIVILEGED: dict(self.unprivileged)}


def group_confusion(pred, truth: Dataset, g: GroupSpec) -> GroupConfusion:
    priv = g.check_groups(truth)
    yhat = _favourable(pred, truth, g)
    y = _favourable(None, truth, g)

    def tally(m):
        return {
            "tp": int(np.sum(yhat & y & m)),
            "fp": int(np.sum(yhat & ~y & m)),
            "tn": int(np.sum(~yhat & ~y & m)),
            "fn": int(np.sum(~yhat & y & m)),
        }

    return GroupConfusion(tally(priv), tally(~priv))


def equal_opportunity_difference(pred, truth: Dataset, g: GroupSpec) -> float:
    conf = group_confusion(pred, truth, g)
    tpr_p, _ = conf.rates(PRIVILEGED)
    tpr_u, _ = conf.rates(UNPRIVILEGED)
    if tpr_p is None or tpr_u is None:
        raise UndefinedRate("a group has no favourable-class rows; TPR undefined")
    return tpr_p - tpr_u


def average_odds_difference(pred, truth: Dataset, g: GroupSpec) -> float:
    """Half the sum of the FPR and TPR differences (privileged minus unprivileged)."""
    conf = group_confusion(pred, truth, g)
    tpr_p, fpr_p = conf.rates(PRIVILEGED)
    tpr_u, fpr_u = conf.rates(UNPRIVILEGED)
    if None in (tpr_p, fpr_p, tpr_u, fpr_u):
        raise UndefinedRate("a group lacks favourable or unfavourable rows")
    return 0.5 * ((fpr_p - fpr_u) + (tpr_p - tpr_u))


def accuracy(pred, truth: Dataset) -> float:
    yhat = _label_array(pred, truth)
    if truth.n_rows == 0:
        raise LengthMismatch("accuracy of an empty evaluation set is undefined")
    return float(np.mean(yhat == truth.labels))


@dataclass(frozen=True)
class FairnessReport:
    """Metric bundle; ``None`` marks a metric that is undefined for the input."""

    spd: float
    di: float | None
    eod: float | None
    avg_odds: float | None
    accuracy: float | None
    group_positive_rates: tuple
    n_rows: int

    def to_dict(self):
        return {
            "spd": self.spd,
            "di": self.di,
            "eod": self.eod,
            "avg_odds": self.avg_odds,
            "accuracy": self.accuracy,
            "group_positive_rates": {
                PRIVILEGED: self.group_positive_rates[0],
                UNPRIVILEGED: self.group_positive_rates[1],
            },
            "n_rows": self.n_rows,
        }


def _or_none(fn, *args):
    try:
        return fn(*args)
    except (UndefinedRatio, UndefinedRate):
        return None


def fairness_report(rows: Dataset, g: GroupSpec, pred=None) -> FairnessReport:
    """Audit either the dataset's own labels (``pred=None``) or a model's predictions.

    EOD, average odds and accuracy need predictions and stay ``None`` for
    dataset-only audits.
    """
    kp, np_, ku, nu = _group_tallies(pred, rows, g)
    p, u = kp / np_, ku / nu
    di = u / p if p != 0 else None
    gap = spd_from_counts(kp, np_, ku, nu)
    if pred is None:
        return FairnessReport(gap, di, None, None, None, (p, u), rows.n_rows)
    return FairnessReport(
        spd=gap,
        di=di,
        eod=_or_none(equal_opportunity_difference, pred, rows, g),
        avg_odds=_or_none(average_odds_difference, pred, rows, g),
        accuracy=accuracy(pred, rows),
        group_positive_rates=(p, u),
        n_rows=rows.n_rows,
    )


SUBSETS = ("all", "with_miss", "without_miss")


def subset_audit(d: Dataset, g: GroupSpec):
    """Dataset-label SPD on all rows, rows with a masked cell, and complete rows.

    Returns ``{subset: FairnessReport or None}``; ``None`` when a group is
    empty inside that subset.
    """
    has_missing = d.row_has_missing()
    parts = {"all": d, "with_miss": d.take(has_missing), "without_miss": d.take(~has_missing)}
    out = {}
    for name in SUBSETS:
        try:
            out[name] = fairness_report(parts[name], g)
        except EmptyGroup:
            out[name] = None
    return out
