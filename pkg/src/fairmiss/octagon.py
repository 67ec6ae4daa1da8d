"""The (accuracy, SPD) feasibility region of all classifiers on a labelled dataset.

Any labelling of a dataset is fixed by four counts: true and false
positives inside the privileged and unprivileged groups. Accuracy and SPD
are both linear in those counts, so the achievable points are the image of
a 4-D box under a linear map: a centrally symmetric polygon with at most
eight vertices, centred on (0.5, 0). Starting from the perfect classifier,
the boundary is traced by exhausting the four kinds of mistakes in order of
their SPD change per unit of accuracy. Which mistake comes first depends
only on which group is smaller.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, GroupSpec
from .errors import EmptyGroup, TooLargeToEnumerate
from .metrics import spd_from_counts

ENUMERATION_LIMIT = 20


@dataclass(frozen=True)
class DatasetStats:
    pos_priv: int
    neg_priv: int
    pos_unpriv: int
    neg_unpriv: int

    def __post_init__(self):
        if min(self.pos_priv, self.neg_priv, self.pos_unpriv, self.neg_unpriv) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def n_priv(self):
        return self.pos_priv + self.neg_priv

    @property
    def n_unpriv(self):
        return self.pos_unpriv + self.neg_unpriv

    @property
    def n(self):
        return self.n_priv + self.n_unpriv

    @property
    def spd(self):
        return spd_from_counts(self.pos_priv, self.n_priv, self.pos_unpriv, self.n_unpriv)

    @property
    def positive_fraction(self):
        return (self.pos_priv + self.pos_unpriv) / self.n


def dataset_stats(d: Dataset, g: GroupSpec) -> DatasetStats:
    priv = g.check_groups(d)
    pos = d.labels == g.favourable_class
    return DatasetStats(
        pos_priv=int(np.sum(pos & priv)),
        neg_priv=int(np.sum(~pos & priv)),
        pos_unpriv=int(np.sum(pos & ~priv)),
        neg_unpriv=int(np.sum(~pos & ~priv)),
    )


@dataclass(frozen=True)
class TradeoffPoint:
    label: str
    accuracy: float
    spd: float

    def to_dict(self):
        return {"label": self.label, "accuracy": self.accuracy, "spd": self.spd}


@dataclass(frozen=True)
class OctagonSpec:
    """Eight (accuracy, spd) vertices.

    The order starts at the perfect classifier and runs counter-clockwise when
    SPD is drawn on the horizontal axis and accuracy on the vertical one.
    """

    vertices: tuple
    assumption_satisfied: bool
    degenerate: bool

    def to_dict(self):
        return {
            "vertices": [{"accuracy": a, "spd": s} for a, s in self.vertices],
            "assumption_satisfied": self.assumption_satisfied,
            "degenerate": self.degenerate,
        }

    def trace(self):
        """Closed polygon trace (first vertex repeated) for plotting."""
        return list(self.vertices) + [self.vertices[0]]


def octagon_vertices(s: DatasetStats) -> OctagonSpec:
    if s.n_priv == 0 or s.n_unpriv == 0:
        raise EmptyGroup("both groups must be nonempty")
    n, na, nb = s.n, s.n_priv, s.n_unpriv
    pa, qa, pb, qb = s.pos_priv, s.neg_priv, s.pos_unpriv, s.neg_unpriv
    perfect_spd = s.spd

    if na <= nb:
        # privileged-group positives are flipped first (largest SPD step per error)
        first = (1 - pa / n, -pb / nb)
        third = (qa / n, -1 + pb / nb)
    else:
        # unprivileged negatives are flipped first instead
        first = (1 - qb / n, pa / na - 1)
        third = (pb / n, -pa / na)
    bottom = ((qa + pb) / n, -1.0)
    half = [(1.0, perfect_spd), first, bottom, third]
    mirrored = [(1 - a, -sp) for a, sp in half]
    vertices = tuple((float(a), float(sp)) for a, sp in half + mirrored)

    hull = _convex_hull(vertices)
    degenerate = len(hull) < 3 or abs(_area(hull)) < 1e-15
    fav_is_majority = (pa + pb) * 2 >= n
    return OctagonSpec(vertices, fav_is_majority, degenerate)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _convex_hull(points):
    """Andrew's monotone chain; returns CCW hull without collinear points."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _area(hull):
    return 0.5 * sum(_cross((0.0, 0.0), hull[i], hull[(i + 1) % len(hull)]) for i in range(len(hull)))


def _segment_distance(p, a, b):
    ax, ay = b[0] - a[0], b[1] - a[1]
    denom = ax * ax + ay * ay
    t = 0.0 if denom == 0 else max(0.0, min(1.0, ((p[0] - a[0]) * ax + (p[1] - a[1]) * ay) / denom))
    dx, dy = p[0] - (a[0] + t * ax), p[1] - (a[1] + t * ay)
    return (dx * dx + dy * dy) ** 0.5


def is_convex(o: OctagonSpec) -> bool:
    """Every vertex lies on the boundary of the convex hull of all vertices."""
    hull = _convex_hull(o.vertices)
    if len(hull) < 3:
        return True
    return all(
        min(_segment_distance(v, hull[i], hull[(i + 1) % len(hull)]) for i in range(len(hull))) < 1e-12
        for v in o.vertices
    )


def contains(o: OctagonSpec, p, tol: float = 1e-9) -> bool:
    """Membership of an (accuracy, spd) point, with absolute slack ``tol`` per half-plane."""
    q = (p.accuracy, p.spd) if isinstance(p, TradeoffPoint) else (float(p[0]), float(p[1]))
    hull = _convex_hull(o.vertices)
    if len(hull) == 1:
        return _segment_distance(q, hull[0], hull[0]) <= tol
    if len(hull) == 2:
        return _segment_distance(q, hull[0], hull[1]) <= tol
    for i in range(len(hull)):
        a, b = hull[i], hull[(i + 1) % len(hull)]
        length = ((b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2) ** 0.5
        # signed distance of q to the left of edge a->b (inside for a CCW hull)
        if _cross(a, b, q) / length < -tol:
            return False
    return True


def labeling_point(pred_pos, truth_pos, priv):
    """(accuracy, spd) of one binary labelling; all arguments are boolean arrays."""
    acc = float(np.mean(pred_pos == truth_pos))
    return acc, float(pred_pos[priv].mean() - pred_pos[~priv].mean())


def brute_force_hull(d: Dataset, g: GroupSpec):
    """(accuracy, spd) of every one of the 2**n binary labellings of ``d``.

    Returns a set of (accuracy, spd) tuples; exact rationals are rounded to
    12 decimals so equal points deduplicate.
    """
    if d.n_rows > ENUMERATION_LIMIT:
        raise TooLargeToEnumerate(f"{d.n_rows} rows exceeds the limit of {ENUMERATION_LIMIT}")
    priv = g.check_groups(d)
    truth = d.labels == g.favourable_class
    n = d.n_rows
    labelings = np.array(list(itertools.product((False, True), repeat=n)), dtype=bool).reshape(-1, n)
    acc = (labelings == truth).mean(axis=1)
    spd_vals = labelings[:, priv].mean(axis=1) - labelings[:, ~priv].mean(axis=1)
    return {(round(float(a), 12), round(float(s), 12)) for a, s in zip(acc, spd_vals)}


def baseline_points(s: DatasetStats):
    """Majority-class and perfect classifiers as trade-off points."""
    majority = max(s.positive_fraction, 1 - s.positive_fraction)
    return TradeoffPoint("Majority", majority, 0.0), TradeoffPoint("Perfect", 1.0, s.spd)


def _dominates(a, b):
    return (a.accuracy >= b.accuracy and abs(a.spd) <= abs(b.spd)
            and (a.accuracy > b.accuracy or abs(a.spd) < abs(b.spd)))


def pareto_front(points):
    """Points not dominated under (maximise accuracy, minimise |spd|), sorted by accuracy."""
    points = list(points)
    if not points:
        raise ValueError("pareto_front needs at least one point")
    front = [p for p in points if not any(_dominates(q, p) for q in points)]
    return sorted(front, key=lambda p: (p.accuracy, -abs(p.spd)))
