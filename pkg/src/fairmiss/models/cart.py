"""Classification tree with surrogate splits for masked cells.

Growth follows the usual recursive-partitioning recipe: Gini splits chosen
over the rows where the candidate attribute is observed, a node-risk stop
rule scaled by the complexity parameter, then weakest-link pruning of any
split whose misclassification gain per extra leaf falls below that same
threshold. Rows whose split attribute is masked are routed by the best
agreeing surrogate split, falling back to the larger child.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import FairMissError

SURROGATE = "surrogate"
RANDOM_CHILD = "random_child"
WEIGHTED_AGGREGATE = "weighted_aggregate"
POLICIES = (SURROGATE, RANDOM_CHILD, WEIGHTED_AGGREGATE)

LEFT, RIGHT, UNRESOLVED = 1, 0, -1


@dataclass(frozen=True)
class CartParams:
    max_depth: int = 30
    min_split: int = 20
    complexity: float = 0.01
    max_surrogates: int = 5
    use_surrogates: bool = True
    min_bucket: int | None = None  # None: round(min_split / 3), at least 1

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_split < 2:
            raise ValueError("min_split must be >= 2")
        if self.complexity < 0:
            raise ValueError("complexity must be >= 0")
        if self.max_surrogates < 0:
            raise ValueError("max_surrogates must be >= 0")
        if self.min_bucket is not None and self.min_bucket < 1:
            raise ValueError("min_bucket must be >= 1")

    @property
    def bucket(self):
        if self.min_bucket is not None:
            return self.min_bucket
        return max(1, int(round(self.min_split / 3)))

    def to_dict(self):
        return asdict(self)


class Split:
    """A binary test on one column.

    Numeric: ``x < threshold`` goes left when ``less_left`` (else right).
    Categorical: ``left[code]`` for codes in ``known``; other codes and
    masked cells are unresolved.
    """

    __slots__ = ("feature", "threshold", "less_left", "left", "known")

    def __init__(self, feature, threshold=None, less_left=True, left=None, known=None):
        self.feature = feature
        self.threshold = threshold
        self.less_left = less_left
        self.left = left
        self.known = known

    @property
    def categorical(self):
        return self.left is not None

    def direction(self, col):
        """LEFT/RIGHT/UNRESOLVED for each value of the column."""
        out = np.full(len(col), UNRESOLVED, dtype=np.int8)
        obs = ~np.isnan(col)
        if self.categorical:
            codes = np.where(obs, col, -1).astype(np.int64)
            ok = (codes >= 0) & (codes < len(self.known))
            ok[ok] = self.known[codes[ok]]
            out[ok] = np.where(self.left[codes[ok]], LEFT, RIGHT)
        else:
            less = col[obs] < self.threshold
            out[obs] = np.where(less == self.less_left, LEFT, RIGHT)
        return out

    def to_dict(self, schema=None):
        name = schema.names[self.feature] if schema else self.feature
        if self.categorical:
            cats = schema.categories[self.feature] if schema else None

            def label(i):
                return cats[i] if cats else int(i)

            return {"column": name,
                    "left_categories": [label(i) for i in np.flatnonzero(self.left & self.known)],
                    "right_categories": [label(i) for i in np.flatnonzero(~self.left & self.known)]}
        return {"column": name, "threshold": float(self.threshold),
                "less_goes": "left" if self.less_left else "right"}

    @classmethod
    def from_dict(cls, obj, schema):
        j = schema.names.index(obj["column"])
        if "threshold" in obj:
            return cls(j, float(obj["threshold"]), obj["less_goes"] == "left")
        cats = schema.categories[j]
        left = np.zeros(len(cats), bool)
        known = np.zeros(len(cats), bool)
        for c in obj["left_categories"]:
            left[cats.index(c)] = known[cats.index(c)] = True
        for c in obj["right_categories"]:
            known[cats.index(c)] = True
        return cls(j, left=left, known=known)


class Node:
    __slots__ = ("counts", "split", "surrogates", "agreements", "default_left",
                 "left", "right", "improvement", "depth")

    def __init__(self, counts, depth):
        self.counts = counts
        self.depth = depth
        self.split = None
        self.surrogates = []
        self.agreements = []
        self.default_left = True
        self.left = self.right = None
        self.improvement = 0.0

    @property
    def is_leaf(self):
        return self.split is None

    @property
    def n(self):
        return int(self.counts.sum())

    @property
    def distribution(self):
        n = self.counts.sum()
        return self.counts / n if n else np.full(len(self.counts), 1 / len(self.counts))

    @property
    def risk(self):
        return int(self.counts.sum() - self.counts.max())

    def make_leaf(self):
        self.split = None
        self.surrogates, self.agreements = [], []
        self.left = self.right = None
        self.improvement = 0.0

    def leaves(self):
        if self.is_leaf:
            return [self]
        return self.left.leaves() + self.right.leaves()

    def to_dict(self, schema, classes):
        out = {"n": self.n, "counts": [int(c) for c in self.counts],
               "distribution": dict(zip(classes, self.distribution.tolist()))}
        if self.is_leaf:
            return out
        out.update({
            "split": self.split.to_dict(schema),
            "improvement": self.improvement,
            "surrogates": [dict(s.to_dict(schema), agreement=a)
                           for s, a in zip(self.surrogates, self.agreements)],
            "default": "left" if self.default_left else "right",
            "left": self.left.to_dict(schema, classes),
            "right": self.right.to_dict(schema, classes),
        })
        return out

    @classmethod
    def from_dict(cls, obj, schema, classes, depth=0):
        node = cls(np.asarray(obj["counts"], dtype=np.int64), depth)
        if "split" in obj:
            node.split = Split.from_dict(obj["split"], schema)
            node.improvement = obj["improvement"]
            node.surrogates = [Split.from_dict(s, schema) for s in obj["surrogates"]]
            node.agreements = [s["agreement"] for s in obj["surrogates"]]
            node.default_left = obj["default"] == "left"
            node.left = cls.from_dict(obj["left"], schema, classes, depth + 1)
            node.right = cls.from_dict(obj["right"], schema, classes, depth + 1)
        return node


def _gini_sum(counts, n):
    """n * Gini impurity; works row-wise on 2-D counts. ``n`` must be positive."""
    counts = np.asarray(counts, dtype=float)
    return n - (counts * counts).sum(axis=-1) / n


class TreeBuilder:
    """Grows one tree; ``feature_sampler`` (if given) picks candidate columns per node."""

    def __init__(self, x, y, n_classes, categorical, n_categories, params: CartParams,
                 feature_sampler=None):
        self.x, self.y, self.k = x, y, n_classes
        self.categorical = categorical
        self.n_categories = n_categories
        self.params = params
        self.sampler = feature_sampler
        self.bucket = params.bucket
        self.observed = ~np.isnan(x)

    def build(self):
        root_idx = np.arange(len(self.y))
        root = Node(np.bincount(self.y, minlength=self.k), 0)
        self.alpha = self.params.complexity * root.risk
        self._grow(root, root_idx)
        if self.params.complexity > 0:
            prune(root, self.alpha)
        return root

    # growth ---------------------------------------------------------------

    def _grow(self, node, idx):
        p = self.params
        if (len(idx) < p.min_split or node.depth >= p.max_depth or node.risk == 0
                or node.risk <= self.alpha):
            return
        features = range(self.x.shape[1]) if self.sampler is None else self.sampler()
        best = None
        for j in features:
            cand = self._best_split(j, idx)
            if cand is not None and (best is None or cand[0] > best[0] + 1e-12):
                best = cand
        if best is None or best[0] <= 1e-12:
            return
        improvement, split = best
        direction = split.direction(self.x[idx, split.feature])
        resolved = direction != UNRESOLVED
        n_left = int(np.sum(direction == LEFT))
        node.default_left = n_left >= int(np.sum(direction == RIGHT))
        if p.use_surrogates and p.max_surrogates > 0:
            self._surrogates(node, idx, split.feature, direction, resolved)
        if not resolved.all():
            pending = ~resolved
            for s in node.surrogates:
                if not pending.any():
                    break
                d = s.direction(self.x[idx[pending], s.feature])
                sub = np.flatnonzero(pending)
                hit = d != UNRESOLVED
                direction[sub[hit]] = d[hit]
                pending[sub[hit]] = False
            direction[pending] = LEFT if node.default_left else RIGHT
        go_left = direction == LEFT
        left_idx, right_idx = idx[go_left], idx[~go_left]
        node.split = split
        node.improvement = float(improvement)
        node.left = Node(np.bincount(self.y[left_idx], minlength=self.k), node.depth + 1)
        node.right = Node(np.bincount(self.y[right_idx], minlength=self.k), node.depth + 1)
        self._grow(node.left, left_idx)
        self._grow(node.right, right_idx)

    def _best_split(self, j, idx):
        rows = idx[self.observed[idx, j]]
        m = len(rows)
        if m < 2 * self.bucket:
            return None
        xj, yj = self.x[rows, j], self.y[rows]
        parent = np.bincount(yj, minlength=self.k)
        parent_imp = _gini_sum(parent, m)
        if self.categorical[j]:
            return self._best_categorical(j, xj.astype(np.int64), yj, parent, parent_imp)
        order = np.argsort(xj, kind="stable")
        v, ys = xj[order], yj[order]
        if self.k == 2:
            ones = np.cumsum(ys)[:-1]
            left = np.column_stack((np.arange(1, m) - ones, ones))
        else:
            onehot = np.zeros((m, self.k))
            onehot[np.arange(m), ys] = 1
            left = np.cumsum(onehot, axis=0)[:-1]
        nl = np.arange(1, m)
        ok = (v[1:] > v[:-1]) & (nl >= self.bucket) & (m - nl >= self.bucket)
        if not ok.any():
            return None
        cand = np.flatnonzero(ok)
        left = left[cand]
        nl = nl[cand]
        gain = parent_imp - _gini_sum(left, nl) - _gini_sum(parent - left, m - nl)
        b = int(np.argmax(gain))
        i = cand[b]
        return gain[b], Split(j, float((v[i] + v[i + 1]) / 2), True)

    def _best_categorical(self, j, codes, yj, parent, parent_imp):
        ncat = self.n_categories[j]
        table = np.bincount(codes * self.k + yj, minlength=ncat * self.k).reshape(ncat, self.k)
        sizes = table.sum(axis=1)
        present = np.flatnonzero(sizes > 0)
        if len(present) < 2:
            return None
        m = sizes.sum()
        if self.k == 2:
            # ordering categories by class-1 share makes prefix splits optimal for Gini
            share = table[present, 1] / sizes[present]
            ordered = present[np.argsort(share, kind="stable")]
            left = np.cumsum(table[ordered], axis=0)[:-1]
            groups = [ordered[: i + 1] for i in range(len(ordered) - 1)]
        else:
            left = table[present]
            groups = [np.array([c]) for c in present]
        nl = left.sum(axis=1)
        ok = (nl >= self.bucket) & (m - nl >= self.bucket)
        if not ok.any():
            return None
        gain = np.full(len(nl), -np.inf)
        gain[ok] = (parent_imp - _gini_sum(left[ok], nl[ok])
                    - _gini_sum(parent - left[ok], m - nl[ok]))
        b = int(np.argmax(gain))
        mask = np.zeros(ncat, bool)
        mask[groups[b]] = True
        known = sizes > 0
        return gain[b], Split(j, left=mask, known=known)

    # surrogates -----------------------------------------------------------

    def _surrogates(self, node, idx, primary, direction, resolved):
        target_rows = idx[resolved]
        target = direction[resolved] == LEFT
        default = LEFT if node.default_left else RIGHT
        found = []
        for s in range(self.x.shape[1]):
            if s == primary:
                continue
            both = self.observed[target_rows, s]
            m = int(both.sum())
            if m == 0:
                continue
            col, t = self.x[target_rows[both], s], target[both]
            blind = np.sum(t) if default == LEFT else m - np.sum(t)
            if self.categorical[s]:
                cand = self._categorical_surrogate(s, col.astype(np.int64), t, node.default_left)
            else:
                cand = _numeric_surrogate(s, col, t)
            if cand is None:
                continue
            agree, split = cand
            if agree > blind:
                found.append((agree / m, agree, s, split))
        found.sort(key=lambda f: (-f[0], -f[1], f[2]))
        found = found[: self.params.max_surrogates]
        node.surrogates = [f[3] for f in found]
        node.agreements = [float(f[0]) for f in found]

    def _categorical_surrogate(self, s, codes, t, default_left):
        ncat = self.n_categories[s]
        lefts = np.bincount(codes, weights=t.astype(float), minlength=ncat)
        totals = np.bincount(codes, minlength=ncat)
        rights = totals - lefts
        known = totals > 0
        go_left = (lefts > rights) | ((lefts == rights) & default_left)
        if go_left[known].all() or not go_left[known].any():
            return None
        agree = float(np.sum(np.where(go_left, lefts, rights)))
        return agree, Split(s, left=go_left, known=known)


def _numeric_surrogate(s, col, t):
    m = len(col)
    order = np.argsort(col, kind="stable")
    v, tt = col[order], t[order]
    cum_left = np.cumsum(tt)[:-1]
    nl = np.arange(1, m)
    ok = v[1:] > v[:-1]
    if not ok.any():
        return None
    total_left = tt.sum()
    # rows below the cut routed left, rows above routed right
    agree_ll = cum_left + ((m - nl) - (total_left - cum_left))
    agree_rl = m - agree_ll
    best_ll = np.where(ok, agree_ll, -1)
    best_rl = np.where(ok, agree_rl, -1)
    i_ll, i_rl = int(np.argmax(best_ll)), int(np.argmax(best_rl))
    if best_ll[i_ll] >= best_rl[i_rl]:
        i, less_left, agree = i_ll, True, best_ll[i_ll]
    else:
        i, less_left, agree = i_rl, False, best_rl[i_rl]
    return float(agree), Split(s, float((v[i] + v[i + 1]) / 2), less_left)


# pruning ------------------------------------------------------------------


def _subtree_stats(node, stats):
    """Fill ``stats[id(node)] = (leaf risk total, leaf count)`` for internal nodes."""
    if node.is_leaf:
        return node.risk, 1
    rl, ll = _subtree_stats(node.left, stats)
    rr, lr = _subtree_stats(node.right, stats)
    stats[id(node)] = (rl + rr, ll + lr, node)
    return rl + rr, ll + lr


def prune(root, alpha):
    """Weakest-link pruning: collapse splits gaining less than ``alpha`` risk per extra leaf."""
    while not root.is_leaf:
        stats = {}
        _subtree_stats(root, stats)
        links = [((node.risk - r) / (leaves - 1), node) for r, leaves, node in stats.values()]
        weakest = min(g for g, _ in links)
        if weakest >= alpha:
            break
        for g, node in links:
            if g <= weakest + 1e-12:
                node.make_leaf()


# prediction ---------------------------------------------------------------


def predict_proba(root, x, policy=SURROGATE, seed=0):
    """Class distributions for each row of ``x`` under a masked-cell policy."""
    if policy not in POLICIES:
        raise FairMissError(f"unknown prediction policy {policy!r}")
    out = np.zeros((x.shape[0], len(root.counts)))
    rng = np.random.default_rng(seed) if policy == RANDOM_CHILD else None
    _route(root, x, np.arange(x.shape[0]), np.ones(x.shape[0]), out, policy, rng)
    return out


def _route(node, x, idx, w, out, policy, rng):
    if len(idx) == 0:
        return
    if node.is_leaf:
        out[idx] += w[:, None] * node.distribution
        return
    d = node.split.direction(x[idx, node.split.feature])
    pending = d == UNRESOLVED
    if pending.any():
        if policy == SURROGATE:
            for s in node.surrogates:
                sub = np.flatnonzero(pending)
                ds = s.direction(x[idx[sub], s.feature])
                d[sub] = ds
                pending[sub] = ds == UNRESOLVED
                if not pending.any():
                    break
            d[pending] = LEFT if node.default_left else RIGHT
        elif policy == RANDOM_CHILD:
            d[pending] = np.where(rng.random(int(pending.sum())) < 0.5, LEFT, RIGHT)
        else:
            nl, nr = node.left.n, node.right.n
            frac = nl / (nl + nr)
            both = np.flatnonzero(pending)
            _route(node.left, x, idx[both], w[both] * frac, out, policy, rng)
            _route(node.right, x, idx[both], w[both] * (1 - frac), out, policy, rng)
            keep = ~pending
            idx, w, d = idx[keep], w[keep], d[keep]
    go_left = d == LEFT
    _route(node.left, x, idx[go_left], w[go_left], out, policy, rng)
    _route(node.right, x, idx[~go_left], w[~go_left], out, policy, rng)


def importance_totals(root, n_features):
    totals = np.zeros(n_features)
    stack = [root]
    while stack:
        node = stack.pop()
        if not node.is_leaf:
            totals[node.split.feature] += node.improvement
            stack.extend((node.left, node.right))
    return totals


def referenced_features(root):
    """Indices of columns used by any primary or surrogate split."""
    used, stack = set(), [root]
    while stack:
        node = stack.pop()
        if not node.is_leaf:
            used.add(node.split.feature)
            used.update(s.feature for s in node.surrogates)
            stack.extend((node.left, node.right))
    return used
