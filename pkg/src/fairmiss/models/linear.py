"""Multinomial logistic regression fitted by full-batch accelerated gradient descent."""

from __future__ import annotations

import numpy as np

from .encoding import FeatureSchema


class OneHotScaler:
    """One-hot categorical columns plus standardised numeric columns.

    Unseen categories encode as all-zero indicator blocks.
    """

    def __init__(self, schema: FeatureSchema, mean, scale):
        self.schema = schema
        self.mean = np.asarray(mean, float)
        self.scale = np.asarray(scale, float)

    @classmethod
    def fit(cls, schema, x):
        numeric = [j for j in range(len(schema.names)) if not schema.is_categorical(j)]
        mean = x[:, numeric].mean(axis=0) if numeric else np.zeros(0)
        scale = x[:, numeric].std(axis=0) if numeric else np.zeros(0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(schema, mean, scale)

    @property
    def width(self):
        return sum(len(c) if self.schema.is_categorical(j) else 1
                   for j, c in enumerate(self.schema.categories))

    def column_names(self):
        out = []
        for j, name in enumerate(self.schema.names):
            if self.schema.is_categorical(j):
                out.extend(f"{name}={c}" for c in self.schema.categories[j])
            else:
                out.append(name)
        return out

    def transform(self, x):
        blocks, k = [], 0
        for j in range(x.shape[1]):
            if self.schema.is_categorical(j):
                ncat = len(self.schema.categories[j])
                codes = x[:, j].astype(np.int64)
                block = np.zeros((len(x), ncat))
                ok = (codes >= 0) & (codes < ncat)
                block[np.flatnonzero(ok), codes[ok]] = 1.0
                blocks.append(block)
            else:
                blocks.append(((x[:, j] - self.mean[k]) / self.scale[k])[:, None])
                k += 1
        return np.hstack(blocks) if blocks else np.zeros((len(x), 0))


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_gradient(w, b, x, onehot, l2):
    """Mean cross-entropy plus ``l2/2 * ||w||^2``, and its gradient in (w, b)."""
    p = softmax(x @ w + b)
    n = len(x)
    loss = -np.sum(onehot * np.log(np.clip(p, 1e-300, None))) / n + 0.5 * l2 * np.sum(w * w)
    r = (p - onehot) / n
    return loss, x.T @ r + l2 * w, r.sum(axis=0)


def gradient_descent(x, onehot, l2=1e-4, tol=1e-5, max_iter=3000):
    """Nesterov-accelerated full-batch descent with restart on loss increase.

    Stops when the largest absolute gradient entry drops below ``tol``.
    Returns ``(w, b, iterations, converged)``.
    """
    n, d = x.shape
    k = onehot.shape[1]
    aug = np.hstack([x, np.ones((n, 1))])
    # softmax cross-entropy Hessian is bounded by 0.5 * X'X / n
    lipschitz = 0.5 * np.linalg.eigvalsh(aug.T @ aug / n)[-1] + l2
    step = 1.0 / lipschitz
    w, b = np.zeros((d, k)), np.zeros(k)
    yw, yb = w.copy(), b.copy()
    t, prev_loss = 1.0, np.inf
    for it in range(1, max_iter + 1):
        loss, gw, gb = loss_and_gradient(yw, yb, x, onehot, l2)
        if max(np.abs(gw).max(initial=0), np.abs(gb).max()) < tol:
            return yw, yb, it, True
        if loss > prev_loss:
            # momentum overshot: restart from the last iterate
            yw, yb, t = w.copy(), b.copy(), 1.0
            loss, gw, gb = loss_and_gradient(yw, yb, x, onehot, l2)
        prev_loss = loss
        w_next, b_next = yw - step * gw, yb - step * gb
        t_next = (1 + np.sqrt(1 + 4 * t * t)) / 2
        mom = (t - 1) / t_next
        yw = w_next + mom * (w_next - w)
        yb = b_next + mom * (b_next - b)
        w, b, t = w_next, b_next, t_next
    return w, b, max_iter, False
