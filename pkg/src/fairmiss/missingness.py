"""Missingness diagnostics.

Per-column missing fractions, the aggregation of missingness patterns,
Pearson correlations between missingness indicators and the fairness frame,
and Little's chi-square test of the MCAR hypothesis built on an EM fit of a
multivariate normal to the incomplete data.
"""

from __future__ import annotations

import csv
import io
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .dataset import Dataset, GroupSpec
from .errors import AllMissingColumn, NoMissingValues, SingularCovariance

log = logging.getLogger(__name__)

INTEGER_CODES = "codes"
ONE_HOT = "onehot"


def missing_fraction_per_column(d: Dataset) -> dict:
    n = d.n_rows
    return {c.name: (c.n_missing / n if n else 0.0) for c in d.columns}


@dataclass(frozen=True)
class PatternTable:
    columns: tuple
    rows: tuple  # (pattern tuple[bool], count, fraction)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(self.columns) + ["count", "fraction"])
        for pattern, count, frac in self.rows:
            w.writerow([int(b) for b in pattern] + [count, repr(frac)])
        return buf.getvalue()

    def fraction_of(self, missing_columns) -> float:
        """Fraction of rows whose missing set equals ``missing_columns`` exactly."""
        target = tuple(c in set(missing_columns) for c in self.columns)
        return sum(f for p, _, f in self.rows if p == target)


def pattern_table(d: Dataset) -> PatternTable:
    """Distinct missingness patterns over the columns that have any masked cell."""
    cols = [c for c in d.columns if c.n_missing]
    n = d.n_rows
    if n == 0:
        return PatternTable(tuple(c.name for c in cols), ())
    if not cols:
        return PatternTable((), (((), n, 1.0),))
    mask = np.column_stack([c.missing for c in cols])
    patterns, counts = np.unique(mask, axis=0, return_counts=True)
    rows = [(tuple(bool(b) for b in p), int(k), k / n) for p, k in zip(patterns, counts)]
    rows.sort(key=lambda r: (-r[1], r[0]))
    return PatternTable(tuple(c.name for c in cols), tuple(rows))


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Pearson correlations; ``nan`` marks entries undefined by a constant indicator."""

    labels: tuple
    values: np.ndarray

    @property
    def defined(self):
        return ~np.isnan(self.values)

    def undefined_entries(self):
        idx = np.argwhere(~self.defined)
        return [(self.labels[i], self.labels[j]) for i, j in idx if i <= j]

    def get(self, a, b):
        v = self.values[self.labels.index(a), self.labels.index(b)]
        return None if np.isnan(v) else float(v)

    def to_dict(self):
        return {
            "labels": list(self.labels),
            "values": [[None if np.isnan(v) else float(v) for v in row] for row in self.values],
        }


def missingness_correlations(d: Dataset, g: GroupSpec) -> CorrelationMatrix:
    """Correlate 0/1 indicators: missing per column, privileged membership, favourable class."""
    cols = [c for c in d.features if c.n_missing]
    labels = [f"missing:{c.name}" for c in cols] + [
        f"privileged:{g.protected_attribute}", f"class:{g.favourable_class}"]
    ind = np.column_stack(
        [c.missing.astype(float) for c in cols]
        + [g.privileged_mask(d).astype(float), (d.labels == g.favourable_class).astype(float)]
    )
    centred = ind - ind.mean(axis=0)
    sd = np.sqrt((centred ** 2).sum(axis=0))
    const = sd == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (centred.T @ centred) / np.outer(sd, sd)
    r = np.clip(r, -1.0, 1.0)
    r[const, :] = np.nan
    r[:, const] = np.nan
    idx = np.flatnonzero(~const)
    r[idx, idx] = 1.0
    r = (r + r.T) / 2
    return CorrelationMatrix(tuple(labels), r)


# ---------------------------------------------------------------------------
# EM for a multivariate normal with missing entries


def encode_numeric(d: Dataset, encoding=INTEGER_CODES, include_label=True):
    """Numeric matrix (nan = missing) and column names for the MCAR machinery.

    Categorical columns become integer codes in lexicographic category order,
    or k-1 dummy columns (first category as reference) under ``onehot``.
    """
    blocks, names = [], []
    for c in d.columns:
        if c.name == d.label and not include_label:
            continue
        if c.is_numeric:
            blocks.append(c.values.astype(float))
            names.append(c.name)
        elif encoding == INTEGER_CODES:
            blocks.append(np.where(c.missing, np.nan, c.values.astype(float)))
            names.append(c.name)
        elif encoding == ONE_HOT:
            for k, cat in enumerate(c.categories[1:], start=1):
                blocks.append(np.where(c.missing, np.nan, (c.values == k).astype(float)))
                names.append(f"{c.name}={cat}")
        else:
            raise ValueError(f"unknown encoding {encoding!r}")
    if not blocks:
        return np.zeros((d.n_rows, 0)), names
    return np.column_stack(blocks), names


@dataclass
class EMResult:
    mean: np.ndarray
    cov: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    loglik_history: list = field(default_factory=list)
    ridge_added: float = 0.0


def _patterns(missing):
    patterns, inverse = np.unique(missing, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    return [(~patterns[k], np.flatnonzero(inverse == k)) for k in range(len(patterns))]


def _inverse_and_logdet(s):
    """Inverse and log-determinant via Cholesky; raises LinAlgError when not PD."""
    chol = np.linalg.cholesky(s)
    inv_chol = np.linalg.inv(chol)
    return inv_chol.T @ inv_chol, 2.0 * np.log(np.diag(chol)).sum()


def _loglik(x, groups, mu, sigma):
    ll = 0.0
    for obs, rows in groups:
        if not obs.any():
            continue
        xo = x[np.ix_(rows, obs)] - mu[obs]
        inv, logdet = _inverse_and_logdet(sigma[np.ix_(obs, obs)])
        quad = float(((xo @ inv) * xo).sum())
        ll -= 0.5 * (len(rows) * (obs.sum() * np.log(2 * np.pi) + logdet) + quad)
    return ll


def _loglik_regularised(x, groups, mu, sigma, ridge_scale):
    """Log-likelihood, adding the smallest tried ridge that makes every
    observed block positive definite. Returns (loglik, sigma, ridge added)."""
    p = sigma.shape[0]
    base = ridge_scale * max(np.trace(sigma), 1e-300) / p
    added = 0.0
    for attempt in range(8):
        try:
            return _loglik(x, groups, mu, sigma), sigma, added
        except np.linalg.LinAlgError:
            step = base * (10 ** attempt)
            sigma = sigma + step * np.eye(p)
            added += step
    raise SingularCovariance("covariance stays singular after ridge regularisation")


def em_mvn(x, tol=1e-6, max_iter=500, ridge=1e-8) -> EMResult:
    """Maximum-likelihood mean and covariance of incomplete multivariate-normal data.

    ``x`` is an (n, p) array with ``nan`` for missing entries. Iterates until
    the relative change of the observed-data log-likelihood drops below
    ``tol``. When an observed-variable block of the covariance is singular a
    ridge of ``ridge * trace(cov) / p`` (grown tenfold per retry) is added.
    """
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    if p < 2:
        raise ValueError("EM needs at least two variables")
    missing = np.isnan(x)
    if missing.all(axis=0).any():
        bad = np.flatnonzero(missing.all(axis=0)).tolist()
        raise AllMissingColumn(f"columns {bad} have no observed value")
    groups = _patterns(missing)

    mu = np.nanmean(x, axis=0)
    if not missing.any():
        centred = x - mu
        sigma = centred.T @ centred / n
        ll, sigma, added = _loglik_regularised(x, groups, mu, sigma, ridge)
        return EMResult(mu, sigma, ll, 1, True, [ll], added)

    sigma = np.diag(np.nanvar(x, axis=0))
    ll, sigma, total_ridge = _loglik_regularised(x, groups, mu, sigma, ridge)
    history = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        t1 = np.zeros(p)
        t2 = np.zeros((p, p))
        for obs, rows in groups:
            mis = ~obs
            xr = x[rows].copy()
            if mis.any():
                if obs.any():
                    s_oo = sigma[np.ix_(obs, obs)]
                    s_mo = sigma[np.ix_(mis, obs)]
                    coef = np.linalg.solve(s_oo, s_mo.T).T
                    xr[:, mis] = mu[mis] + (xr[:, obs] - mu[obs]) @ coef.T
                    cond = sigma[np.ix_(mis, mis)] - coef @ s_mo.T
                else:
                    xr[:, mis] = mu[mis]
                    cond = sigma[np.ix_(mis, mis)]
                t2[np.ix_(mis, mis)] += len(rows) * cond
            t1 += xr.sum(axis=0)
            t2 += xr.T @ xr
        mu = t1 / n
        sigma = t2 / n - np.outer(mu, mu)
        sigma = (sigma + sigma.T) / 2
        ll, sigma, added = _loglik_regularised(x, groups, mu, sigma, ridge)
        total_ridge += added
        history.append(ll)
        if abs(history[-1] - history[-2]) <= tol * abs(history[-2]):
            converged = True
            break
    return EMResult(mu, sigma, history[-1], it, converged, history, total_ridge)


@dataclass(frozen=True)
class McarTestResult:
    statistic: float
    dof: int
    p_value: float
    n_patterns: int
    em_iterations: int
    em_converged: bool
    dropped_patterns: tuple = ()

    def to_dict(self):
        return {
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "n_patterns": self.n_patterns,
            "em_iterations": self.em_iterations,
            "em_converged": self.em_converged,
            "dropped_patterns": [list(p) for p in self.dropped_patterns],
        }


def little_mcar_statistic(x, tol=1e-6, max_iter=500) -> McarTestResult:
    """Little's MCAR test on a numeric matrix with ``nan`` for missing entries.

    Patterns observed in fewer than two rows, or whose restricted covariance
    cannot be inverted, are left out of the statistic and of the degrees of
    freedom (a warning lists them).
    """
    x = np.asarray(x, dtype=float)
    missing = np.isnan(x)
    if not missing.any():
        raise NoMissingValues("Little's test is undefined on complete data")
    n, p = x.shape
    em = em_mvn(x, tol=tol, max_iter=max_iter)
    groups = _patterns(missing)
    stat, sum_pj, dropped = 0.0, 0, []
    for obs, rows in groups:
        if not obs.any():
            continue
        if len(rows) < 2:
            dropped.append(tuple(bool(b) for b in ~obs))
            continue
        diff = x[np.ix_(rows, obs)].mean(axis=0) - em.mean[obs]
        try:
            inv, _ = _inverse_and_logdet(em.cov[np.ix_(obs, obs)])
        except np.linalg.LinAlgError:
            dropped.append(tuple(bool(b) for b in ~obs))
            continue
        stat += len(rows) * float(diff @ inv @ diff)
        sum_pj += int(obs.sum())
    if dropped:
        warnings.warn(f"Little's test: {len(dropped)} missingness pattern(s) dropped "
                      "(fewer than two rows or singular covariance)", stacklevel=2)
    dof = sum_pj - p
    if dof < 1:
        raise NoMissingValues("too few usable missingness patterns for Little's test")
    p_value = float(stats.chi2.sf(stat, dof))
    return McarTestResult(float(stat), int(dof), p_value, len(groups), em.iterations,
                          em.converged, tuple(dropped))


def little_mcar_test(d: Dataset, encoding=INTEGER_CODES, include_label=True,
                     tol=1e-6, max_iter=500) -> McarTestResult:
    x, _ = encode_numeric(d, encoding=encoding, include_label=include_label)
    if not np.isnan(x).any():
        raise NoMissingValues("dataset has no missing values")
    # drop constant columns: their variance is zero and they carry no information
    keep = np.array([np.nanstd(x[:, j]) > 0 for j in range(x.shape[1])], dtype=bool)
    if not keep.all():
        log.info("Little's test: ignoring %d constant column(s)", int((~keep).sum()))
    return little_mcar_statistic(x[:, keep], tol=tol, max_iter=max_iter)
