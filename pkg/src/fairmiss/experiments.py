"""Repeated train/test protocols comparing how rows with masked cells are used.

Three protocols share one engine:

``subset``
    CART-style learners trained on four regimes carved from the training
    side of each split: every row, rows with a masked cell, complete rows,
    and a sample of complete rows as large as the masked subset.
``columns``
    The same, after dropping every feature column that has a masked cell.
``imputation``
    Mean/mode imputation versus deletion of incomplete rows, for learners
    that cannot consume masked cells.

Each repetition draws its seeds from ``SeedSequence(master_seed,
spawn_key=(r,))``, so repetitions can run in any order or concurrently and
the aggregated report is byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _stats
from statsmodels.stats.multitest import multipletests

from . import __version__
from .dataset import Dataset, GroupSpec, drop_columns, sample_rows, stratified_split
from .errors import (EmptyGroup, FairMissError, InsufficientRepetitions, NoColumnsLeft,
                     RegimeEmpty, SampleTooLarge, SingleClassTraining, TooManyDiscarded)
from .handling import apply_imputer, fit_imputer
from .metrics import accuracy, spd, subset_audit
from .models import MAJORITY, PERFECT, ModelSpec, fit
from .octagon import baseline_points, dataset_stats, octagon_vertices, pareto_front, TradeoffPoint

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SUBSET, COLUMNS, IMPUTATION = "subset", "columns", "imputation"
PROTOCOLS = (SUBSET, COLUMNS, IMPUTATION)
ALL_ROWS, WITH_MISS, WITHOUT_MISS, SAMPLE_WITHOUT_MISS = (
    "all_rows", "with_miss", "without_miss", "sample_without_miss")
SUBSET_REGIMES = (ALL_ROWS, WITH_MISS, WITHOUT_MISS, SAMPLE_WITHOUT_MISS)
IMPUTED, DELETED = "imputation", "deletion"
CONDITIONS = (IMPUTED, DELETED)
FULL_DATASET, TRAIN_ONLY = "full_dataset", "train_only"
REGIME_TITLES = {ALL_ROWS: "all rows", WITH_MISS: "with ⊙", WITHOUT_MISS: "w/o ⊙",
                 SAMPLE_WITHOUT_MISS: "sample w/o ⊙", IMPUTED: "Imputation", DELETED: "Deletion"}
# which dataset-audit subset a regime's SPD is compared against
AUDIT_COLUMN = {ALL_ROWS: "all", WITH_MISS: "with_miss", WITHOUT_MISS: "without_miss",
                SAMPLE_WITHOUT_MISS: "without_miss", IMPUTED: "all", DELETED: "without_miss"}
SIGNIFICANCE_PROCEDURE = "pairwise Welch t-tests, Holm-adjusted, alpha=0.05"
MAX_DISCARD_FRACTION = 0.10


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    groups: tuple
    protocol: str = SUBSET
    models: tuple = (ModelSpec("cart"),)
    regimes: tuple | None = None
    repetitions: int = 100
    test_fraction: float = 0.3
    master_seed: int = 0
    imputation_mode: str = FULL_DATASET
    numeric_fill: str = "mean"
    schema: str | None = None  # schema sidecar path when ``dataset`` is a file

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise FairMissError(f"unknown protocol {self.protocol!r}; choose from {PROTOCOLS}")
        groups = (self.groups,) if isinstance(self.groups, GroupSpec) else tuple(self.groups)
        if not groups:
            raise FairMissError("at least one group is required")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "models", tuple(ModelSpec.parse(m) for m in self.models))
        allowed = CONDITIONS if self.protocol == IMPUTATION else SUBSET_REGIMES
        regimes = allowed if self.regimes is None else tuple(self.regimes)
        if not regimes:
            raise FairMissError("regimes must be nonempty")
        bad = [r for r in regimes if r not in allowed]
        if bad:
            raise FairMissError(f"regimes {bad} are not valid for the {self.protocol} protocol")
        object.__setattr__(self, "regimes", tuple(r for r in allowed if r in regimes))
        if self.repetitions < 1:
            raise FairMissError("repetitions must be >= 1")
        if not 0 < self.test_fraction < 1:
            raise FairMissError("test_fraction must lie in (0, 1)")
        if self.imputation_mode not in (FULL_DATASET, TRAIN_ONLY):
            raise FairMissError(f"unknown imputation mode {self.imputation_mode!r}")
        if self.protocol == IMPUTATION:
            kinds = [m.kind for m in self.models]
            extra = tuple(ModelSpec(k) for k in (MAJORITY, PERFECT) if k not in kinds)
            object.__setattr__(self, "models", self.models + extra)

    @property
    def column_policy(self):
        return "drop_missing_columns" if self.protocol == COLUMNS else "keep"

    @property
    def treatment(self):
        return "imputation_vs_deletion" if self.protocol == IMPUTATION else "none"

    def to_dict(self):
        return {
            "dataset": self.dataset,
            "groups": [g.to_dict() for g in self.groups],
            "protocol": self.protocol,
            "column_policy": self.column_policy,
            "treatment": self.treatment,
            "models": [m.to_dict() for m in self.models],
            "regimes": list(self.regimes),
            "repetitions": self.repetitions,
            "test_fraction": self.test_fraction,
            "master_seed": self.master_seed,
            "imputation_mode": self.imputation_mode,
            "numeric_fill": self.numeric_fill,
            "schema": self.schema,
        }

    @classmethod
    def from_dict(cls, obj):
        obj = dict(obj)
        if "group" in obj and "groups" not in obj:
            obj["groups"] = [obj.pop("group")]
        known = {"dataset", "groups", "protocol", "models", "regimes", "repetitions",
                 "test_fraction", "master_seed", "imputation_mode", "numeric_fill", "schema"}
        unknown = set(obj) - known - {"column_policy", "treatment"}
        if unknown:
            raise FairMissError(f"unknown config keys: {sorted(unknown)}")
        if "dataset" not in obj or "groups" not in obj:
            raise FairMissError("config needs 'dataset' and 'groups'")
        args = {k: v for k, v in obj.items() if k in known}
        args["groups"] = tuple(GroupSpec.from_dict(g) for g in args["groups"])
        if "models" in args:
            args["models"] = tuple(ModelSpec.parse(m) for m in args["models"])
        if args.get("regimes") is not None:
            args["regimes"] = tuple(args["regimes"])
        return cls(**args)


@dataclass(frozen=True)
class RegimeResult:
    group: str
    regime: str
    model: str
    accuracy_mean: float
    accuracy_std: float
    spd_mean: float
    spd_std: float
    n_repetitions: int
    reference_spd: float
    amplification: str
    significant: bool | None = None

    def to_dict(self):
        return dict(self.__dict__)

    @property
    def label(self):
        return f"{self.model} ({REGIME_TITLES[self.regime]})"


@dataclass(frozen=True)
class ExperimentReport:
    """Plain-data report; ``to_dict``/``from_dict`` round-trip exactly through JSON."""

    config: dict
    dataset_audit: dict
    results: tuple
    baselines: dict
    pareto: dict
    octagons: dict
    repetitions: tuple
    discarded: tuple = ()
    significance_procedure: str = SIGNIFICANCE_PROCEDURE
    version: str = __version__
    schema_version: int = SCHEMA_VERSION
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "version": self.version,
            "config": self.config,
            "dataset_audit": self.dataset_audit,
            "results": [r.to_dict() for r in self.results],
            "significance_procedure": self.significance_procedure,
            "baselines": self.baselines,
            "pareto": self.pareto,
            "octagons": self.octagons,
            "discarded": list(self.discarded),
            "repetitions": list(self.repetitions),
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            config=obj["config"], dataset_audit=obj["dataset_audit"],
            results=tuple(RegimeResult(**r) for r in obj["results"]),
            baselines=obj["baselines"], pareto=obj["pareto"], octagons=obj["octagons"],
            repetitions=tuple(obj["repetitions"]), discarded=tuple(obj["discarded"]),
            significance_procedure=obj["significance_procedure"], version=obj["version"],
            schema_version=obj["schema_version"], extra=obj.get("extra", {}))

    def result(self, group, regime, model):
        for r in self.results:
            if (r.group, r.regime, r.model) == (group, regime, model):
                return r
        raise KeyError((group, regime, model))

    def scores(self, group, regime, model, key="spd"):
        """Per-repetition values of ``key`` for one grid cell, in repetition order."""
        return [s[key] for rep in self.repetitions for s in rep["scores"]
                if (s["group"], s["regime"], s["model"]) == (group, regime, model)]


# ---------------------------------------------------------------------------
# seeds and repetition engine


def repetition_seeds(master_seed: int, r: int):
    """(split, sample, model) seeds for repetition ``r``."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(r,))
    return tuple(int(s.generate_state(1)[0]) for s in ss.spawn(3))


def row_hash(d: Dataset) -> str:
    return hashlib.sha256(np.ascontiguousarray(d.row_ids, dtype=np.int64).tobytes()).hexdigest()


def _prepare(cfg: ExperimentConfig, d: Dataset):
    """Dataset and per-row 'had a masked cell' flags as seen by the protocol."""
    had_missing = d.row_has_missing()
    if cfg.protocol == COLUMNS:
        drop = [c.name for c in d.features if c.n_missing]
        if len(drop) == len(d.features):
            raise NoColumnsLeft("every feature column has a masked cell")
        d = drop_columns(d, drop)
    return d, had_missing


def _training_sets(cfg, d, had_missing, split_seed, sample_seed, imputed_full):
    """Return (train sets by regime, test set, discard reason or None)."""
    if cfg.protocol == IMPUTATION:
        base = imputed_full if cfg.imputation_mode == FULL_DATASET else d
        train, test = stratified_split(base, cfg.test_fraction, split_seed)
        if cfg.imputation_mode == TRAIN_ONLY:
            imp = fit_imputer(train, cfg.numeric_fill)
            train, _ = apply_imputer(imp, train)
            test, _ = apply_imputer(imp, test)
        complete = ~had_missing[train.row_ids]
        sets = {IMPUTED: train, DELETED: train.take(complete)}
        return {k: sets[k] for k in cfg.regimes}, test
    train, test = stratified_split(d, cfg.test_fraction, split_seed)
    flags = had_missing[train.row_ids]
    with_miss, without = train.take(flags), train.take(~flags)
    sets = {ALL_ROWS: train, WITH_MISS: with_miss, WITHOUT_MISS: without}
    if SAMPLE_WITHOUT_MISS in cfg.regimes:
        try:
            sets[SAMPLE_WITHOUT_MISS] = sample_rows(without, with_miss.n_rows, sample_seed)
        except SampleTooLarge as exc:
            raise RegimeEmpty(f"cannot draw the matched sample: {exc}") from exc
    return {k: sets[k] for k in cfg.regimes}, test


def _run_repetition(cfg, d, had_missing, imputed_full, r):
    split_seed, sample_seed, model_seed = repetition_seeds(cfg.master_seed, r)
    record = {"index": r, "seeds": [split_seed, sample_seed, model_seed], "discarded": None}
    try:
        sets, test = _training_sets(cfg, d, had_missing, split_seed, sample_seed, imputed_full)
        empty = [k for k, v in sets.items() if v.n_rows == 0]
        if empty:
            raise RegimeEmpty(f"regime(s) {empty} have no training rows")
        record["test_rows_sha256"] = row_hash(test)
        record["train_rows"] = {k: v.n_rows for k, v in sets.items()}
        test_spd = {g.describe(): spd(None, test, g) for g in cfg.groups}
        record["test_spd"] = test_spd
        scores = []
        for regime, train in sets.items():
            for spec in cfg.models:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", SingleClassTraining)
                    model = fit(train, spec, model_seed)
                pred = model.predict(test)
                acc = accuracy(pred, test)
                for g in cfg.groups:
                    scores.append({"group": g.describe(), "regime": regime, "model": spec.label,
                                   "accuracy": acc, "spd": spd(pred, test, g)})
        record["scores"] = scores
    except (RegimeEmpty, EmptyGroup) as exc:
        log.warning("repetition %d discarded: %s", r, exc)
        record.update(discarded=str(exc), scores=[])
    return record


def _mean_std(values):
    a = np.sort(np.asarray(values, dtype=float))  # sorted: order-independent reduction
    return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0


def run_experiment(cfg: ExperimentConfig, d: Dataset, threads: int = 1) -> ExperimentReport:
    """Run any protocol on an already loaded dataset."""
    for g in cfg.groups:
        g.check_groups(d)
    work, had_missing = _prepare(cfg, d)
    imputed_full = None
    if cfg.protocol == IMPUTATION and cfg.imputation_mode == FULL_DATASET:
        imputed_full, _ = apply_imputer(fit_imputer(work, cfg.numeric_fill), work)
    # row ids index the had_missing flags, so make them positional
    work = Dataset(work.columns, work.label, np.arange(work.n_rows))
    if imputed_full is not None:
        imputed_full = Dataset(imputed_full.columns, imputed_full.label, np.arange(work.n_rows))

    def one(r):
        return _run_repetition(cfg, work, had_missing, imputed_full, r)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, range(cfg.repetitions)))
    else:
        records = [one(r) for r in range(cfg.repetitions)]
    records.sort(key=lambda rec: rec["index"])

    discarded = tuple(rec["index"] for rec in records if rec["discarded"])
    if len(discarded) > MAX_DISCARD_FRACTION * cfg.repetitions:
        raise TooManyDiscarded(
            f"{len(discarded)} of {cfg.repetitions} repetitions were discarded")
    kept = [rec for rec in records if not rec["discarded"]]

    audit = {g.describe(): {k: (v.to_dict() if v else None) for k, v in subset_audit(d, g).items()}
             for g in cfg.groups}
    results = []
    for g in cfg.groups:
        gname = g.describe()
        stars = {}
        if cfg.protocol != IMPUTATION and {WITH_MISS, WITHOUT_MISS, SAMPLE_WITHOUT_MISS} <= set(cfg.regimes):
            for spec in cfg.models:
                samples = {reg: [s["spd"] for rec in kept for s in rec["scores"]
                                 if (s["group"], s["regime"], s["model"]) == (gname, reg, spec.label)]
                           for reg in (WITH_MISS, WITHOUT_MISS, SAMPLE_WITHOUT_MISS)}
                if len(kept) >= 2:
                    stars[spec.label] = significance_marks(samples)[WITH_MISS]
        for regime in cfg.regimes:
            for spec in cfg.models:
                cell = [s for rec in kept for s in rec["scores"]
                        if (s["group"], s["regime"], s["model"]) == (gname, regime, spec.label)]
                acc_m, acc_s = _mean_std([s["accuracy"] for s in cell])
                spd_m, spd_s = _mean_std([s["spd"] for s in cell])
                ref = audit[gname][AUDIT_COLUMN[regime]]
                ref_spd = ref["spd"] if ref else None
                amp = None if ref_spd is None else (
                    "amplified" if abs(spd_m) > abs(ref_spd) else "reduced")
                sig = stars.get(spec.label) if regime == WITH_MISS else None
                results.append(RegimeResult(gname, regime, spec.label, acc_m, acc_s, spd_m, spd_s,
                                            len(cell), ref_spd, amp, sig))

    baselines, pareto, octagons = {}, {}, {}
    for g in cfg.groups:
        gname = g.describe()
        st = dataset_stats(d, g)
        majority, perfect = baseline_points(st)
        baselines[gname] = [majority.to_dict(), perfect.to_dict()]
        octagons[gname] = octagon_vertices(st).to_dict()
        points = [TradeoffPoint(r.label, r.accuracy_mean, r.spd_mean)
                  for r in results if r.group == gname]
        pareto[gname] = [p.label for p in pareto_front(points)]

    return ExperimentReport(cfg.to_dict(), audit, tuple(results), baselines, pareto, octagons,
                            tuple(records), discarded)


def run_subset_experiment(cfg: ExperimentConfig, d: Dataset, threads: int = 1):
    if cfg.protocol != SUBSET:
        raise FairMissError("run_subset_experiment needs protocol='subset'")
    return run_experiment(cfg, d, threads)


def run_column_removal_experiment(cfg: ExperimentConfig, d: Dataset, threads: int = 1):
    if cfg.protocol != COLUMNS:
        raise FairMissError("run_column_removal_experiment needs protocol='columns'")
    return run_experiment(cfg, d, threads)


def run_imputation_vs_deletion(cfg: ExperimentConfig, d: Dataset, threads: int = 1):
    if cfg.protocol != IMPUTATION:
        raise FairMissError("run_imputation_vs_deletion needs protocol='imputation'")
    return run_experiment(cfg, d, threads)


# ---------------------------------------------------------------------------
# significance


def significance_marks(samples: dict, alpha: float = 0.05) -> dict:
    """Star the masked-row regime when it differs from both complete-row regimes.

    ``samples`` maps each of the three subset regimes to its per-repetition
    SPD values. All three pairwise Welch tests are Holm-adjusted together.
    Returns ``{regime: bool}``; only the masked-row regime can be starred.
    """
    names = (WITH_MISS, WITHOUT_MISS, SAMPLE_WITHOUT_MISS)
    for n in names:
        if len(samples.get(n, ())) < 2:
            raise InsufficientRepetitions(f"regime {n!r} needs at least 2 repetitions")
    pairs = [(WITH_MISS, WITHOUT_MISS), (WITH_MISS, SAMPLE_WITHOUT_MISS),
             (WITHOUT_MISS, SAMPLE_WITHOUT_MISS)]
    pvalues = []
    for a, b in pairs:
        xa, xb = np.asarray(samples[a], float), np.asarray(samples[b], float)
        if np.ptp(xa) == 0 and np.ptp(xb) == 0:
            pvalues.append(1.0 if xa[0] == xb[0] else 0.0)
            continue
        p = _stats.ttest_ind(xa, xb, equal_var=False).pvalue
        pvalues.append(1.0 if np.isnan(p) else float(p))
    reject = multipletests(pvalues, alpha=alpha, method="holm")[0]
    return {WITH_MISS: bool(reject[0] and reject[1]), WITHOUT_MISS: False,
            SAMPLE_WITHOUT_MISS: False}


# ---------------------------------------------------------------------------
# rendering


def _fmt(x, digits=4):
    return "n/a" if x is None else f"{x:.{digits}f}"


def _mark(amplification):
    return {"amplified": "▲", "reduced": "▽"}.get(amplification, "")


def render_audit_markdown(audits: dict) -> str:
    """Three-column SPD audit per case; the SPD closest to zero is bold.

    ``audits`` maps a case name to ``{subset: FairnessReport | dict | None}``.
    """
    lines = ["| case | SPD (all) | SPD (with ⊙) | SPD (w/o ⊙) | DI (all) | p+ priv | p+ unpriv |",
             "|---|---|---|---|---|---|---|"]
    for name, sub in audits.items():
        sub = {k: (v.to_dict() if hasattr(v, "to_dict") else v) for k, v in sub.items()}
        vals = {k: (v["spd"] if v else None) for k, v in sub.items()}
        defined = [abs(v) for v in vals.values() if v is not None]
        best = min(defined) if defined else None
        cells = []
        for k in ("all", "with_miss", "without_miss"):
            text = _fmt(vals[k])
            if vals[k] is not None and abs(vals[k]) == best:
                text = f"**{text}**"
            cells.append(text)
        a = sub["all"]
        rates = a["group_positive_rates"]
        lines.append(f"| {name} | " + " | ".join(cells) +
                     f" | {_fmt(a['di'])} | {_fmt(rates['privileged'])} | {_fmt(rates['unprivileged'])} |")
    return "\n".join(lines) + "\n"


def _experiment_markdown(r: ExperimentReport) -> str:
    cfg = r.config
    regimes = cfg["regimes"]
    models = [m.get("name") or ModelSpec.parse(m).label for m in cfg["models"]]
    out = [f"# {cfg['protocol']} experiment on {cfg['dataset']}", "",
           f"{len(r.repetitions) - len(r.discarded)} repetitions kept of {cfg['repetitions']}; "
           f"test fraction {cfg['test_fraction']}; master seed {cfg['master_seed']}"]
    if cfg["protocol"] == IMPUTATION:
        out.append(f"imputation mode: {cfg['imputation_mode']}")
    out += ["", "▲ amplified / ▽ reduced relative to the matching dataset-level SPD; "
            f"bold = fairest regime; * = {r.significance_procedure}.", ""]
    for model in models:
        out.append(f"## {model}")
        out.append("")
        head = "| group | " + " | ".join(
            f"Acc ({REGIME_TITLES[g]}) | SPD ({REGIME_TITLES[g]})" for g in regimes) + " |"
        out += [head, "|---|" + "---|---|" * len(regimes)]
        for gname in r.dataset_audit:
            cells = [r.result(gname, g, model) for g in regimes]
            best = min(abs(c.spd_mean) for c in cells)
            row = []
            for c in cells:
                s = f"{_mark(c.amplification)}{c.spd_mean:.4f} ± {c.spd_std:.4f}"
                if c.significant:
                    s += "*"
                if abs(c.spd_mean) == best:
                    s = f"**{s}**"
                row.append(f"{c.accuracy_mean:.4f} ± {c.accuracy_std:.4f} | {s}")
            out.append(f"| {gname} | " + " | ".join(row) + " |")
        out.append("")
    out += ["## Dataset audit", "", render_audit_markdown(r.dataset_audit)]
    out += ["## Pareto front (accuracy up, |SPD| down)", ""]
    for gname, labels in r.pareto.items():
        out.append(f"- {gname}: " + ", ".join(labels))
    return "\n".join(out) + "\n"


CSV_FIELDS = ("group", "regime", "model", "accuracy_mean", "accuracy_std", "spd_mean", "spd_std",
              "n_repetitions", "reference_spd", "amplification", "significant")


def _csv(rows, fields):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row[k] is None else (repr(row[k]) if isinstance(row[k], float) else row[k]))
                    for k in fields})
    return buf.getvalue()


def points_csv(r: ExperimentReport) -> str:
    """Repetition-level (model, regime, accuracy, spd) points for plotting."""
    rows = [dict(s, repetition=rec["index"]) for rec in r.repetitions for s in rec["scores"]]
    return _csv(rows, ("repetition", "group", "model", "regime", "accuracy", "spd"))


def octagon_csv(r: ExperimentReport) -> str:
    rows = [{"group": g, "vertex": i, "accuracy": v["accuracy"], "spd": v["spd"]}
            for g, o in r.octagons.items() for i, v in enumerate(o["vertices"])]
    return _csv(rows, ("group", "vertex", "accuracy", "spd"))


def to_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def emit_report(r: ExperimentReport, format: str = "json") -> bytes:
    """Serialize a report as ``markdown``, ``csv`` (the result grid) or ``json``."""
    if format == "json":
        return to_json(r.to_dict()).encode("utf-8")
    if format == "csv":
        return _csv([x.to_dict() for x in r.results], CSV_FIELDS).encode("utf-8")
    if format == "markdown":
        return _experiment_markdown(r).encode("utf-8")
    raise FairMissError(f"unknown report format {format!r}")


def load_report(data) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(data))
