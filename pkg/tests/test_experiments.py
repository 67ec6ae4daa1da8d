import json

import numpy as np
import pytest

from fairmiss.dataset import Dataset, GroupSpec, sample_rows, stratified_split
from fairmiss.errors import FairMissError, InsufficientRepetitions, NoColumnsLeft, TooManyDiscarded
from fairmiss.experiments import (ALL_ROWS, DELETED, IMPUTED, SAMPLE_WITHOUT_MISS, WITH_MISS,
                                  WITHOUT_MISS, ExperimentConfig, _prepare, emit_report,
                                  load_report, octagon_csv, points_csv, repetition_seeds,
                                  run_column_removal_experiment, run_experiment,
                                  run_imputation_vs_deletion, run_subset_experiment,
                                  significance_marks)
from fairmiss.metrics import accuracy, spd
from fairmiss.models import fit

G = GroupSpec("grp", {"a"}, "1")


def planted(n=40, seed=0, masked_col_only=False):
    """Group a is favoured: 75% positives against 35% for group b; ``m`` has masks."""
    rng = np.random.default_rng(seed)
    grp = np.array(["a", "b"] * (n // 2))
    y = np.where(grp == "a", rng.random(n) < 0.75, rng.random(n) < 0.35).astype(int)
    x = y + rng.normal(0, 0.7, n)
    m = rng.normal(size=n) + y
    m_cells = [None if i % 4 == 0 else float(v) for i, v in enumerate(m)]
    x_cells = [float(v) for v in x] if masked_col_only else \
        [None if i % 7 == 3 else float(v) for i, v in enumerate(x)]
    return Dataset.from_dict({"grp": grp.tolist(), "x": x_cells, "m": m_cells,
                              "y": [str(v) for v in y]}, label="y")


def cfg(**kw):
    base = dict(dataset="planted", groups=(G,), models=({"kind": "cart", "params":
                                                         {"min_split": 4}},),
                repetitions=3, master_seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


def test_single_repetition_has_zero_spread():
    r = run_subset_experiment(cfg(repetitions=1), planted())
    assert all(x.accuracy_std == 0 and x.spd_std == 0 for x in r.results)
    assert all(x.significant is None for x in r.results)


def test_single_repetition_matches_a_hand_run():
    d = planted()
    r = run_subset_experiment(cfg(repetitions=1), d)
    split_seed, sample_seed, model_seed = repetition_seeds(11, 0)
    train, test = stratified_split(d, 0.3, split_seed)
    flags = train.row_has_missing()
    sets = {ALL_ROWS: train, WITH_MISS: train.take(flags), WITHOUT_MISS: train.take(~flags)}
    sets[SAMPLE_WITHOUT_MISS] = sample_rows(sets[WITHOUT_MISS], int(flags.sum()), sample_seed)
    spec = {"kind": "cart", "params": {"min_split": 4}}
    for regime, part in sets.items():
        pred = fit(part, spec, model_seed).predict(test)
        res = r.result(G.describe(), regime, "CART")
        assert res.accuracy_mean == accuracy(pred, test)
        assert res.spd_mean == spd(pred, test, G)
    assert r.repetitions[0]["test_spd"][G.describe()] == spd(None, test, G)


def test_amplification_marks_compare_with_dataset_audit():
    r = run_subset_experiment(cfg(), planted())
    for x in r.results:
        audit_key = {ALL_ROWS: "all", WITH_MISS: "with_miss"}.get(x.regime, "without_miss")
        ref = r.dataset_audit[G.describe()][audit_key]["spd"]
        assert x.reference_spd == ref
        assert x.amplification == ("amplified" if abs(x.spd_mean) > abs(ref) else "reduced")


def test_report_grid_is_complete_and_traceable():
    c = cfg(models=("cart", "majority"), regimes=(ALL_ROWS, WITHOUT_MISS))
    r = run_subset_experiment(c, planted())
    assert {(x.regime, x.model) for x in r.results} == {
        (g, m) for g in (ALL_ROWS, WITHOUT_MISS) for m in ("CART", "Majority")}
    assert r.config == c.to_dict()
    assert len(r.scores(G.describe(), ALL_ROWS, "CART")) == 3


def test_threads_do_not_change_the_report():
    c = cfg(repetitions=6)
    one = emit_report(run_experiment(c, planted(), threads=1))
    three = emit_report(run_experiment(c, planted(), threads=3))
    assert one == three


def test_json_round_trip_and_other_formats():
    r = run_subset_experiment(cfg(), planted())
    data = emit_report(r, "json")
    back = load_report(data)
    assert emit_report(back, "json") == data
    md = emit_report(r, "markdown").decode()
    assert "## CART" in md and "**" in md
    csv_text = emit_report(r, "csv").decode()
    assert csv_text.splitlines()[0].startswith("group,regime,model")
    assert len(points_csv(r).splitlines()) == 1 + 3 * 4
    assert len(octagon_csv(r).splitlines()) == 1 + 8
    with pytest.raises(FairMissError):
        emit_report(r, "xml")


def test_config_round_trip_and_validation():
    c = cfg(protocol="imputation", models=("logistic",))
    assert [m.kind for m in c.models] == ["logistic", "majority", "perfect"]
    assert c.regimes == (IMPUTED, DELETED)
    assert ExperimentConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c
    single = dict(c.to_dict())
    single["group"] = single.pop("groups")[0]
    assert ExperimentConfig.from_dict(single).groups == (G,)
    for bad in ({"protocol": "nope"}, {"repetitions": 0}, {"regimes": ()},
                {"regimes": (IMPUTED,)}, {"test_fraction": 1.0}):
        with pytest.raises(FairMissError):
            cfg(**bad)
    with pytest.raises(FairMissError):
        ExperimentConfig.from_dict({"dataset": "x", "groups": [G.to_dict()], "colour": 1})


def test_column_removal_never_uses_masked_column():
    d = planted(masked_col_only=True)
    c = cfg(protocol="columns")
    work, had = _prepare(c, d)
    assert "m" not in work.names and had.sum() == 10
    assert "m" not in fit(work, {"kind": "cart", "params": {"min_split": 4}}).referenced_columns()
    r = run_column_removal_experiment(c, d)
    assert len(r.results) == 4


def test_column_removal_on_complete_data_matches_subset():
    d = Dataset.from_dict({"grp": ["a", "b"] * 20, "x": list(np.linspace(0, 1, 40)),
                           "y": ["1", "0", "0", "1"] * 10}, label="y")
    a = run_subset_experiment(cfg(regimes=(ALL_ROWS,)), d)
    b = run_column_removal_experiment(cfg(regimes=(ALL_ROWS,), protocol="columns"), d)
    assert a.results == b.results


def test_no_columns_left():
    # a fully observed protected attribute always survives, so exercise the dropping step alone
    d = Dataset.from_dict({"w": ["a", "b", None, "a"] * 5, "x": [1.0, None, 2.0, 3.0] * 5,
                           "y": ["1", "0"] * 10}, label="y")
    with pytest.raises(NoColumnsLeft):
        _prepare(cfg(protocol="columns"), d)


def test_too_many_discarded_repetitions():
    d = planted()
    cells = d["m"].cells()
    only_one = [v if v is not None else 0.0 for v in cells]
    only_one[0] = None
    x = [v if v is not None else 0.0 for v in d["x"].cells()]
    d1 = Dataset.from_dict({"grp": d["grp"].cells(), "x": x, "m": only_one, "y": d["y"].cells()},
                           label="y")
    with pytest.raises(TooManyDiscarded):
        run_subset_experiment(cfg(repetitions=30), d1)


def test_imputation_baselines_are_exact_every_repetition():
    d = planted(80, seed=4)
    r = run_imputation_vs_deletion(cfg(protocol="imputation", models=("naive_bayes",),
                                       repetitions=4), d)
    for rec in r.repetitions:
        test_spd = rec["test_spd"][G.describe()]
        for s in rec["scores"]:
            if s["model"] == "Perfect":
                assert (s["accuracy"], s["spd"]) == (1.0, test_spd)
            if s["model"] == "Majority":
                assert s["spd"] == 0.0
    assert r.result(G.describe(), DELETED, "NaiveBayes").n_repetitions == 4


def test_train_only_imputation_mode_runs():
    r = run_imputation_vs_deletion(cfg(protocol="imputation", models=("logistic",),
                                       imputation_mode="train_only"), planted(80))
    assert r.config["imputation_mode"] == "train_only"


def test_protocol_wrappers_check_the_protocol():
    with pytest.raises(FairMissError):
        run_imputation_vs_deletion(cfg(), planted())


def test_significance_marks():
    same = [0.1, 0.2, 0.3, 0.4]
    samples = {WITH_MISS: same, WITHOUT_MISS: same, SAMPLE_WITHOUT_MISS: same}
    assert significance_marks(samples)[WITH_MISS] is False
    rng = np.random.default_rng(0)
    base = rng.normal(0, 0.01, 30)
    shifted = {WITH_MISS: base + 0.1, WITHOUT_MISS: rng.normal(0, 0.01, 30),
               SAMPLE_WITHOUT_MISS: rng.normal(0, 0.01, 30)}
    assert significance_marks(shifted)[WITH_MISS] is True
    two = {k: v[:2] for k, v in shifted.items()}
    assert significance_marks(two)[WITH_MISS] in (True, False)
    with pytest.raises(InsufficientRepetitions):
        significance_marks({k: v[:1] for k, v in shifted.items()})


def test_constant_but_different_samples_are_starred():
    s = {WITH_MISS: [0.5, 0.5], WITHOUT_MISS: [0.1, 0.1], SAMPLE_WITHOUT_MISS: [0.2, 0.2]}
    assert significance_marks(s)[WITH_MISS] is True
