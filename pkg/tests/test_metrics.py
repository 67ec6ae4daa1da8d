import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairmiss.dataset import Dataset, GroupSpec
from fairmiss.errors import EmptyGroup, LengthMismatch, UndefinedRate, UndefinedRatio
from fairmiss.metrics import (PRIVILEGED, UNPRIVILEGED, Predictions, accuracy,
                              average_odds_difference, disparate_impact,
                              equal_opportunity_difference, fairness_report, group_confusion,
                              group_positive_rates, positive_rate, spd, subset_audit)

from conftest import GROUP, make_binary


def test_positive_rate_six_row_fixture():
    d = make_binary([1, 1, 0], [0, 1, 0])
    assert positive_rate(None, d, GROUP, PRIVILEGED) == pytest.approx(2 / 3)
    assert positive_rate(None, d, GROUP, UNPRIVILEGED) == pytest.approx(1 / 3)


def test_all_positive_labels_rate_one():
    d = make_binary([1, 1], [1, 1, 1])
    assert group_positive_rates(None, d, GROUP) == (1.0, 1.0)
    assert spd(None, d, GROUP) == 0.0


def test_disparate_impact_fixture():
    d = make_binary([1, 1, 1, 1, 0], [1, 1, 0, 0, 0])
    assert disparate_impact(None, d, GROUP) == pytest.approx(0.5)
    assert spd(None, d, GROUP) == pytest.approx(0.4)
    equal = make_binary([1, 0], [0, 1])
    assert disparate_impact(None, equal, GROUP) == 1.0
    with pytest.raises(UndefinedRatio):
        disparate_impact(None, make_binary([0, 0], [1, 0]), GROUP)


def test_equal_opportunity_fixture():
    # privileged TPR 2/2, unprivileged TPR 1/2
    truth = make_binary([1, 1, 0], [1, 1, 0])
    pred = ["1", "1", "0", "1", "0", "0"]
    assert equal_opportunity_difference(pred, truth, GROUP) == pytest.approx(0.5)
    assert equal_opportunity_difference(None, truth, GROUP) == 0.0
    with pytest.raises(UndefinedRate):
        equal_opportunity_difference(["0"] * 4, make_binary([0, 0], [1, 0]), GROUP)


def test_average_odds_fixture():
    # privileged: TPR 5/5, FPR 2/5; unprivileged: TPR 3/5, FPR 1/5 -> 0.5 * (0.2 + 0.4)
    truth = make_binary([1] * 5 + [0] * 5, [1] * 5 + [0] * 5)
    pred = (["1"] * 5 + ["1", "1", "0", "0", "0"] + ["1", "1", "1", "0", "0"] + ["1", "0", "0", "0", "0"])
    assert average_odds_difference(pred, truth, GROUP) == pytest.approx(0.3)
    assert average_odds_difference(None, truth, GROUP) == 0.0
    assert average_odds_difference(["1"] * 20, truth, GROUP) == 0.0


def test_group_confusion_eight_rows():
    truth = make_binary([1, 1, 0, 0], [1, 0, 0, 1])
    pred = ["1", "0", "1", "0", "1", "1", "0", "0"]
    conf = group_confusion(pred, truth, GROUP)
    assert conf.privileged == {"tp": 1, "fp": 1, "tn": 1, "fn": 1}
    assert conf.unprivileged == {"tp": 1, "fp": 1, "tn": 1, "fn": 1}
    perfect = group_confusion(None, truth, GROUP)
    assert perfect.privileged["fp"] == perfect.privileged["fn"] == 0
    const = group_confusion(["1"] * 8, truth, GROUP)
    assert const.unprivileged["tn"] == const.unprivileged["fn"] == 0


def test_accuracy_cases():
    d = make_binary([1, 0], [1, 0])
    assert accuracy(None, d) == 1.0
    assert accuracy(["0", "1", "0", "1"], d) == 0.0
    with pytest.raises(LengthMismatch):
        accuracy(["1"], d)


def test_multiclass_collapses_to_favourable_vs_rest():
    d = Dataset.from_dict({"grp": list("aaabbb"), "y": ["hi", "mid", "lo", "mid", "lo", "lo"]},
                          label="y")
    g = GroupSpec("grp", {"a"}, "hi")
    assert spd(None, d, g) == pytest.approx(1 / 3)
    assert spd(None, d, g.with_favourable("lo")) == pytest.approx(1 / 3 - 2 / 3)


def test_fairness_report_marks_undefined():
    d = make_binary([0, 0], [1, 0])
    r = fairness_report(d, GROUP)
    assert r.di is None and r.eod is None and r.accuracy is None
    r2 = fairness_report(d, GROUP, Predictions(["0", "0", "1", "0"]))
    assert r2.accuracy == 1.0 and r2.eod is None  # privileged group has no positives
    assert r2.to_dict()["group_positive_rates"] == {"privileged": 0.0, "unprivileged": 0.5}


def test_empty_group_raises():
    d = make_binary([1, 0], [])
    with pytest.raises(EmptyGroup):
        spd(None, d, GROUP)


# property tests -----------------------------------------------------------

fixtures = st.tuples(
    st.lists(st.booleans(), min_size=1, max_size=30),
    st.lists(st.booleans(), min_size=1, max_size=30),
    st.lists(st.booleans(), min_size=60, max_size=60),
)


def _fixture(priv, unpriv):
    return make_binary([int(v) for v in priv], [int(v) for v in unpriv])


@settings(max_examples=200, deadline=None)
@given(fixtures)
def test_spd_antisymmetry(data):
    priv, unpriv, pred_bits = data
    d = _fixture(priv, unpriv)
    base = spd(None, d, GROUP)
    assert spd(None, d, GROUP.with_favourable("0")) == -base
    assert spd(None, d, GROUP.swap_groups(d)) == -base
    pred = np.where(np.array(pred_bits[: d.n_rows]), "1", "0")
    p = spd(pred, d, GROUP)
    assert spd(pred, d, GROUP.with_favourable("0")) == -p
    assert spd(["1"] * d.n_rows, d, GROUP) == 0.0
    assert spd(["0"] * d.n_rows, d, GROUP) == 0.0
    assert spd(Predictions(d.labels), d, GROUP) == base


@settings(max_examples=100, deadline=None)
@given(fixtures)
def test_spd_decomposes_over_missingness_partition(data):
    priv, unpriv, miss_bits = data
    d = _fixture(priv, unpriv)
    x = [None if b else 1.0 for b in miss_bits[: d.n_rows]]
    d = Dataset.from_dict({"grp": d["grp"].cells(), "x": x, "y": list(d.labels)},
                          kinds={"x": "numeric"}, label="y")
    has = d.row_has_missing()
    priv_mask = GROUP.privileged_mask(d)
    fav = d.labels == "1"
    # recombine group rates from the two parts' tallies
    rates = []
    for grp in (priv_mask, ~priv_mask):
        pos = sum(int(np.sum(fav & grp & part)) for part in (has, ~has))
        size = sum(int(np.sum(grp & part)) for part in (has, ~has))
        rates.append(pos / size)
    assert spd(None, d, GROUP) == pytest.approx(rates[0] - rates[1], abs=1e-15)


def test_subset_audit_handles_empty_subsets():
    d = Dataset.from_dict({"grp": list("aabb"), "x": [1.0, None, 2.0, 3.0], "y": list("1010")},
                          label="y")
    audit = subset_audit(d, GROUP)
    assert audit["with_miss"] is None  # only a privileged row has a masked cell
    assert audit["all"].spd == 0.0 and audit["without_miss"].spd == pytest.approx(0.5)


def test_bundled_audit_examples():
    from fairmiss.cases import load_builtin

    titanic = load_builtin("titanic")
    sex = GroupSpec("sex", {"female"}, "1")
    assert positive_rate(None, titanic, sex) > 0.7
    assert spd(None, titanic, sex) == pytest.approx(0.5365, abs=0.005)
    adult = load_builtin("adult")
    assert spd(None, adult, GroupSpec("race", {"White"}, ">50K")) == pytest.approx(0.1014, abs=0.005)
    assert accuracy(["<=50K"] * adult.n_rows, adult) == pytest.approx(0.76, abs=0.005)
