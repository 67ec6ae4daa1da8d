"""
The space of achievable (accuracy, SPD) pairs
=============================================

Any labelling of a dataset lands somewhere in the (accuracy, SPD) plane.
For two groups and a binary label those points fill an octagon whose eight
corners depend only on four counts. This demo builds the octagon for a
small made-up dataset, checks it against every one of the 2^n labellings,
and then places trained models and baselines in the same plane.
"""

# %%
import numpy as np

from fairmiss.dataset import Dataset, GroupSpec
from fairmiss.octagon import (TradeoffPoint, brute_force_hull, contains, dataset_stats,
                              octagon_vertices, pareto_front)

g = GroupSpec("grp", {"a"}, "1")
d = Dataset.from_dict({
    "grp": ["a"] * 4 + ["b"] * 6,
    "y": ["1", "1", "1", "0", "1", "1", "0", "0", "1", "0"],
}, label="y")

stats = dataset_stats(d, g)
octagon = octagon_vertices(stats)
print("counts:", stats)
for acc, spd in octagon.vertices:
    print(f"  vertex  accuracy {acc:.3f}  SPD {spd:+.3f}")

points = brute_force_hull(d, g)
inside = sum(contains(octagon, p, 1e-9) for p in points)
print(f"{inside} of {len(points)} distinct labelling outcomes lie inside the octagon")

# %%
# Train a few learners on Titanic and keep the ones nobody beats on both
# accuracy and |SPD|.
from fairmiss.cases import load_builtin
from fairmiss.dataset import stratified_split
from fairmiss.handling import impute
from fairmiss.metrics import accuracy, spd
from fairmiss.models import fit

titanic, _ = impute(load_builtin("titanic"))
sex = GroupSpec("sex", {"female"}, "1")
train, test = stratified_split(titanic, 0.3, seed=3)
scored = []
for kind in ("majority", "perfect", "cart", "logistic", "naive_bayes", "forest"):
    pred = fit(train, kind, seed=3).predict(test)
    scored.append(TradeoffPoint(kind, accuracy(pred, test), spd(pred, test, sex)))
    print(f"  {kind:12s} accuracy {scored[-1].accuracy:.4f}  SPD {scored[-1].spd:+.4f}")
print("Pareto front:", [p.label for p in pareto_front(scored)])

test_octagon = octagon_vertices(dataset_stats(test, sex))
print("all inside the test-set octagon:", all(contains(test_octagon, p) for p in scored))
