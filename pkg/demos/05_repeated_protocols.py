"""
Repeated train/test protocols
=============================

The experiment engine repeats a stratified split many times. Each
repetition trains on several subsets of the training side and scores
accuracy and SPD on the whole test side. This demo runs a short version of
two protocols on Titanic and prints the markdown reports. The same runs are
available from the command line, for example::

    fairmiss experiment demos/configs/titanic_subset.json --repetitions 10
"""

# %%
from fairmiss.cases import load_builtin, groups_for
from fairmiss.experiments import ExperimentConfig, emit_report, run_experiment

titanic = load_builtin("titanic")
subset = ExperimentConfig(dataset="titanic", groups=tuple(groups_for("titanic")),
                          protocol="subset", models=("cart",), repetitions=10)
print(emit_report(run_experiment(subset, titanic), "markdown").decode())

# %%
imputation = ExperimentConfig(dataset="titanic", groups=tuple(groups_for("titanic")),
                              protocol="imputation", models=("cart", "logistic"),
                              repetitions=5)
report = run_experiment(imputation, titanic)
for r in report.results:
    print(f"{r.group:28s} {r.label:26s} acc {r.accuracy_mean:.4f}  SPD {r.spd_mean:+.4f}")
