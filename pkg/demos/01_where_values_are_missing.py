"""
Where values are missing, and who they belong to
================================================

Walk through the three bundled datasets: how many cells are masked, which
columns go missing together, whether missingness lines up with the
protected group or the favourable class, and whether the MCAR hypothesis
survives Little's test.

Run with ``python demos/01_where_values_are_missing.py``.
"""

# %%
# Per-column missing fractions and joint patterns.
from fairmiss.cases import CASES, load_builtin
from fairmiss.missingness import (little_mcar_test, missing_fraction_per_column,
                                  missingness_correlations, pattern_table)

adult = load_builtin("adult")
fractions = missing_fraction_per_column(adult)
print("Adult columns with masked cells:")
for name, f in fractions.items():
    if f:
        print(f"  {name:16s} {100 * f:5.2f}%")

table = pattern_table(adult)
print("\nMissingness patterns over", ", ".join(table.columns))
for pattern, count, share in table.rows:
    missing = [c for c, b in zip(table.columns, pattern) if b] or ["(complete)"]
    print(f"  {' + '.join(missing):40s} {count:6d}  {100 * share:5.2f}%")

# %%
# Correlate each missingness indicator with privileged membership and with
# the favourable class. Values near zero mean the masks are spread evenly.
for case in CASES[:2]:
    m = missingness_correlations(adult, case.group)
    k = len(m.labels) - 2
    print(f"\n{case.name}: correlation of each mask with group / class")
    for i in range(k):
        print(f"  {m.labels[i]:28s} {m.values[i, k]:+.4f} {m.values[i, k + 1]:+.4f}")

# %%
# Little's test compares per-pattern means against an EM fit of a
# multivariate normal. Tiny p-values say the masks are not completely random.
for name in ("adult", "compas", "titanic"):
    r = little_mcar_test(load_builtin(name))
    print(f"\n{name:8s} d2={r.statistic:10.1f} dof={r.dof:3d} p={r.p_value:.2e} "
          f"({r.n_patterns} patterns, EM {r.em_iterations} iterations)")
