"""
Statistical parity on rows with and without masked cells
========================================================

Split each dataset into the rows holding at least one masked cell and the
complete rows, then measure the statistical parity difference (SPD) of the
true labels on each part. The markdown table bolds the SPD closest to zero.
"""

# %%
from fairmiss.cases import CASES, load_builtin
from fairmiss.experiments import render_audit_markdown
from fairmiss.metrics import subset_audit

audits = {}
for case in CASES:
    d = load_builtin(case.dataset)
    audits[case.name] = subset_audit(d, case.group)

print(render_audit_markdown(audits))

# %%
# The same SPD decomposes into two group rates. Here is the largest gap.
report = audits["titanic/sex"]["all"]
privileged, unprivileged = report.group_positive_rates
print(f"titanic/sex: {privileged:.4f} - {unprivileged:.4f} "
      f"= {report.spd:.4f}, DI = {report.di:.4f}")
