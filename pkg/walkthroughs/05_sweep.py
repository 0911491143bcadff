"""Full failure sweep over both fabrics, written out as CSV reports.

Run: python walkthroughs/05_sweep.py [OUT_DIR]
The command-line equivalent is ``ponfabric sweep --out OUT_DIR``.
"""

import sys

from ponfabric.experiment import ExperimentSpec, emit_report, run_sweep, summarize

out = sys.argv[1] if len(sys.argv) > 1 else "results"
spec = ExperimentSpec()
reports = run_sweep(spec)
print(emit_report(reports, fmt="table"))

for row in summarize(reports):
    if row["system_down"]:
        print(f"{row['label']}: {row['system_down']}/{row['scenarios']} scenarios lose a demand")

for path in emit_report(reports, out, "csv", spec):
    print("wrote", path)
