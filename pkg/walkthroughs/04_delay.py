"""Queuing delay: the per-device M/M/1 figures and the two accounting models.

Run: python walkthroughs/04_delay.py
"""

from ponfabric import FailureScenario, apply_failure, build_pon3, formulate, mm1_delay, solve
from ponfabric.experiment import ExperimentSpec, generate_demands
from ponfabric.metrics import solution_delay

for load in (0.2, 0.4, 0.6, 0.8):
    print(f"server at {load:.1f} Gbps: {mm1_delay(load, 1.0):6.2f} us")
print(f"OLT at 0.2 Gbps: {mm1_delay(0.2, 8600.0):.8f} us")

pon3 = build_pon3(4)
demands = generate_demands(ExperimentSpec())
nf_sol = solve(formulate(pon3, demands))
f3 = apply_failure(pon3, FailureScenario(frozenset(["awgr-1>awgr-2"]), "F3"))
f3_sol = solve(formulate(f3, demands))

# "endpoints" queues at the servers and OLTs only; "per-link" charges every
# link on the chosen path, so rerouting over longer paths shows up directly.
for model in ("endpoints", "per-link"):
    a = solution_delay(nf_sol, model=model, capacities=pon3.capacities()).mean_us
    b = solution_delay(f3_sol, model=model, capacities=f3.capacities()).mean_us
    print(f"{model:>9}: NF {a:.4f} us, F3 {b:.4f} us ({100 * (b - a) / a:+.3f}%)")
