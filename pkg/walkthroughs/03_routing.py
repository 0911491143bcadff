"""Energy-minimizing routing: NF versus an inter-AWGR failure in PON 3.

Run: python walkthroughs/03_routing.py
"""

from ponfabric import FailureScenario, apply_failure, brute_force, build_pon3, formulate, solve, verify
from ponfabric.experiment import ExperimentSpec, generate_demands
from ponfabric.metrics import DEFAULT_PARAMS
from ponfabric.optimizer import Demand

pon3 = build_pon3(4)
demands = generate_demands(ExperimentSpec())

nf = solve(formulate(pon3, demands))
print(f"NF: {nf.status}, {nf.objective_value:.3f} W, active OLTs {sorted(nf.active_olts)}")

# With the direct AWGR-to-AWGR link gone, crossing traffic must be relayed by
# the OLT, which pays its idle power plus a share proportional to the load.
f3 = apply_failure(pon3, FailureScenario(frozenset(["awgr-1>awgr-2"]), "F3"))
problem = formulate(f3, demands)
sol = solve(problem)
delta = sol.objective_value - nf.objective_value
predicted = DEFAULT_PARAMS.olt_idle_w + DEFAULT_PARAMS.olt_slope_w_per_gbps * sol.olt_traffic
print(f"F3: {sol.objective_value:.3f} W (+{delta:.3f} W, predicted {predicted:.3f} W), "
      f"OLT forwards {sol.olt_traffic:.3f} Gbps")
print("verification:", verify(problem, sol) or "clean")

# Splittable routing may divide a demand across its passive and OLT paths.
heavy = [Demand("a", "srv-r0-s0", "srv-r2-s0", 9.0), Demand("b", "srv-r1-s0", "srv-r3-s0", 9.0)]
split = solve(formulate(pon3, heavy, "splittable"))
for did, routes in split.routes.items():
    print(did, [(("OLT" if p.olt_relay else "passive"), round(v, 3)) for p, v in routes])

# Small instances can be cross-checked by exhaustive enumeration.
small = formulate(f3, demands[:6])
print("branch-and-bound equals brute force:",
      solve(small).chosen() == brute_force(small).chosen())
