"""Classify links, inject single-link failures and see which demands die.

Run: python walkthroughs/02_failures.py
"""

from ponfabric import (
    FailureKind,
    apply_failure,
    build_pon3,
    build_two_tier,
    down_analysis,
    enumerate_single_failures,
)
from ponfabric.experiment import ExperimentSpec, generate_demands, map_demands

pon3 = build_pon3(4)
two_tier = build_two_tier(4)
demands = generate_demands(ExperimentSpec())

for kind in FailureKind:
    print(f"{kind.value}: {len(enumerate_single_failures(pon3, kind))} links in PON 3, "
          f"{len(enumerate_single_failures(two_tier, kind))} in the two-tier fabric")

# A coupler uplink failure in PON 3 isolates the whole rack.
s = enumerate_single_failures(pon3, "F2")[0]
r = down_analysis(pon3, s, demands)
print(f"\nPON 3 {sorted(s.failed_links)}: {len(r.dead_demands)} dead demands, "
      f"down servers {sorted(r.down_servers)}")

# The same class of failure in the two-tier fabric leaves every demand alive.
mapped = map_demands(demands, two_tier)
s = enumerate_single_failures(two_tier, "F2")[0]
r = down_analysis(two_tier, s, mapped)
print(f"two-tier {sorted(s.failed_links)}: survivable={r.survivable}")

failed = apply_failure(pon3, s := enumerate_single_failures(pon3, "F3")[0])
print(f"\nafter failing {sorted(s.failed_links)} PON 3 keeps {len(failed.links)} live links "
      f"of {len(pon3.links)}")
