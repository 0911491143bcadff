"""Build both fabrics and look at their devices and candidate paths.

Run: python walkthroughs/01_topologies.py
"""

from ponfabric import build_pon3, build_two_tier, candidate_paths, save_topology
from ponfabric.topology import DeviceKind


def describe(t):
    counts = ", ".join(f"{t.count(k)} {k.value}" for k in DeviceKind)
    print(f"{t.architecture}: {counts}, {len(t.links)} links")


pon3 = build_pon3(4)
two_tier = build_two_tier(4)
describe(pon3)
describe(two_tier)

# In PON 3 a rack on one AWGR reaching a rack on the other has exactly one
# passive route plus one route relayed through the OLT.
for p in candidate_paths(pon3, "srv-r0-s0", "srv-r3-s0"):
    print("pon3 ", "OLT" if p.olt_relay else "   ", " -> ".join(p.nodes))

# The two-tier fabric has many passive alternatives for the same pair.
paths = candidate_paths(two_tier, "srv-c0-r0-s0", "srv-c3-r0-s0", max_paths=1000)
passive = [p for p in paths if not p.olt_relay]
print(f"two-tier: {len(passive)} passive paths, {len(paths) - len(passive)} via an OLT")
print("shortest:", " -> ".join(passive[0].nodes))

# Topologies serialize to plain JSON documents.
doc = save_topology(pon3)
print("document keys:", sorted(doc))
