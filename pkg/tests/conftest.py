import networkx as nx
import pytest

from ponfabric.experiment import ExperimentSpec, generate_demands, map_demands
from ponfabric.topology import DeviceKind, build_pon3, build_two_tier


@pytest.fixture(scope="session")
def pon3():
    return build_pon3(4)


@pytest.fixture(scope="session")
def two_tier():
    return build_two_tier(4)


@pytest.fixture(scope="session")
def default_demands():
    return generate_demands(ExperimentSpec())


@pytest.fixture(scope="session")
def two_tier_demands(default_demands, two_tier):
    return map_demands(default_demands, two_tier)


def relay_graph(t, src, dst):
    """Directed graph of live links with every server except src/dst removed."""
    g = nx.DiGraph()
    g.add_nodes_from(n.id for n in t.nodes)
    for l in t.links:
        g.add_edge(l.src, l.dst)
    g.remove_nodes_from([n.id for n in t.nodes
                         if n.kind is DeviceKind.SERVER and n.id not in (src, dst)])
    return g


def reachable(t, src, dst):
    """Independent reachability oracle (networkx graph search)."""
    return nx.has_path(relay_graph(t, src, dst), src, dst)


def random_problem(rng, max_demands=8, max_paths=4, mode="single-path"):
    """Random small routing instance: mixed fabric, failure, capacity and candidates.

    Link capacities are shrunk so that capacity actually binds, and half the
    time each demand keeps a random subset of its full path list, which puts
    OLT relay paths in front of the solver on both fabrics.
    """
    from dataclasses import replace

    from ponfabric.failure import FailureScenario, apply_failure
    from ponfabric.optimizer import Demand, formulate
    from ponfabric.topology import candidate_paths, with_link_capacity

    t = build_pon3(2) if rng.random() < 0.5 else build_two_tier(1)
    t = with_link_capacity(t, float(rng.choice([1.0, 1.5, 2.0, 3.0, 10.0])))
    roll = rng.random()
    if roll < 0.6:
        ids = [l.id for l in t.links]
        k = 1 if roll < 0.45 else 2
        dead = frozenset(rng.choice(ids, size=k, replace=False).tolist())
        t = apply_failure(t, FailureScenario(dead, "custom"))
    servers = t.servers
    n = int(rng.integers(1, max_demands + 1))
    demands = []
    for i in range(n):
        a, b = rng.choice(len(servers), size=2, replace=False)
        demands.append(Demand(f"d{i}", servers[a], servers[b], float(rng.uniform(0.2, 1.4))))
    problem = formulate(t, demands, mode, max_paths)
    if rng.random() < 0.5:
        cands = {}
        for d in demands:
            full = candidate_paths(t, d.src, d.dst, max_paths=1000)
            if not full:
                cands[d.id] = ()
                continue
            k = int(rng.integers(1, min(max_paths, len(full)) + 1))
            keep = sorted(rng.choice(len(full), size=k, replace=False).tolist())
            cands[d.id] = tuple(full[i] for i in keep)
        problem = replace(problem, candidates=cands)
    return problem
