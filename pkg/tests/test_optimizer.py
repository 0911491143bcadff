import json
import math
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

from conftest import random_problem
from ponfabric.failure import FailureScenario, apply_failure
from ponfabric.metrics import mm1_delay, solution_delay, total_power
from ponfabric.optimizer import (
    INFEASIBLE,
    OPTIMAL,
    PARTIAL,
    SPLITTABLE,
    Demand,
    InstanceTooLarge,
    NodeLimitExceeded,
    SolverConfig,
    brute_force,
    dump_solution,
    formulate,
    load_dump,
    read_demands,
    solve,
    verify,
    write_demands,
)

SLOPE = (1940 - 60) / 8600
F3_PON3 = FailureScenario(frozenset(["awgr-1>awgr-2"]), "F3")


def endpoint_power(demands):
    """Server power computed straight from the demand list."""
    tx, rx = {}, {}
    for d in demands:
        tx[d.src] = tx.get(d.src, 0) + d.volume
        rx[d.dst] = rx.get(d.dst, 0) + d.volume
    total = 0.0
    for s in sorted(set(tx) | set(rx)):
        u = min(1.0, (tx.get(s, 0) + rx.get(s, 0)) / 1.0)
        total += 201 + 100 * u + 2.5
    return total


class TestFormulate:
    def test_pon3_inter_rack(self, pon3):
        p = formulate(pon3, [Demand("a", "srv-r0-s0", "srv-r3-s0", 0.5)])
        assert [c.olt_relay for c in p.candidates["a"]] == [False, True]

    def test_dead_uplink_flagged(self, pon3):
        t = apply_failure(pon3, FailureScenario(frozenset(["cpl-r0>awgr-1"]), "F2"))
        p = formulate(t, [Demand("a", "srv-r0-s0", "srv-r3-s0", 0.5),
                          Demand("b", "srv-r2-s0", "srv-r3-s0", 0.5)])
        assert p.unroutable == ("a",)
        s = solve(p)
        assert s.status == PARTIAL and s.unroutable == ("a",) and "b" in s.assignment

    def test_two_tier_always_olt_free(self, two_tier, two_tier_demands):
        for lid in ["awgr-x>spl-c0-a", "cpl-c1-b>awgr-y", "awgr-x>awgr-u#0"]:
            t = apply_failure(two_tier, FailureScenario(frozenset([lid]), "custom"))
            p = formulate(t, two_tier_demands)
            assert all(not p.candidates[d.id][0].olt_relay for d in two_tier_demands)

    def test_rejects_non_servers(self, pon3):
        with pytest.raises(KeyError):
            formulate(pon3, [Demand("a", "srv-r0-s0", "olt-0", 0.5)])


class TestSolve:
    def test_pon3_nf_uses_no_olt(self, pon3, default_demands):
        s = solve(formulate(pon3, default_demands))
        assert s.status == OPTIMAL and not s.active_olts
        assert s.objective_value == pytest.approx(endpoint_power(default_demands), rel=1e-12)

    def test_pon3_f3_relays_through_olt(self, pon3):
        demands = [Demand("a", "srv-r0-s0", "srv-r2-s0", 0.5)]
        nf = solve(formulate(pon3, demands))
        f3 = solve(formulate(apply_failure(pon3, F3_PON3), demands))
        assert f3.active_olts == {"olt-0"}
        assert f3.objective_value - nf.objective_value == pytest.approx(60 + SLOPE * 0.5, rel=1e-9)

    def test_two_tier_f3_costs_nothing(self, two_tier):
        demands = [Demand("a", "srv-c0-r0-s0", "srv-c2-r0-s0", 0.5)]
        nf = solve(formulate(two_tier, demands))
        for lid in ("awgr-x>awgr-u#0", "awgr-u>awgr-y#1"):
            t = apply_failure(two_tier, FailureScenario(frozenset([lid]), "F3"))
            s = solve(formulate(t, demands))
            assert s.objective_value == nf.objective_value and not s.active_olts

    def test_infeasible(self, pon3):
        # both demands can only use cpl-r0 -> awgr-1
        demands = [Demand("a", "srv-r0-s0", "srv-r1-s0", 6.0), Demand("b", "srv-r0-s1", "srv-r1-s1", 6.0)]
        p = formulate(pon3, demands)
        assert solve(p).status == INFEASIBLE
        assert brute_force(p).status == INFEASIBLE
        assert verify(p, solve(p)) == []

    def test_capacity_pushes_traffic_onto_olt(self, pon3):
        # 6 + 6 Gbps cannot share awgr-1 -> awgr-2, so one goes via the OLT
        demands = [Demand("a", "srv-r0-s0", "srv-r2-s0", 6.0), Demand("b", "srv-r1-s1", "srv-r3-s1", 6.0)]
        p = formulate(pon3, demands)
        s = solve(p)
        assert s.chosen() == {"a": (0,), "b": (1,)}
        assert s.olt_forwarded == {"olt-0": 6.0}
        assert verify(p, s) == []

    def test_empty(self, pon3):
        s = solve(formulate(pon3, []))
        assert s.status == OPTIMAL and s.objective_value == 0.0

    def test_node_limit(self, pon3, default_demands):
        p = formulate(apply_failure(pon3, F3_PON3), default_demands)
        with pytest.raises(NodeLimitExceeded):
            solve(p, SolverConfig(node_limit=3))

    def test_deterministic(self, two_tier, two_tier_demands):
        p = formulate(two_tier, two_tier_demands)
        assert solve(p) == solve(p)


class TestBruteForce:
    def test_single_path(self, pon3):
        p = formulate(pon3, [Demand("a", "srv-r0-s0", "srv-r1-s0", 0.3)])
        s = brute_force(p)
        assert s.chosen() == {"a": (0,)}

    def test_too_large(self, two_tier, two_tier_demands):
        with pytest.raises(InstanceTooLarge):
            brute_force(formulate(two_tier, two_tier_demands))

    @pytest.mark.parametrize("seed", range(30))
    def test_agrees_with_branch_and_bound(self, seed):
        p = random_problem(np.random.default_rng(seed))
        a, b = solve(p), brute_force(p)
        assert a.status == b.status
        if a.status != INFEASIBLE:
            assert a.objective_value == b.objective_value
            assert a.chosen() == b.chosen()
            assert verify(p, a) == []


class TestVerify:
    @pytest.fixture
    def solved(self, pon3, default_demands):
        p = formulate(apply_failure(pon3, F3_PON3), default_demands)
        return p, solve(p)

    def test_clean(self, solved):
        assert verify(*solved) == []

    def test_tampered_load(self, solved):
        p, s = solved
        loads = dict(s.link_loads)
        lid = next(iter(loads))
        loads[lid] += 11.0
        out = verify(p, replace(s, link_loads=loads))
        assert any("conservation" in v for v in out) and any("capacity" in v for v in out)

    def test_objective_off_by_one_watt(self, solved):
        p, s = solved
        out = verify(p, replace(s, objective_value=s.objective_value + 1.0))
        assert any("objective mismatch" in v for v in out)

    def test_olt_flag(self, solved):
        p, s = solved
        assert verify(p, replace(s, active_olts=frozenset()))

    def test_dump_round_trip(self, solved, tmp_path):
        p, s = solved
        path = tmp_path / "dump.json"
        path.write_text(json.dumps(dump_solution(p, s)))
        p2, s2 = load_dump(json.loads(path.read_text()))
        assert verify(p2, s2) == []
        assert s2.objective_value == s.objective_value
        assert s2.chosen() == s.chosen()


class TestProperties:
    @pytest.mark.parametrize("seed", range(20))
    def test_olt_avoidance(self, seed, pon3):
        # all-intra-AWGR-group demands have only OLT-free paths with room to spare
        rng = np.random.default_rng(seed)
        srv = [s for s in pon3.servers if s[5] in "01"]
        demands = []
        for i in range(6):
            a, b = rng.choice(len(srv), size=2, replace=False)
            demands.append(Demand(f"d{i}", srv[a], srv[b], float(rng.uniform(0.2, 0.8))))
        s = solve(formulate(pon3, demands))
        assert not s.active_olts

    def test_olt_avoidance_two_tier(self, two_tier, two_tier_demands):
        assert not solve(formulate(two_tier, two_tier_demands)).active_olts

    @pytest.mark.parametrize("seed", range(20))
    def test_monotone(self, seed):
        rng = np.random.default_rng(1000 + seed)
        p = random_problem(rng, max_demands=6)
        base = solve(p)
        src, dst = rng.choice(p.topology.servers, size=2, replace=False)
        bigger = formulate(p.topology, [*p.demands, Demand("extra", str(src), str(dst), 0.5)],
                           max_paths=4)
        bigger = replace(bigger, candidates={**p.candidates, "extra": bigger.candidates["extra"]})
        grown = solve(bigger)
        if base.status != INFEASIBLE:
            assert grown.objective_value >= base.objective_value


def milp_oracle(p):
    """Independent splittable formulation: continuous path flows + binary OLT switches."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    routed = p.routable
    cols = [(d, i, path) for d in routed for i, path in enumerate(p.candidates[d.id])]
    olts = sorted(p.topology.olts)
    nx_, no = len(cols), len(olts)
    c = np.array([SLOPE * len(path.olts) for _, _, path in cols] + [60.0] * no)
    rows, lo, hi = [], [], []
    for d in routed:
        rows.append([1.0 if dd is d else 0.0 for dd, _, _ in cols] + [0.0] * no)
        lo.append(d.volume)
        hi.append(d.volume)
    for l in p.topology.links:
        row = [1.0 if l.id in path.links else 0.0 for _, _, path in cols]
        if any(row):
            rows.append(row + [0.0] * no)
            lo.append(-np.inf)
            hi.append(l.capacity)
    big = sum(d.volume for d in routed)
    for j, t in enumerate(olts):
        row = [1.0 if t in path.olts else 0.0 for _, _, path in cols] + [0.0] * no
        row[nx_ + j] = -big
        rows.append(row)
        lo.append(-np.inf)
        hi.append(0.0)
    res = milp(c, constraints=LinearConstraint(np.array(rows), lo, hi),
               integrality=np.array([0] * nx_ + [1] * no),
               bounds=Bounds([0] * (nx_ + no), [np.inf] * nx_ + [1] * no))
    if res.status != 0:
        return math.inf
    return endpoint_power(routed) + res.fun


class TestSplittable:
    @pytest.mark.parametrize("seed", range(25))
    def test_matches_milp_oracle(self, seed):
        p = random_problem(np.random.default_rng(500 + seed), mode=SPLITTABLE)
        s = solve(p)
        want = milp_oracle(p)
        if math.isinf(want):
            assert s.status == INFEASIBLE
        else:
            assert s.objective_value == pytest.approx(want, rel=1e-6)
            assert verify(p, s) == []

    @pytest.mark.parametrize("seed", range(10))
    def test_never_worse_than_single_path(self, seed):
        p = random_problem(np.random.default_rng(700 + seed))
        single = solve(p)
        split = solve(replace(p, mode=SPLITTABLE))
        assert split.objective_value <= single.objective_value * (1 + 1e-9)

    def test_splits_when_no_single_path_fits(self, pon3):
        t = apply_failure(pon3, FailureScenario(frozenset(), "NF"))
        demands = [Demand("a", "srv-r0-s0", "srv-r2-s0", 9.0), Demand("b", "srv-r1-s0", "srv-r3-s0", 9.0)]
        p = formulate(t, demands, SPLITTABLE)
        s = solve(p)
        assert s.status == OPTIMAL and verify(p, s) == []
        assert s.olt_forwarded["olt-0"] == pytest.approx(8.0, abs=1e-6)
        assert solve(replace(p, mode="single-path")).status == OPTIMAL


class TestPricing:
    def test_objective_equals_metrics(self, pon3, default_demands):
        p = formulate(apply_failure(pon3, F3_PON3), default_demands)
        s = solve(p)
        assert total_power(s, p.params).total_w == s.objective_value

    def test_idle_servers(self):
        stub = SimpleNamespace(active_servers={"a", "b", "c", "d"}, server_tx={}, server_rx={},
                               server_proc={}, active_olts=set(), olt_forwarded={})
        assert total_power(stub).total_w == 814.0

    def test_zero_traffic_scaling(self):
        stub = SimpleNamespace(active_servers={f"s{i}" for i in range(7)}, server_tx={},
                               server_rx={}, server_proc={}, active_olts={"o1", "o2"},
                               olt_forwarded={})
        assert total_power(stub).total_w == 203.5 * 7 + 60 * 2

    def test_empty_solution(self, pon3):
        assert total_power(solve(formulate(pon3, []))).total_w == 0.0

    def test_breakdown_adds_up(self, pon3, default_demands):
        p = formulate(apply_failure(pon3, F3_PON3), default_demands)
        r = total_power(solve(p))
        assert sum(r.breakdown.values()) == pytest.approx(r.total_w, rel=1e-12)
        assert r.total_w == sum(r.per_server_w.values()) + sum(r.per_olt_w.values())

    def test_processing_hook(self, pon3):
        demands = [Demand("a", "srv-r0-s0", "srv-r1-s0", 0.2)]
        plain = solve(formulate(pon3, demands))
        busy = solve(formulate(pon3, demands, processing={"srv-r0-s0": 0.3}))
        assert busy.objective_value - plain.objective_value == pytest.approx(30.0, rel=1e-9)


class TestDelay:
    def test_endpoint_delay(self, pon3):
        s = solve(formulate(pon3, [Demand("a", "srv-r0-s0", "srv-r1-s0", 0.2)]))
        assert solution_delay(s).per_demand_us["a"] == pytest.approx(30.0, rel=1e-12)

    def test_olt_term_is_additive(self, pon3, default_demands):
        nf = solution_delay(solve(formulate(pon3, default_demands)))
        s = solve(formulate(apply_failure(pon3, F3_PON3), default_demands))
        f3 = solution_delay(s)
        fwd = s.olt_forwarded["olt-0"]
        for did, routes in s.routes.items():
            extra = mm1_delay(fwd, 8600.0) if routes[0][0].olt_relay else 0.0
            assert f3.per_demand_us[did] - nf.per_demand_us[did] == pytest.approx(extra, abs=1e-9)

    def test_per_link_sums_links(self, pon3):
        s = solve(formulate(pon3, [Demand("a", "srv-r0-s0", "srv-r2-s0", 0.5)]))
        d = solution_delay(s, model="per-link")
        assert d.per_demand_us["a"] == pytest.approx(5 * mm1_delay(0.5, 10.0), rel=1e-12)

    def test_unstable_flagged(self, pon3):
        s = solve(formulate(pon3, [Demand("a", "srv-r0-s0", "srv-r1-s0", 1.0)]))
        d = solution_delay(s)
        assert math.isinf(d.per_demand_us["a"]) and "srv-r0-s0" in d.unstable

    def test_nf_parity(self, pon3, two_tier, default_demands, two_tier_demands):
        a = solve(formulate(pon3, default_demands))
        b = solve(formulate(two_tier, two_tier_demands))
        assert a.objective_value == pytest.approx(b.objective_value, rel=1e-12)
        assert solution_delay(a).mean_us == pytest.approx(solution_delay(b).mean_us, rel=1e-12)


def test_demand_file_round_trip(tmp_path, default_demands):
    assert read_demands(write_demands(default_demands, tmp_path / "d.json")) == default_demands


def test_demand_validation():
    with pytest.raises(ValueError):
        Demand("x", "a", "b", 0.0)
    with pytest.raises(ValueError):
        Demand("x", "a", "a", 1.0)
