"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""

import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from conftest import random_problem, reachable
from ponfabric.experiment import ExperimentSpec, generate_demands, map_demands, run_sweep
from ponfabric.failure import apply_failure, down_analysis, enumerate_single_failures
from ponfabric.metrics import DEFAULT_PARAMS, mm1_delay, solution_delay
from ponfabric.optimizer import INFEASIBLE, OPTIMAL, PARTIAL, Demand, brute_force, formulate, solve
from ponfabric.topology import build_pon3, build_two_tier

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return emit


def rel_close(a, b, tol=1e-6):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def test_1_table_delays(report):
    got = [mm1_delay(x, 1.0) for x in (0.2, 0.4, 0.6, 0.8)]
    table = [15, 20, 30.1, 60.2]
    olt = mm1_delay(0.2, 8600.0)
    ok = (all(abs(g - t) / t <= 0.01 for g, t in zip(got, table))
          and float(f"{olt:.6g}") == 0.00139538)
    report(1, ok, f"server delays {[round(g, 4) for g in got]} us, OLT {olt:.6g} us")


def test_2_nf_parity(report):
    p3, tt = build_pon3(4), build_two_tier(4)
    worst = 0.0
    for seed in range(20):
        ds = generate_demands(ExperimentSpec(seed=seed))
        a = solve(formulate(p3, ds))
        b = solve(formulate(tt, map_demands(ds, tt)))
        da, db = solution_delay(a).mean_us, solution_delay(b).mean_us
        for x, y in ((a.objective_value, b.objective_value), (da, db)):
            worst = max(worst, abs(x - y) / abs(x))
    report(2, worst <= 1e-6, f"20 seeds, worst relative gap {worst:.3g}")


def test_3_two_tier_resilience(report):
    reports = run_sweep(ExperimentSpec(architectures=("two-tier",)))
    nf = reports[0]
    bad = [r for r in reports[1:]
           if r.status != OPTIMAL or r.olt_traffic != 0
           or not rel_close(r.total_w, nf.total_w, 1e-6)
           or not rel_close(r.delay.mean_us, nf.delay.mean_us, 1e-6)]
    report(3, not bad, f"{len(reports) - 1} single-link failures, {len(bad)} deviate from NF")


def test_4_pon3_system_down(report):
    t = build_pon3(4)
    demands = generate_demands(ExperimentSpec())
    checked, bad = 0, []
    for kind in ("F1", "F2", "F4", "F5"):
        for s in enumerate_single_failures(t, kind):
            failed = apply_failure(t, s)
            oracle = {d.id for d in demands if not reachable(failed, d.src, d.dst)}
            sol = solve(formulate(failed, demands))
            dead = down_analysis(t, s, demands).dead_demands
            checked += 1
            if not (sol.status == PARTIAL and oracle and dead == oracle
                    and set(sol.unroutable) == oracle):
                bad.append(sorted(s.failed_links))
    report(4, not bad, f"{checked} scenarios partial with oracle-matching dead sets, "
                       f"{len(bad)} mismatches")


def test_5_pon3_f3_penalty(report):
    t = build_pon3(4)
    demands = generate_demands(ExperimentSpec())
    nf = solve(formulate(t, demands))
    nf_delay = solution_delay(nf, model="per-link", capacities=t.capacities()).mean_us
    lines, ok = [], True
    for s in enumerate_single_failures(t, "F3"):
        failed = apply_failure(t, s)
        sol = solve(formulate(failed, demands))
        delay = solution_delay(sol, model="per-link", capacities=failed.capacities()).mean_us
        idle = sum(DEFAULT_PARAMS.olt_idle_w for o in sol.active_olts if o not in nf.active_olts)
        expected = idle + DEFAULT_PARAMS.olt_slope_w_per_gbps * sol.olt_traffic
        delta = sol.objective_value - nf.objective_value
        ok &= (sol.status == OPTIMAL and delta > 0 and delay > nf_delay
               and abs(delta - expected) <= 1e-6 * sol.objective_value)
        lines.append(f"power +{100 * delta / nf.objective_value:.2f}%, "
                     f"per-link delay +{100 * (delay - nf_delay) / nf_delay:.2f}%")
    report(5, ok, "; ".join(lines))


def test_6_oracle_equivalence(report):
    # keep drawing until 50 feasible instances have been compared
    n, feasible, bad = 0, 0, []
    while feasible < 50:
        p = random_problem(np.random.default_rng(10_000 + n))
        a, b = solve(p), brute_force(p)
        feasible += a.status != INFEASIBLE
        same = a.status == b.status and (a.status == INFEASIBLE or (
            a.objective_value == b.objective_value and a.chosen() == b.chosen()))
        if not same:
            bad.append(n)
        n += 1
    report(6, not bad, f"{n} instances ({feasible} feasible), mismatched seeds {bad}")


def test_7_monotonicity(report):
    pairs, seed, bad = 0, 0, []
    while pairs < 100:
        rng = np.random.default_rng(20_000 + seed)
        seed += 1
        p = random_problem(rng, max_demands=7)
        base = solve(p)
        if base.status == INFEASIBLE:
            continue
        src, dst = rng.choice(p.topology.servers, size=2, replace=False)
        extra = Demand("extra", str(src), str(dst), float(rng.uniform(0.2, 1.4)))
        grown_p = formulate(p.topology, [*p.demands, extra], max_paths=4)
        grown_p = replace(grown_p, candidates={**p.candidates, "extra": grown_p.candidates["extra"]})
        grown = solve(grown_p)
        pairs += 1
        if grown.objective_value < base.objective_value:
            bad.append(seed - 1)
    report(7, not bad, f"{pairs} pairs, {len(bad)} decreases")


def test_8_determinism(report, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        r = subprocess.run([sys.executable, "-m", "ponfabric", "sweep", "--out", str(out)],
                           capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs.append(out)
    names = ("results.csv", "scenarios.csv", "summary.csv")
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in names)
    report(8, same, f"two sweeps, {', '.join(names)} byte-identical: {same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
