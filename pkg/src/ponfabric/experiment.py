"""Seeded failure sweeps over both fabrics, with CSV and table reports.

Demands are generated once, on the PON 3 server set, and carried over to
the two-tier fabric through a fixed pairing (rack ``r`` slot ``k`` maps to
cell ``r``, rack 0, slot ``k``) so both fabrics see the same traffic.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ponfabric import metrics
from ponfabric.failure import (
    NF,
    DownReport,
    FailureKind,
    FailureScenario,
    apply_failure,
    down_analysis,
    enumerate_single_failures,
)
from ponfabric.metrics import DELAY_MODELS, ENDPOINTS, DelayReport, PowerReport
from ponfabric.optimizer import (
    INFEASIBLE,
    OPTIMAL,
    PARTIAL,
    SINGLE_PATH,
    Demand,
    SolverConfig,
    formulate,
    solve,
    verify,
)
from ponfabric.topology import (
    ARCHITECTURES,
    DEFAULT_MAX_PATHS,
    DEFAULT_SERVERS_PER_RACK,
    TWO_TIER,
    DeviceKind,
    Topology,
    build,
    build_pon3,
)

log = logging.getLogger(__name__)

PERMUTATION = "permutation"
PAIRS = "pairs"
ALL_PAIRS = "all-pairs"
PATTERNS = (PERMUTATION, PAIRS, ALL_PAIRS)

ERROR = "error"
_SEVERITY = {OPTIMAL: 0, PARTIAL: 1, INFEASIBLE: 2, ERROR: 3}

PAIRING_RULE = "pon3 (rack r, slot k) -> two-tier (cell r, rack 0, slot k)"

REPORT_COLUMNS = ("label", "status", "total_w", "mean_delay_us", "max_delay_us",
                  "olt_forwarded_gbps", "dead_demands", "down_servers", "runtime_ms")
SCENARIO_COLUMNS = ("architecture", "kind", "failed_links", "status", "total_w",
                    "mean_delay_us", "max_delay_us", "mean_delay_per_link_us",
                    "olt_forwarded_gbps", "dead_demands", "down_servers")
SUMMARY_COLUMNS = ("label", "scenarios", "system_down", "power_delta_max_pct",
                   "power_delta_mean_pct", "delay_delta_max_pct", "delay_delta_mean_pct",
                   "olt_forwarded_max_gbps")


@dataclass(frozen=True)
class ExperimentSpec:
    architectures: tuple[str, ...] = ARCHITECTURES
    servers_per_rack: int = DEFAULT_SERVERS_PER_RACK
    pattern: str = PERMUTATION
    # None: one demand per server (permutation) or every pair (all-pairs)
    demand_count: int | None = None
    volume_range: tuple[float, float] = (0.2, 0.8)
    seed: int = 42
    failures: tuple[str, ...] = tuple(k.value for k in FailureKind)
    delay_model: str = ENDPOINTS
    mode: str = SINGLE_PATH
    max_paths: int = DEFAULT_MAX_PATHS
    solver: SolverConfig = field(default_factory=SolverConfig)
    jobs: int = 1
    record_runtime: bool = False

    def __post_init__(self):
        lo, hi = self.volume_range
        if not 0 < lo <= hi:
            raise ValueError(f"volume range must satisfy 0 < lo <= hi, got {self.volume_range}")
        for a in self.architectures:
            if a not in ARCHITECTURES:
                raise ValueError(f"unknown architecture {a!r}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown demand pattern {self.pattern!r}")
        if self.pattern == PAIRS and self.demand_count is None:
            raise ValueError("pattern 'pairs' needs demand_count")
        if self.delay_model not in DELAY_MODELS:
            raise ValueError(f"unknown delay model {self.delay_model!r}")
        for k in self.failures:
            FailureKind(k)
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["architectures"] = list(self.architectures)
        d["volume_range"] = list(self.volume_range)
        d["failures"] = list(self.failures)
        return d


@dataclass(frozen=True)
class ScenarioReport:
    architecture: str
    kind: str
    scenario: FailureScenario
    status: str
    power: PowerReport | None
    delays: dict[str, DelayReport]
    down: DownReport
    olt_traffic: float
    delay_model: str = ENDPOINTS
    runtime_s: float = 0.0
    violations: tuple[str, ...] = ()
    error: str | None = None

    @property
    def label(self) -> str:
        return self.scenario.label

    @property
    def delay(self) -> DelayReport | None:
        return self.delays.get(self.delay_model)

    @property
    def total_w(self) -> float | None:
        return self.power.total_w if self.power else None


# -- demands -------------------------------------------------------------------

def server_pool(servers_per_rack: int) -> list[str]:
    """PON 3 server ids in (rack, slot) order; demands are drawn over these."""
    t = build_pon3(servers_per_rack)
    return [n.id for n in sorted(t.nodes_of(DeviceKind.SERVER), key=lambda n: (n.rack, n.slot))]


def pair_server(pon3_id: str) -> str:
    """Map a PON 3 server id onto its two-tier partner."""
    rack, slot = pon3_id.removeprefix("srv-r").split("-s")
    return f"srv-c{int(rack)}-r0-s{int(slot)}"


def map_demands(demands: Sequence[Demand], t: Topology) -> list[Demand]:
    """Re-address demands onto ``t``; PON 3 ids are paired onto two-tier ids."""
    known = set(t.servers)
    out = []
    for d in demands:
        src, dst = d.src, d.dst
        if t.architecture == TWO_TIER and src not in known:
            src, dst = pair_server(src), pair_server(dst)
        out.append(Demand(d.id, src, dst, d.volume))
    return out


def sample_volumes(rng: np.random.Generator, n: int, lo: float, hi: float) -> list[float]:
    return [float(v) for v in rng.uniform(lo, hi, size=n)]


def generate_demands(spec: ExperimentSpec) -> list[Demand]:
    """Seeded demands over the PON 3 server pool.

    ``permutation``: every server sends one demand to a distinct random
    destination (a derangement), so every server both sources and sinks
    exactly one flow. ``pairs``: ``demand_count`` distinct ordered pairs,
    sampled without replacement. ``all-pairs``: every ordered pair.
    """
    rng = np.random.default_rng(spec.seed)
    pool = server_pool(spec.servers_per_rack)
    n = len(pool)
    if spec.pattern == PERMUTATION:
        if spec.demand_count not in (None, n):
            raise ValueError(f"permutation pattern yields exactly {n} demands")
        while True:
            perm = rng.permutation(n)
            if not np.any(perm == np.arange(n)):
                break
        pairs = [(pool[i], pool[int(j)]) for i, j in enumerate(perm)]
    else:
        every = [(a, b) for a in pool for b in pool if a != b]
        if spec.pattern == ALL_PAIRS:
            count = len(every) if spec.demand_count is None else spec.demand_count
        else:
            count = spec.demand_count
        if count > len(every):
            raise ValueError(f"{count} demands requested but only {len(every)} distinct pairs exist")
        if count == len(every):
            pairs = every
        else:
            picked = sorted(rng.choice(len(every), size=count, replace=False))
            pairs = [every[i] for i in picked]
    lo, hi = spec.volume_range
    vols = sample_volumes(rng, len(pairs), lo, hi)
    width = max(3, len(str(len(pairs) - 1)))
    return [Demand(f"d{i:0{width}d}", a, b, v) for i, ((a, b), v) in enumerate(zip(pairs, vols))]


# -- sweep ---------------------------------------------------------------------

def scenarios_for(t: Topology, kinds: Sequence[str]) -> list[tuple[str, FailureScenario]]:
    out = [(NF, FailureScenario())]
    for k in kinds:
        out += [(k, s) for s in enumerate_single_failures(t, k)]
    return out


def evaluate_scenario(t: Topology, kind: str, scenario: FailureScenario,
                      demands: Sequence[Demand], spec: ExperimentSpec) -> ScenarioReport:
    """Formulate, solve, verify, price and analyse one failure scenario."""
    start = time.perf_counter()
    try:
        failed = apply_failure(t, scenario)
        down = down_analysis(t, scenario, demands)
        problem = formulate(failed, demands, spec.mode, spec.max_paths)
        sol = solve(problem, spec.solver)
        violations = tuple(verify(problem, sol, spec.solver))
        if violations:
            log.warning("%s %s: %d verification failures", t.architecture,
                        sorted(scenario.failed_links), len(violations))
        power = delays = None
        if sol.status != INFEASIBLE:
            power = metrics.total_power(sol, problem.params)
            caps = failed.capacities()
            delays = {m: metrics.solution_delay(sol, problem.params, m, caps) for m in DELAY_MODELS}
        return ScenarioReport(t.architecture, kind, scenario, sol.status, power, delays or {},
                              down, sol.olt_traffic if power else 0.0, spec.delay_model,
                              time.perf_counter() - start, violations)
    except Exception as exc:  # one bad scenario must not sink the sweep
        log.exception("scenario %s failed", sorted(scenario.failed_links))
        return ScenarioReport(t.architecture, kind, scenario, ERROR, None, {}, DownReport(), 0.0,
                              spec.delay_model, time.perf_counter() - start, (), repr(exc))


def _evaluate_task(args) -> ScenarioReport:
    return evaluate_scenario(*args)


def run_sweep(spec: ExperimentSpec, demands: Sequence[Demand] | None = None) -> list[ScenarioReport]:
    """Evaluate NF plus every requested single-link failure on each fabric.

    Reports come back in a fixed order (architecture, then scenario order)
    regardless of ``spec.jobs``.
    """
    base = list(demands) if demands is not None else generate_demands(spec)
    tasks = []
    for arch in spec.architectures:
        t = build(arch, spec.servers_per_rack)
        mapped = map_demands(base, t)
        for kind, s in scenarios_for(t, spec.failures):
            tasks.append((t, kind, s, mapped, spec))
    log.info("sweep: %d scenarios over %s", len(tasks), ", ".join(spec.architectures))
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            return list(pool.map(_evaluate_task, tasks, chunksize=8))
    return [_evaluate_task(task) for task in tasks]


# -- aggregation -----------------------------------------------------------------

def _worst(reports: Sequence[ScenarioReport]) -> ScenarioReport:
    def key(r: ScenarioReport):
        d = r.delay
        return (_SEVERITY[r.status], r.total_w if r.total_w is not None else -math.inf,
                d.mean_us if d else -math.inf)
    return max(reports, key=key)


def group(reports: Sequence[ScenarioReport]) -> dict[tuple[str, str], list[ScenarioReport]]:
    out: dict[tuple[str, str], list[ScenarioReport]] = {}
    for r in reports:
        out.setdefault((r.architecture, r.kind), []).append(r)
    return out


def _pct(new: float, base: float) -> float:
    if base == 0 or not math.isfinite(base) or not math.isfinite(new):
        return math.nan
    return 100.0 * (new - base) / base


def summarize(reports: Sequence[ScenarioReport]) -> list[dict]:
    """Per (architecture, kind): worst-case and mean deltas against NF.

    Only survivable scenarios enter the deltas; ``system_down`` counts the
    rest.
    """
    rows = []
    groups = group(reports)
    for (arch, kind), items in groups.items():
        nf = groups.get((arch, NF), [None])[0]
        ok = [r for r in items if r.status == OPTIMAL]
        row = {"label": f"{arch}/{kind}", "scenarios": len(items),
               "system_down": sum(r.status != OPTIMAL for r in items)}
        if nf is None or nf.status != OPTIMAL or not ok:
            row.update({k: None for k in SUMMARY_COLUMNS[3:]})
        else:
            dp = [_pct(r.total_w, nf.total_w) for r in ok]
            dd = [_pct(r.delay.mean_us, nf.delay.mean_us) for r in ok]
            row.update({
                "power_delta_max_pct": max(dp),
                "power_delta_mean_pct": sum(dp) / len(dp),
                "delay_delta_max_pct": max(dd),
                "delay_delta_mean_pct": sum(dd) / len(dd),
                "olt_forwarded_max_gbps": max(r.olt_traffic for r in ok),
            })
        rows.append(row)
    return rows


def aggregate(reports: Sequence[ScenarioReport], record_runtime: bool = False) -> list[dict]:
    """One row per (architecture, kind), taken from its worst scenario."""
    rows = []
    for (arch, kind), items in group(reports).items():
        w = _worst(items)
        d = w.delay
        rows.append({
            "label": f"{arch}/{kind}",
            "status": w.status,
            "total_w": w.total_w,
            "mean_delay_us": d.mean_us if d else None,
            "max_delay_us": d.max_us if d else None,
            "olt_forwarded_gbps": w.olt_traffic,
            "dead_demands": len(w.down.dead_demands),
            "down_servers": len(w.down.down_servers),
            "runtime_ms": 1e3 * sum(r.runtime_s for r in items) if record_runtime else None,
        })
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.6f}"
    return str(v)


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[dict]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    try:
        path.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc}") from exc
    return path


def scenario_rows(reports: Sequence[ScenarioReport]) -> list[dict]:
    rows = []
    for r in reports:
        d = r.delay
        per_link = r.delays.get("per-link")
        rows.append({
            "architecture": r.architecture,
            "kind": r.kind,
            "failed_links": ";".join(sorted(r.scenario.failed_links)),
            "status": r.status,
            "total_w": r.total_w,
            "mean_delay_us": d.mean_us if d else None,
            "max_delay_us": d.max_us if d else None,
            "mean_delay_per_link_us": per_link.mean_us if per_link else None,
            "olt_forwarded_gbps": r.olt_traffic,
            "dead_demands": len(r.down.dead_demands),
            "down_servers": len(r.down.down_servers),
        })
    return rows


def render_table(reports: Sequence[ScenarioReport]) -> str:
    """Fixed-width comparison table; partial scenarios show as S/D."""
    rows = aggregate(reports)
    summary = {r["label"]: r for r in summarize(reports)}
    lines = [f"# demand pairing: {PAIRING_RULE}",
             f"{'scenario':<16}{'status':<12}{'power W':>12}{'dP %':>9}"
             f"{'delay us':>12}{'dD %':>9}{'OLT Gbps':>10}{'dead':>6}"]
    for row in rows:
        s = summary[row["label"]]
        if row["status"] == PARTIAL:
            power = delay = "S/D"
        else:
            power, delay = _fmt_short(row["total_w"]), _fmt_short(row["mean_delay_us"])
        lines.append(f"{row['label']:<16}{row['status']:<12}{power:>12}"
                     f"{_fmt_short(s['power_delta_max_pct']):>9}{delay:>12}"
                     f"{_fmt_short(s['delay_delta_max_pct']):>9}"
                     f"{_fmt_short(row['olt_forwarded_gbps']):>10}{row['dead_demands']:>6}")
    return "\n".join(lines) + "\n"


def _fmt_short(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    return f"{v:.3f}"


def emit_report(reports: Sequence[ScenarioReport], out_dir: str | Path | None = None,
                fmt: str = "csv", spec: ExperimentSpec | None = None,
                demands: Sequence[Demand] | None = None):
    """Write ``results.csv``, ``scenarios.csv``, ``summary.csv`` and a manifest.

    With ``fmt="table"`` the human-readable table is returned instead.
    """
    if fmt == "table":
        return render_table(reports)
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    if out_dir is None:
        raise ValueError("csv reports need an output directory")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    record = bool(spec and spec.record_runtime)
    paths = [
        _write_csv(out / "results.csv", REPORT_COLUMNS, aggregate(reports, record)),
        _write_csv(out / "scenarios.csv", SCENARIO_COLUMNS, scenario_rows(reports)),
        _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summarize(reports)),
    ]
    manifest = {
        "spec": spec.to_dict() if spec else None,
        "pairing": PAIRING_RULE,
        "demands": [d.to_dict() for d in demands] if demands is not None else None,
        "scenarios": len(reports),
        "errors": [{"architecture": r.architecture, "failed_links": sorted(r.scenario.failed_links),
                    "error": r.error} for r in reports if r.error],
    }
    if record:
        manifest["runtime_s"] = sum(r.runtime_s for r in reports)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    paths.append(path)
    return paths
