"""Energy-aware routing over candidate paths.

The model: every routable demand is carried on its candidate paths,
link loads stay within capacity, servers terminating traffic are active and
an OLT is active exactly when it forwards traffic. The objective is total
server plus OLT power.

Server power depends only on the traffic a server sources and sinks, which
routing cannot change, so the optimization is really about how much traffic
is relayed through OLTs and how many OLTs wake up.

Single-path mode is solved by depth-first branch-and-bound over path
indices; :func:`brute_force` enumerates the same space exhaustively and is
kept as the reference. Splittable mode enumerates OLT activation sets and
solves a linear program for each.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ponfabric import metrics
from ponfabric.metrics import DeviceParams
from ponfabric.topology import (
    DEFAULT_MAX_PATHS,
    CandidatePath,
    DeviceKind,
    Topology,
    UnknownIdError,
    candidate_paths,
    load_topology,
    save_topology,
)

SINGLE_PATH = "single-path"
SPLITTABLE = "splittable"
MODES = (SINGLE_PATH, SPLITTABLE)

OPTIMAL = "optimal"
PARTIAL = "partial"
INFEASIBLE = "infeasible"

BRUTE_FORCE_LIMIT = 10**6


class SolverError(RuntimeError):
    pass


class NodeLimitExceeded(SolverError):
    pass


class InstanceTooLarge(SolverError):
    pass


@dataclass(frozen=True)
class Demand:
    id: str
    src: str
    dst: str
    volume: float

    def __post_init__(self):
        if not self.volume > 0:
            raise ValueError(f"demand {self.id}: volume must be > 0, got {self.volume}")
        if self.src == self.dst:
            raise ValueError(f"demand {self.id}: src and dst must differ")

    def to_dict(self) -> dict:
        return {"id": self.id, "src": self.src, "dst": self.dst, "volume": self.volume}


@dataclass(frozen=True)
class SolverConfig:
    feasibility_tol: float = 1e-9
    objective_tol: float = 1e-6
    node_limit: int = 5_000_000

    def __post_init__(self):
        if not (self.feasibility_tol > 0 and self.objective_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.node_limit < 1:
            raise ValueError("node_limit must be >= 1")

    def tie_width(self, incumbent: float) -> float:
        return self.objective_tol * max(1.0, abs(incumbent))


@dataclass(frozen=True)
class RoutingProblem:
    topology: Topology
    demands: tuple[Demand, ...]
    mode: str
    candidates: Mapping[str, tuple[CandidatePath, ...]]
    # extra per-server load in Gbps-equivalent, feeds server utilization only
    processing: Mapping[str, float] = field(default_factory=dict)

    @property
    def params(self) -> DeviceParams:
        return self.topology.params.device

    @property
    def routable(self) -> tuple[Demand, ...]:
        return tuple(d for d in self.demands if self.candidates[d.id])

    @property
    def unroutable(self) -> tuple[str, ...]:
        return tuple(d.id for d in self.demands if not self.candidates[d.id])

    def demand(self, demand_id: str) -> Demand:
        for d in self.demands:
            if d.id == demand_id:
                return d
        raise KeyError(demand_id)


@dataclass(frozen=True)
class RoutingSolution:
    """A routing decision with everything needed to price and verify it.

    ``assignment`` maps each routed demand to ``(path index, volume)``
    pairs; single-path solutions carry exactly one pair per demand.
    """

    mode: str
    status: str
    assignment: dict[str, tuple[tuple[int, float], ...]]
    routes: dict[str, tuple[tuple[CandidatePath, float], ...]]
    endpoints: dict[str, tuple[str, str]]
    active_servers: frozenset
    active_olts: frozenset
    link_loads: dict[str, float]
    olt_forwarded: dict[str, float]
    server_tx: dict[str, float]
    server_rx: dict[str, float]
    server_proc: dict[str, float]
    objective_value: float
    unroutable: tuple[str, ...] = ()
    nodes_explored: int = 0

    @property
    def olt_traffic(self) -> float:
        return sum(self.olt_forwarded.values(), 0.0)

    def chosen(self) -> dict[str, tuple[int, ...]]:
        return {d: tuple(i for i, _ in parts) for d, parts in self.assignment.items()}


# -- formulation ---------------------------------------------------------------

def formulate(t: Topology, demands: Sequence[Demand], mode: str = SINGLE_PATH,
              max_paths: int = DEFAULT_MAX_PATHS,
              processing: Mapping[str, float] | None = None) -> RoutingProblem:
    """Attach candidate paths to every demand.

    Demands without any path are kept and flagged unroutable; they end up in
    a ``partial`` solution rather than disappearing.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    seen = set()
    for d in demands:
        if d.id in seen:
            raise ValueError(f"duplicate demand id {d.id!r}")
        seen.add(d.id)
        for s in (d.src, d.dst):
            if s not in t.node_map or t.kind(s) is not DeviceKind.SERVER:
                raise UnknownIdError(f"demand {d.id}: {s!r} is not a server of this topology")
    cands = {d.id: tuple(candidate_paths(t, d.src, d.dst, max_paths)) for d in demands}
    proc = dict(processing or {})
    if any(v < 0 for v in proc.values()):
        raise ValueError("processing loads must be >= 0")
    return RoutingProblem(t, tuple(demands), mode, cands, proc)


# -- pricing -----------------------------------------------------------------

class _Pricer:
    """Fast objective evaluation that reproduces ``metrics.total_power``.

    Server power is fixed once the routed demand set is known; only the OLT
    part changes with path choice. Floating-point operations follow the same
    order as the metrics module so values agree bit for bit.
    """

    def __init__(self, problem: RoutingProblem):
        self.p = problem.params
        routed = problem.routable
        tx, rx = _endpoint_loads(routed)
        self.servers = _active_servers(routed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", metrics.UtilizationClamped)
            per_server = [metrics.server_power(True, tx.get(s, 0.0), rx.get(s, 0.0),
                                               problem.processing.get(s, 0.0), self.p)
                          for s in sorted(self.servers)]
        self.server_total = sum(per_server)
        self.olts = sorted(problem.topology.olts)

    def objective(self, fwd: Mapping[str, float], tol: float) -> float:
        per_olt = [metrics.olt_power(True, fwd[t], self.p)
                   for t in self.olts if fwd.get(t, 0.0) > tol]
        return self.server_total + sum(per_olt)


def _endpoint_loads(demands: Iterable[Demand]):
    tx: dict[str, float] = {}
    rx: dict[str, float] = {}
    for d in demands:
        tx[d.src] = tx.get(d.src, 0.0) + d.volume
        rx[d.dst] = rx.get(d.dst, 0.0) + d.volume
    return tx, rx


def _active_servers(demands: Iterable[Demand]) -> frozenset:
    active = set()
    for d in demands:
        active.update((d.src, d.dst))
    return frozenset(active)


def _olt_forwarded(problem: RoutingProblem, assignment) -> dict[str, float]:
    fwd: dict[str, float] = {}
    for d in problem.routable:
        if d.id not in assignment:
            continue
        paths = problem.candidates[d.id]
        for idx, vol in assignment[d.id]:
            for olt in paths[idx].olts:
                fwd[olt] = fwd.get(olt, 0.0) + vol
    return fwd


def build_solution(problem: RoutingProblem, assignment: Mapping[str, Sequence[tuple[int, float]]],
                   status: str, nodes_explored: int = 0,
                   cfg: SolverConfig | None = None) -> RoutingSolution:
    """Derive loads, activations and the priced objective from an assignment."""
    cfg = cfg or SolverConfig()
    assignment = {d: tuple((int(i), float(v)) for i, v in parts) for d, parts in assignment.items()}
    routed = [d for d in problem.routable if d.id in assignment]
    loads: dict[str, float] = {}
    routes = {}
    for d in routed:
        paths = problem.candidates[d.id]
        routes[d.id] = tuple((paths[i], v) for i, v in assignment[d.id])
        for i, v in assignment[d.id]:
            for lid in paths[i].links:
                loads[lid] = loads.get(lid, 0.0) + v
    fwd = _olt_forwarded(problem, assignment)
    tx, rx = _endpoint_loads(routed)
    servers = _active_servers(routed)
    sol = RoutingSolution(
        mode=problem.mode,
        status=status,
        assignment={d.id: assignment[d.id] for d in routed},
        routes=routes,
        endpoints={d.id: (d.src, d.dst) for d in routed},
        active_servers=servers,
        active_olts=frozenset(t for t, f in fwd.items() if f > cfg.feasibility_tol),
        link_loads=dict(sorted(loads.items())),
        olt_forwarded=dict(sorted(fwd.items())),
        server_tx=tx,
        server_rx=rx,
        server_proc={s: problem.processing.get(s, 0.0) for s in sorted(servers)
                     if problem.processing.get(s, 0.0)},
        objective_value=0.0,
        unroutable=problem.unroutable,
        nodes_explored=nodes_explored,
    )
    total = metrics.total_power(sol, problem.params).total_w
    object.__setattr__(sol, "objective_value", total)
    return sol


def _infeasible(problem: RoutingProblem, nodes: int = 0) -> RoutingSolution:
    return RoutingSolution(problem.mode, INFEASIBLE, {}, {}, {}, frozenset(), frozenset(),
                           {}, {}, {}, {}, {}, math.inf, problem.unroutable, nodes)


def _status(problem: RoutingProblem) -> str:
    return PARTIAL if problem.unroutable else OPTIMAL


# -- single-path search --------------------------------------------------------

def _single_path_tables(problem: RoutingProblem):
    routed = problem.routable
    caps = problem.topology.capacities()
    options = [[(p.links, p.olts) for p in problem.candidates[d.id]] for d in routed]
    return routed, caps, options


def _better(obj: float, best: float, cfg: SolverConfig) -> bool:
    # ties within tolerance keep the earlier (lexicographically smaller) assignment
    return obj < best - cfg.tie_width(best) if math.isfinite(best) else True


def solve(problem: RoutingProblem, cfg: SolverConfig | None = None) -> RoutingSolution:
    """Minimum-power routing of every routable demand.

    Returns status ``optimal`` (everything routed), ``partial`` (some
    demands had no path; the rest are routed optimally) or ``infeasible``
    (capacity cannot hold the routable demands under any assignment).
    """
    cfg = cfg or SolverConfig()
    if problem.mode == SPLITTABLE:
        return _solve_splittable(problem, cfg)
    return _solve_single_path(problem, cfg)


def _solve_single_path(problem: RoutingProblem, cfg: SolverConfig) -> RoutingSolution:
    routed, caps, options = _single_path_tables(problem)
    n = len(routed)
    if n == 0:
        return build_solution(problem, {}, _status(problem), 0, cfg)
    p = problem.params
    pricer = _Pricer(problem)
    slope, idle = p.olt_slope_w_per_gbps, p.olt_idle_w
    vols = [d.volume for d in routed]
    tol = cfg.feasibility_tol

    # cheapest possible OLT forwarding for each demand, summed over suffixes
    min_prop = [min(slope * v * len(olts) for _, olts in opts) for v, opts in zip(vols, options)]
    suffix = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + min_prop[i]
    olt_only = [all(olts for _, olts in opts) for opts in options]

    loads: dict[str, float] = {}
    fwd: dict[str, float] = {}
    choice = [0] * n
    best_obj = math.inf
    best_choice: list[int] | None = None
    nodes = 0

    def bound(depth: int) -> float:
        active = {t for t, f in fwd.items() if f > tol}
        b = pricer.server_total + sum(idle + slope * fwd[t] for t in active) + suffix[depth]
        for j in range(depth, n):
            if olt_only[j] and not any(set(olts) <= active for _, olts in options[j]):
                # at least one more OLT must wake up
                b += idle
                break
        return b

    def leaf_objective() -> float:
        exact: dict[str, float] = {}
        for i in range(n):
            for olt in options[i][choice[i]][1]:
                exact[olt] = exact.get(olt, 0.0) + vols[i]
        return pricer.objective(exact, tol)

    def dfs(depth: int) -> None:
        nonlocal nodes, best_obj, best_choice
        nodes += 1
        if nodes > cfg.node_limit:
            raise NodeLimitExceeded(f"branch-and-bound exceeded {cfg.node_limit} nodes")
        if depth == n:
            obj = leaf_objective()
            if _better(obj, best_obj, cfg):
                best_obj, best_choice = obj, list(choice)
            return
        if math.isfinite(best_obj):
            margin = 1e-9 * max(1.0, abs(best_obj))
            if bound(depth) - margin >= best_obj - cfg.tie_width(best_obj):
                return
        v = vols[depth]
        for idx, (links, olts) in enumerate(options[depth]):
            if any(loads.get(l, 0.0) + v > caps[l] + tol for l in links):
                continue
            undo = [(l, loads.get(l)) for l in links]
            for l in links:
                loads[l] = loads.get(l, 0.0) + v
            fundo = [(t, fwd.get(t)) for t in olts]
            for t in olts:
                fwd[t] = fwd.get(t, 0.0) + v
            choice[depth] = idx
            dfs(depth + 1)
            for t, old in reversed(fundo):
                _restore(fwd, t, old)
            for l, old in reversed(undo):
                _restore(loads, l, old)

    dfs(0)
    if best_choice is None:
        return _infeasible(problem, nodes)
    assignment = {d.id: ((i, d.volume),) for d, i in zip(routed, best_choice)}
    return build_solution(problem, assignment, _status(problem), nodes, cfg)


def _restore(table: dict, key, old) -> None:
    if old is None:
        del table[key]
    else:
        table[key] = old


def brute_force(problem: RoutingProblem, cfg: SolverConfig | None = None) -> RoutingSolution:
    """Exhaustive reference solver for single-path problems.

    Every assignment is priced; ties are resolved exactly as in
    :func:`solve` (the lexicographically first assignment wins).
    """
    cfg = cfg or SolverConfig()
    if problem.mode != SINGLE_PATH:
        raise ValueError("brute_force only handles single-path problems")
    routed = problem.routable
    sizes = [len(problem.candidates[d.id]) for d in routed]
    if math.prod(sizes) > BRUTE_FORCE_LIMIT:
        raise InstanceTooLarge(f"{math.prod(sizes)} assignments exceed {BRUTE_FORCE_LIMIT}")
    if not routed:
        return build_solution(problem, {}, _status(problem), 0, cfg)
    caps = problem.topology.capacities()
    pricer = _Pricer(problem)
    tol = cfg.feasibility_tol
    best_obj, best = math.inf, None
    count = 0
    for combo in itertools.product(*(range(k) for k in sizes)):
        count += 1
        loads: dict[str, float] = {}
        fwd: dict[str, float] = {}
        for d, idx in zip(routed, combo):
            path = problem.candidates[d.id][idx]
            for l in path.links:
                loads[l] = loads.get(l, 0.0) + d.volume
            for t in path.olts:
                fwd[t] = fwd.get(t, 0.0) + d.volume
        if any(v > caps[l] + tol for l, v in loads.items()):
            continue
        obj = pricer.objective(fwd, tol)
        if _better(obj, best_obj, cfg):
            best_obj, best = obj, combo
    if best is None:
        return _infeasible(problem, count)
    assignment = {d.id: ((i, d.volume),) for d, i in zip(routed, best)}
    return build_solution(problem, assignment, _status(problem), count, cfg)


# -- splittable ---------------------------------------------------------------

def _solve_splittable(problem: RoutingProblem, cfg: SolverConfig) -> RoutingSolution:
    """Enumerate OLT activation sets by size; solve an LP per set.

    With the set fixed, idle power is fixed and the rest (OLT forwarding
    power) is linear in path flows. Sets are tried smallest first and the
    search stops once idle power alone rules out improvement.
    """
    from scipy.optimize import linprog

    routed = problem.routable
    if not routed:
        return build_solution(problem, {}, _status(problem), 0, cfg)
    p = problem.params
    pricer = _Pricer(problem)
    caps = problem.topology.capacities()
    used_olts = sorted({t for d in routed for path in problem.candidates[d.id] for t in path.olts})
    best_obj, best = math.inf, None
    lps = 0
    for size in range(len(used_olts) + 1):
        if math.isfinite(best_obj) and (pricer.server_total + size * p.olt_idle_w
                                        >= best_obj - cfg.tie_width(best_obj)):
            break
        for subset in itertools.combinations(used_olts, size):
            allowed = set(subset)
            cols = [(k, i) for k, d in enumerate(routed)
                    for i, path in enumerate(problem.candidates[d.id]) if set(path.olts) <= allowed]
            if {k for k, _ in cols} != set(range(len(routed))):
                continue
            lps += 1
            x = _path_flow_lp(problem, routed, cols, caps, linprog)
            if x is None:
                continue
            assignment = _clean_split(routed, cols, x, cfg)
            loads_ok = _loads_within(problem, assignment, caps, cfg)
            if not loads_ok:
                continue
            obj = pricer.objective(_olt_forwarded(problem, assignment), cfg.feasibility_tol)
            if _better(obj, best_obj, cfg):
                best_obj, best = obj, assignment
    if best is None:
        return _infeasible(problem, lps)
    return build_solution(problem, best, _status(problem), lps, cfg)


def _path_flow_lp(problem, routed, cols, caps, linprog):
    slope = problem.params.olt_slope_w_per_gbps
    c = np.array([slope * len(problem.candidates[routed[k].id][i].olts) for k, i in cols])
    a_eq = np.zeros((len(routed), len(cols)))
    for j, (k, _) in enumerate(cols):
        a_eq[k, j] = 1.0
    b_eq = np.array([d.volume for d in routed])
    link_rows: dict[str, int] = {}
    entries = []
    for j, (k, i) in enumerate(cols):
        for l in problem.candidates[routed[k].id][i].links:
            row = link_rows.setdefault(l, len(link_rows))
            entries.append((row, j))
    a_ub = np.zeros((len(link_rows), len(cols)))
    for row, j in entries:
        a_ub[row, j] += 1.0
    b_ub = np.array([caps[l] for l in link_rows])
    res = linprog(c, A_ub=a_ub if len(link_rows) else None, b_ub=b_ub if len(link_rows) else None,
                  A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10})
    return res.x if res.status == 0 else None


def _clean_split(routed, cols, x, cfg) -> dict[str, tuple[tuple[int, float], ...]]:
    parts: dict[str, list[tuple[int, float]]] = {d.id: [] for d in routed}
    for (k, i), v in zip(cols, x):
        if v > cfg.feasibility_tol:
            parts[routed[k].id].append((i, float(v)))
    out = {}
    for d in routed:
        split = parts[d.id] or [(min(i for k, i in cols if routed[k] is d), d.volume)]
        split.sort(key=lambda e: -e[1])
        # the largest share absorbs rounding so shares sum to the volume exactly
        rest = sum(v for _, v in split[1:])
        split[0] = (split[0][0], d.volume - rest)
        out[d.id] = tuple(sorted(split))
    return out


def _loads_within(problem, assignment, caps, cfg) -> bool:
    loads: dict[str, float] = {}
    for did, parts in assignment.items():
        paths = problem.candidates[did]
        for i, v in parts:
            if v < 0:
                return False
            for l in paths[i].links:
                loads[l] = loads.get(l, 0.0) + v
    return all(v <= caps[l] + cfg.feasibility_tol for l, v in loads.items())


# -- verification ----------------------------------------------------------------

def verify(problem: RoutingProblem, s: RoutingSolution, cfg: SolverConfig | None = None) -> list[str]:
    """Independently recheck a solution. An empty list means it is valid."""
    cfg = cfg or SolverConfig()
    tol = cfg.feasibility_tol
    out: list[str] = []
    t = problem.topology
    if s.status == INFEASIBLE:
        if s.assignment:
            out.append("infeasible solution carries an assignment")
        return out
    by_id = {d.id: d for d in problem.demands}
    unroutable = set(problem.unroutable)
    if set(s.unroutable) != unroutable:
        out.append(f"unroutable set {sorted(s.unroutable)} != {sorted(unroutable)}")
    expected_status = PARTIAL if unroutable else OPTIMAL
    if s.status != expected_status:
        out.append(f"status {s.status!r} but expected {expected_status!r}")
    for d in problem.routable:
        if d.id not in s.assignment:
            out.append(f"routable demand {d.id} is not routed")

    loads: dict[str, float] = {}
    fwd: dict[str, float] = {}
    tx: dict[str, float] = {}
    rx: dict[str, float] = {}
    for did, parts in s.assignment.items():
        if did not in by_id:
            out.append(f"assignment for unknown demand {did}")
            continue
        d = by_id[did]
        if did in unroutable:
            out.append(f"unroutable demand {did} has an assignment")
            continue
        if problem.mode == SINGLE_PATH and len(parts) != 1:
            out.append(f"demand {did}: single-path mode needs one path, got {len(parts)}")
        total = 0.0
        paths = problem.candidates[did]
        for idx, vol in parts:
            if not 0 <= idx < len(paths):
                out.append(f"demand {did}: path index {idx} out of range")
                continue
            if vol < -tol:
                out.append(f"demand {did}: negative flow {vol}")
            total += vol
            path = paths[idx]
            problem_path = _check_path(t, path, d)
            if problem_path:
                out.append(f"demand {did}: {problem_path}")
            for l in path.links:
                loads[l] = loads.get(l, 0.0) + vol
            for olt in path.olts:
                fwd[olt] = fwd.get(olt, 0.0) + vol
        if abs(total - d.volume) > tol:
            out.append(f"conservation: demand {did} carries {total} of {d.volume} Gbps")
        tx[d.src] = tx.get(d.src, 0.0) + d.volume
        rx[d.dst] = rx.get(d.dst, 0.0) + d.volume

    for l in sorted(set(loads) | set(s.link_loads)):
        want, got = loads.get(l, 0.0), s.link_loads.get(l, 0.0)
        if abs(want - got) > tol:
            out.append(f"conservation: link {l} reports {got} Gbps, paths carry {want} Gbps")
        if l in t.link_map:
            cap = t.link_map[l].capacity
            if max(want, got) > cap + tol:
                out.append(f"capacity: link {l} load {max(want, got)} exceeds {cap} Gbps")
        else:
            out.append(f"link {l} is not a live link")
    for olt in sorted(set(fwd) | set(s.olt_forwarded)):
        want, got = fwd.get(olt, 0.0), s.olt_forwarded.get(olt, 0.0)
        if abs(want - got) > tol:
            out.append(f"olt {olt} reports {got} Gbps forwarded, paths carry {want}")
    active_olts = {o for o, f in fwd.items() if f > tol}
    if set(s.active_olts) != active_olts:
        out.append(f"active OLTs {sorted(s.active_olts)} != forwarding OLTs {sorted(active_olts)}")
    endpoints = set(tx) | set(rx)
    if not endpoints <= set(s.active_servers):
        out.append(f"inactive endpoint servers: {sorted(endpoints - set(s.active_servers))}")
    for name, want, got in (("tx", tx, s.server_tx), ("rx", rx, s.server_rx)):
        for srv in sorted(set(want) | set(got)):
            if abs(want.get(srv, 0.0) - got.get(srv, 0.0)) > tol:
                out.append(f"server {srv} {name} {got.get(srv, 0.0)} != {want.get(srv, 0.0)}")
    recomputed = metrics.total_power(s, problem.params).total_w
    if not math.isclose(recomputed, s.objective_value, rel_tol=cfg.objective_tol, abs_tol=0.0):
        if not (recomputed == 0.0 and s.objective_value == 0.0):
            out.append(f"objective mismatch: reported {s.objective_value} W, recomputed {recomputed} W")
    return out


def _check_path(t: Topology, path: CandidatePath, d: Demand) -> str | None:
    if not path.links:
        return "empty path"
    here = d.src
    for lid in path.links:
        link = t.link_map.get(lid)
        if link is None:
            return f"path uses missing link {lid}"
        if link.src != here:
            return f"path is broken at {lid}"
        here = link.dst
    if here != d.dst:
        return f"path ends at {here}, not {d.dst}"
    return None


# -- documents ---------------------------------------------------------------------

def read_demands(path: str | Path) -> list[Demand]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    items = doc["demands"] if isinstance(doc, dict) else doc
    return [Demand(str(e["id"]), e["src"], e["dst"], float(e["volume"])) for e in items]


def write_demands(demands: Sequence[Demand], path: str | Path) -> Path:
    path = Path(path)
    doc = {"demands": [d.to_dict() for d in demands]}
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


def dump_solution(problem: RoutingProblem, s: RoutingSolution) -> dict:
    """Self-contained document: problem, routing, activations, loads, objective."""
    return {
        "topology": save_topology(problem.topology),
        "mode": problem.mode,
        "demands": [d.to_dict() for d in problem.demands],
        "processing": dict(sorted(problem.processing.items())),
        "candidates": {d.id: [list(p.links) for p in problem.candidates[d.id]]
                       for d in problem.demands},
        "solution": {
            "status": s.status,
            "assignment": {d: [[i, v] for i, v in parts] for d, parts in s.assignment.items()},
            "active_servers": sorted(s.active_servers),
            "active_olts": sorted(s.active_olts),
            "link_loads": s.link_loads,
            "olt_forwarded": s.olt_forwarded,
            "server_tx": dict(sorted(s.server_tx.items())),
            "server_rx": dict(sorted(s.server_rx.items())),
            "server_proc": s.server_proc,
            "objective_value": s.objective_value if math.isfinite(s.objective_value) else None,
            "unroutable": list(s.unroutable),
        },
    }


def load_dump(doc: dict) -> tuple[RoutingProblem, RoutingSolution]:
    t = load_topology(doc["topology"])
    demands = tuple(Demand(e["id"], e["src"], e["dst"], float(e["volume"])) for e in doc["demands"])
    cands = {did: tuple(_path_from_links(t, links) for links in paths)
             for did, paths in doc["candidates"].items()}
    problem = RoutingProblem(t, demands, doc["mode"], cands, dict(doc.get("processing", {})))
    s = doc["solution"]
    assignment = {d: tuple((int(i), float(v)) for i, v in parts) for d, parts in s["assignment"].items()}
    routes = {}
    for did, parts in assignment.items():
        paths = cands.get(did, ())
        routes[did] = tuple((paths[i], v) for i, v in parts if 0 <= i < len(paths))
    by_id = {d.id: d for d in demands}
    sol = RoutingSolution(
        mode=doc["mode"],
        status=s["status"],
        assignment=assignment,
        routes=routes,
        endpoints={did: (by_id[did].src, by_id[did].dst) for did in assignment if did in by_id},
        active_servers=frozenset(s["active_servers"]),
        active_olts=frozenset(s["active_olts"]),
        link_loads={k: float(v) for k, v in s["link_loads"].items()},
        olt_forwarded={k: float(v) for k, v in s["olt_forwarded"].items()},
        server_tx={k: float(v) for k, v in s["server_tx"].items()},
        server_rx={k: float(v) for k, v in s["server_rx"].items()},
        server_proc={k: float(v) for k, v in s.get("server_proc", {}).items()},
        objective_value=math.inf if s["objective_value"] is None else float(s["objective_value"]),
        unroutable=tuple(s.get("unroutable", ())),
    )
    return problem, sol


def _path_from_links(t: Topology, links: Sequence[str]) -> CandidatePath:
    nodes = []
    for lid in links:
        link = t.link_record(lid)
        if not nodes:
            nodes.append(link.src)
        nodes.append(link.dst)
    olts = tuple(n for n in nodes if n in t.node_map and t.kind(n) is DeviceKind.OLT)
    return CandidatePath(tuple(links), tuple(nodes), olts)
