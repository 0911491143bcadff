"""Command-line entry point: ``ponfabric <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from ponfabric import metrics
from ponfabric.experiment import (
    PATTERNS,
    ExperimentSpec,
    emit_report,
    generate_demands,
    map_demands,
    run_sweep,
)
from ponfabric.failure import FailureKind, FailureScenario, apply_failure, classify_link
from ponfabric.metrics import DELAY_MODELS
from ponfabric.optimizer import (
    INFEASIBLE,
    MODES,
    dump_solution,
    formulate,
    load_dump,
    read_demands,
    solve,
    verify,
    write_demands,
)
from ponfabric.topology import (
    ARCHITECTURES,
    DEFAULT_SERVERS_PER_RACK,
    DeviceKind,
    build,
    write_topology,
)

BOTH = "both"


def _volume_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    if not 0 < lo <= hi:
        raise argparse.ArgumentTypeError(f"need 0 < LO <= HI, got {text!r}")
    return lo, hi


def _kind_list(text: str) -> tuple[str, ...]:
    if text.strip().lower() == "none":
        return ()
    kinds = tuple(k.strip().upper() for k in text.split(",") if k.strip())
    for k in kinds:
        if k not in FailureKind.__members__:
            raise argparse.ArgumentTypeError(f"unknown failure kind {k!r}")
    return kinds


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _add_fabric(p: argparse.ArgumentParser, both: bool = True) -> None:
    choices = (*ARCHITECTURES, BOTH) if both else ARCHITECTURES
    p.add_argument("--arch", choices=choices, default=None,
                   help="fabric: pon3, two-tier or both (default both)")
    p.add_argument("--servers-per-rack", type=_positive_int, default=None, metavar="N",
                   help="servers in each rack (default 4)")


def _add_demands(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("demands")
    g.add_argument("--demands", type=Path, metavar="PATH",
                   help="JSON demand file; PON 3 server ids are paired onto two-tier ids")
    g.add_argument("--pattern", choices=PATTERNS, default=None,
                   help="generated demand pattern (default permutation; pairs when "
                        "--demand-count is given)")
    g.add_argument("--demand-count", type=_positive_int, metavar="N",
                   help="number of distinct random server pairs")
    g.add_argument("--volume-range", type=_volume_range, default=None, metavar="LO:HI",
                   help="uniform demand volume range in Gbps (default 0.2:0.8)")
    g.add_argument("--seed", type=int, default=None, help="RNG seed (default 42)")


def _add_routing(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=MODES, default=None,
                   help="single-path (default) or splittable routing")
    p.add_argument("--delay-model", choices=DELAY_MODELS, default=None,
                   help="endpoints (default) or per-link M/M/1 accounting")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ponfabric",
        description="Failure-aware energy-minimizing routing on AWGR-based PON data-centre fabrics.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-topology", help="write topology config documents")
    _add_fabric(p)
    p.add_argument("--out", type=Path, default=Path("."), metavar="DIR", help="output directory")

    p = sub.add_parser("gen-demands", help="write a seeded demand file")
    _add_fabric(p)
    _add_demands(p)
    p.add_argument("--out", type=Path, default=Path("."), metavar="DIR", help="output directory")

    p = sub.add_parser("solve", help="route one demand set under one failure scenario")
    _add_fabric(p)
    _add_demands(p)
    _add_routing(p)
    p.add_argument("--failure", default="none", metavar="none|LINKID[,LINKID...]",
                   help="link ids to fail (default none)")
    p.add_argument("--out", type=Path, default=None, metavar="DIR",
                   help="write <arch>.solution.json dumps here")

    p = sub.add_parser("sweep", help="NF plus every single-link failure of the listed kinds")
    _add_fabric(p)
    _add_demands(p)
    _add_routing(p)
    p.add_argument("--failures", type=_kind_list, default=None, metavar="KINDLIST",
                   help="comma-separated failure kinds, e.g. F1,F3 (default F1..F5), or none")
    p.add_argument("--config", type=Path, metavar="PATH",
                   help="JSON experiment spec; flags given on the command line win")
    p.add_argument("--jobs", type=_positive_int, default=None, metavar="N",
                   help="worker processes for scenario evaluation (default 1)")
    p.add_argument("--timing", action="store_true",
                   help="fill runtime_ms (makes the CSV output run-dependent)")
    p.add_argument("--out", type=Path, default=Path("results"), metavar="DIR",
                   help="directory for CSV reports (default ./results)")

    p = sub.add_parser("verify", help="re-check a solution dump")
    p.add_argument("dump", type=Path, help="solution dump written by 'solve --out'")
    return parser


def _archs(arch: str | None) -> tuple[str, ...]:
    return ARCHITECTURES if arch in (None, BOTH) else (arch,)


def _spec_from_args(args, base: ExperimentSpec | None = None) -> ExperimentSpec:
    base = base or ExperimentSpec()
    changes = {}
    if args.arch is not None:
        changes["architectures"] = _archs(args.arch)
    if args.servers_per_rack is not None:
        changes["servers_per_rack"] = args.servers_per_rack
    pattern = args.pattern
    if pattern is None and args.demand_count is not None:
        pattern = "pairs"
    for key, value in (("pattern", pattern), ("demand_count", args.demand_count),
                       ("volume_range", args.volume_range), ("seed", args.seed)):
        if value is not None:
            changes[key] = value
    for key in ("mode", "delay_model", "failures", "jobs"):
        value = getattr(args, key, None)
        if value is not None:
            changes[key] = value
    if getattr(args, "timing", False):
        changes["record_runtime"] = True
    return replace(base, **changes)


def _load_spec(path: Path) -> ExperimentSpec:
    doc = json.loads(path.read_text(encoding="utf-8"))
    for key in ("architectures", "volume_range", "failures"):
        if key in doc:
            doc[key] = tuple(doc[key])
    doc.pop("solver", None)
    return ExperimentSpec(**doc)


def _echo(config: dict) -> None:
    print("config: " + json.dumps(config, sort_keys=True, default=str))


def _demands(args, spec: ExperimentSpec):
    if args.demands is not None:
        return read_demands(args.demands)
    return generate_demands(spec)


def cmd_build(args) -> int:
    n = args.servers_per_rack or DEFAULT_SERVERS_PER_RACK
    _echo({"command": "build-topology", "architectures": list(_archs(args.arch)),
           "servers_per_rack": n, "out": str(args.out)})
    args.out.mkdir(parents=True, exist_ok=True)
    for arch in _archs(args.arch):
        t = build(arch, n)
        path = write_topology(t, args.out / f"{arch}.topology.json")
        counts = ", ".join(f"{t.count(k)} {k.value}" for k in DeviceKind)
        print(f"{arch}: {counts}, {len(t.links)} links -> {path}")
    return 0


def cmd_gen(args) -> int:
    spec = _spec_from_args(args)
    _echo({"command": "gen-demands", **spec.to_dict(), "out": str(args.out)})
    args.out.mkdir(parents=True, exist_ok=True)
    base = _demands(args, spec)
    for arch in _archs(args.arch):
        demands = map_demands(base, build(arch, spec.servers_per_rack))
        path = write_demands(demands, args.out / f"{arch}.demands.json")
        print(f"{arch}: {len(demands)} demands -> {path}")
    return 0


def _scenario(t, text: str) -> FailureScenario:
    ids = [x.strip() for x in text.split(",") if x.strip()]
    if not ids or ids == ["none"]:
        return FailureScenario()
    kinds = {classify_link(t, lid) for lid in ids}
    label = next(iter(kinds)).value if len(kinds) == 1 and isinstance(next(iter(kinds)), FailureKind) \
        else "custom"
    return FailureScenario(frozenset(ids), label)


def cmd_solve(args) -> int:
    spec = _spec_from_args(args)
    _echo({"command": "solve", **spec.to_dict(), "failure": args.failure,
           "demands": str(args.demands) if args.demands else None,
           "out": str(args.out) if args.out else None})
    base = _demands(args, spec)
    fabrics = [build(arch, spec.servers_per_rack) for arch in spec.architectures]
    # reject unknown link ids before solving anything
    scenarios = [_scenario(t, args.failure) for t in fabrics]
    code = 0
    for t, scenario in zip(fabrics, scenarios):
        arch = t.architecture
        failed = apply_failure(t, scenario)
        problem = formulate(failed, map_demands(base, t), spec.mode, spec.max_paths)
        sol = solve(problem, spec.solver)
        line = f"{arch} [{scenario.label}]: status={sol.status}"
        if sol.status != INFEASIBLE:
            delay = metrics.solution_delay(sol, problem.params, spec.delay_model, failed.capacities())
            line += (f" total_w={sol.objective_value:.6f} mean_delay_us={delay.mean_us:.6f}"
                     f" olt_forwarded_gbps={sol.olt_traffic:.6f}")
        if sol.unroutable:
            line += f" unroutable={','.join(sol.unroutable)}"
        print(line)
        if sol.status == INFEASIBLE:
            code = 1
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            path = args.out / f"{arch}.solution.json"
            path.write_text(json.dumps(dump_solution(problem, sol), indent=2) + "\n", encoding="utf-8")
            print(f"  dump -> {path}")
    return code


def cmd_sweep(args) -> int:
    base = _load_spec(args.config) if args.config else None
    spec = _spec_from_args(args, base)
    _echo({"command": "sweep", **spec.to_dict(),
           "demands": str(args.demands) if args.demands else None, "out": str(args.out)})
    demands = _demands(args, spec)
    reports = run_sweep(spec, demands)
    print(emit_report(reports, fmt="table"), end="")
    for path in emit_report(reports, args.out, "csv", spec, demands):
        print(f"wrote {path}")
    errors = [r for r in reports if r.error]
    for r in errors:
        print(f"scenario error ({r.architecture} {sorted(r.scenario.failed_links)}): {r.error}",
              file=sys.stderr)
    return 1 if errors else 0


def cmd_verify(args) -> int:
    _echo({"command": "verify", "dump": str(args.dump)})
    problem, sol = load_dump(json.loads(args.dump.read_text(encoding="utf-8")))
    violations = verify(problem, sol)
    for v in violations:
        print(f"violation: {v}")
    print("valid" if not violations else f"{len(violations)} violation(s)")
    return 1 if violations else 0


COMMANDS = {"build-topology": cmd_build, "gen-demands": cmd_gen, "solve": cmd_solve,
            "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("ignore", metrics.UtilizationClamped)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
