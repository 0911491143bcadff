"""Power and queuing-delay accounting for routed traffic.

Total power is the sum of per-server and per-OLT power. Passive devices
(couplers, splitters, AWGRs) never contribute. Delay is evaluated with an
M/M/1 sojourn time per queuing point, after routing has been decided.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict
from typing import TYPE_CHECKING, Mapping

if TYPE_CHECKING:
    from ponfabric.optimizer import RoutingSolution

ENDPOINTS = "endpoints"
PER_LINK = "per-link"
DELAY_MODELS = (ENDPOINTS, PER_LINK)


class UnstableQueueError(ValueError):
    """Raised when offered load reaches or exceeds the service rate."""


class UtilizationClamped(UserWarning):
    """Server traffic exceeded its data rate; utilization was clamped to 1."""


@dataclass(frozen=True)
class DeviceParams:
    """Device constants. Defaults are the reference hardware values."""

    server_max_w: float = 301.0
    server_idle_w: float = 201.0
    server_rate_gbps: float = 1.0
    onu_w: float = 2.5
    onu_rate_gbps: float = 10.0
    olt_max_w: float = 1940.0
    olt_idle_w: float = 60.0
    olt_rate_gbps: float = 8600.0
    link_capacity_gbps: float = 10.0
    # 1500-byte packets
    packet_bits: float = 12000.0

    def __post_init__(self):
        for name in ("server", "olt"):
            idle = getattr(self, f"{name}_idle_w")
            peak = getattr(self, f"{name}_max_w")
            if not peak >= idle >= 0:
                raise ValueError(f"{name}: need max >= idle >= 0, got {peak}, {idle}")
        if self.onu_w < 0:
            raise ValueError("onu_w must be >= 0")
        for name in ("server_rate_gbps", "onu_rate_gbps", "olt_rate_gbps",
                     "link_capacity_gbps", "packet_bits"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def olt_slope_w_per_gbps(self) -> float:
        return (self.olt_max_w - self.olt_idle_w) / self.olt_rate_gbps

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_PARAMS = DeviceParams()


@dataclass(frozen=True)
class PowerReport:
    total_w: float
    per_server_w: dict[str, float]
    per_olt_w: dict[str, float]
    breakdown: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class DelayReport:
    model: str
    per_demand_us: dict[str, float]
    mean_us: float
    max_us: float
    per_device_delay_us: dict[str, float]
    unstable: tuple[str, ...] = ()

    @property
    def finite(self) -> bool:
        return not self.unstable


def server_utilization(tx: float, rx: float, proc: float = 0.0,
                       p: DeviceParams = DEFAULT_PARAMS) -> tuple[float, bool]:
    """Return ``(utilization, clamped)`` for a server's traffic mix."""
    if tx < 0 or rx < 0 or proc < 0:
        raise ValueError(f"negative traffic: tx={tx}, rx={rx}, proc={proc}")
    raw = (tx + rx + proc) / p.server_rate_gbps
    return min(1.0, raw), raw > 1.0


def server_power(active: bool, tx: float = 0.0, rx: float = 0.0, proc: float = 0.0,
                 p: DeviceParams = DEFAULT_PARAMS) -> float:
    """Idle + utilization-proportional + ONU power of one server, in watts.

    Utilization is ``(tx + rx + proc) / server_rate``; anything beyond the
    rate is clamped to 1 and flagged with :class:`UtilizationClamped`.
    """
    u, clamped = server_utilization(tx, rx, proc, p)
    if not active:
        return 0.0
    if clamped:
        warnings.warn(f"server load {tx + rx + proc:g} Gbps exceeds rate "
                      f"{p.server_rate_gbps:g} Gbps", UtilizationClamped, stacklevel=2)
    return p.server_idle_w + (p.server_max_w - p.server_idle_w) * u + p.onu_w


def olt_power(active: bool, forwarded: float = 0.0, p: DeviceParams = DEFAULT_PARAMS) -> float:
    """Idle + forwarding-proportional power of one OLT switch, in watts."""
    if forwarded < 0:
        raise ValueError(f"negative forwarded traffic: {forwarded}")
    if forwarded > p.olt_rate_gbps:
        raise ValueError(f"forwarded traffic {forwarded} exceeds OLT rate {p.olt_rate_gbps}")
    if not active:
        return 0.0
    return p.olt_idle_w + p.olt_slope_w_per_gbps * forwarded


def total_power(solution: "RoutingSolution", p: DeviceParams = DEFAULT_PARAMS) -> PowerReport:
    """Sum server and OLT power over the devices a solution activates."""
    per_server = {}
    idle = prop = onu = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UtilizationClamped)
        for s in sorted(solution.active_servers):
            tx = solution.server_tx.get(s, 0.0)
            rx = solution.server_rx.get(s, 0.0)
            proc = solution.server_proc.get(s, 0.0)
            per_server[s] = server_power(True, tx, rx, proc, p)
            u, _ = server_utilization(tx, rx, proc, p)
            idle += p.server_idle_w
            prop += (p.server_max_w - p.server_idle_w) * u
            onu += p.onu_w
    per_olt = {}
    olt_idle = olt_prop = 0.0
    for t in sorted(solution.active_olts):
        fwd = solution.olt_forwarded.get(t, 0.0)
        per_olt[t] = olt_power(True, fwd, p)
        olt_idle += p.olt_idle_w
        olt_prop += p.olt_slope_w_per_gbps * fwd
    total = sum(per_server.values()) + sum(per_olt.values())
    breakdown = {
        "server_idle_w": idle,
        "server_proportional_w": prop,
        "onu_w": onu,
        "olt_idle_w": olt_idle,
        "olt_proportional_w": olt_prop,
    }
    return PowerReport(total, per_server, per_olt, breakdown)


def mm1_delay(load: float, rate: float, packet_bits: float = DEFAULT_PARAMS.packet_bits) -> float:
    """M/M/1 sojourn time in microseconds per packet.

    ``load`` and ``rate`` are in Gbps; with packet-normalized arrival and
    service rates the sojourn ``1/(mu - lambda)`` reduces to
    ``packet_bits / (rate - load)``.

    >>> mm1_delay(0.2, 1.0)
    15.0
    """
    if load < 0:
        raise ValueError(f"negative load: {load}")
    if rate <= 0 or packet_bits <= 0:
        raise ValueError("rate and packet_bits must be > 0")
    if load >= rate:
        raise UnstableQueueError(f"load {load:g} Gbps >= rate {rate:g} Gbps")
    # bits / (Gbps * 1e9) seconds -> * 1e6 microseconds
    return packet_bits / ((rate - load) * 1e3)


def _safe_mm1(load: float, rate: float, packet_bits: float) -> float:
    try:
        return mm1_delay(load, rate, packet_bits)
    except UnstableQueueError:
        return math.inf


def solution_delay(solution: "RoutingSolution", p: DeviceParams = DEFAULT_PARAMS,
                   model: str = ENDPOINTS,
                   capacities: Mapping[str, float] | None = None) -> DelayReport:
    """Per-demand queuing delay of a routed solution.

    ``endpoints``: source egress + destination ingress server queues, plus
    one queue per traversed OLT. ``per-link``: one queue per traversed link,
    served at that link's capacity (``capacities`` defaults to the uniform
    link capacity in ``p``).

    Unstable queuing points yield ``inf`` and are listed in ``unstable``.
    """
    if model not in DELAY_MODELS:
        raise ValueError(f"unknown delay model {model!r}; expected one of {DELAY_MODELS}")
    bits = p.packet_bits
    devices: dict[str, float] = {}
    per_demand: dict[str, float] = {}
    unstable: set[str] = set()

    def queue(name, load, rate):
        if name not in devices:
            devices[name] = _safe_mm1(load, rate, bits)
            if math.isinf(devices[name]):
                unstable.add(name)
        return devices[name]

    for did, routes in solution.routes.items():
        src, dst = solution.endpoints[did]
        worst = 0.0
        for path, volume in routes:
            if model == ENDPOINTS:
                d = queue(src, solution.server_tx.get(src, 0.0), p.server_rate_gbps)
                d += queue(dst, solution.server_rx.get(dst, 0.0), p.server_rate_gbps)
                for olt in path.olts:
                    d += queue(olt, solution.olt_forwarded.get(olt, 0.0), p.olt_rate_gbps)
            else:
                d = 0.0
                for lid in path.links:
                    cap = capacities[lid] if capacities else p.link_capacity_gbps
                    d += queue(lid, solution.link_loads.get(lid, 0.0), cap)
            # split demands see their slowest branch
            worst = max(worst, d)
        per_demand[did] = worst
    values = list(per_demand.values())
    mean = sum(values) / len(values) if values else 0.0
    return DelayReport(model, per_demand, mean, max(values, default=0.0), devices,
                       tuple(sorted(u for u in unstable)))
