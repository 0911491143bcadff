"""Link-failure taxonomy, injection and system-down analysis."""

from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from ponfabric.topology import (
    DeviceKind,
    Direction,
    Topology,
    UnknownIdError,
    connected,
)


class FailureKind(str, enum.Enum):
    F1 = "F1"  # server - coupler
    F2 = "F2"  # coupler - AWGR
    F3 = "F3"  # AWGR - AWGR
    F4 = "F4"  # AWGR - splitter
    F5 = "F5"  # splitter - server


OLT_ATTACH = "olt-attach"
NF = "NF"
CUSTOM = "custom"

_KIND_BY_ENDPOINTS = {
    (DeviceKind.SERVER, DeviceKind.COUPLER): FailureKind.F1,
    (DeviceKind.COUPLER, DeviceKind.AWGR): FailureKind.F2,
    (DeviceKind.AWGR, DeviceKind.AWGR): FailureKind.F3,
    (DeviceKind.AWGR, DeviceKind.SPLITTER): FailureKind.F4,
    (DeviceKind.SPLITTER, DeviceKind.SERVER): FailureKind.F5,
}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class FailureScenario:
    failed_links: frozenset = frozenset()
    label: str = NF

    def __post_init__(self):
        object.__setattr__(self, "failed_links", frozenset(self.failed_links))
        valid = {NF, CUSTOM, *(k.value for k in FailureKind)}
        if self.label not in valid:
            raise ScenarioError(f"unknown scenario label {self.label!r}")
        if (self.label == NF) != (not self.failed_links):
            raise ScenarioError("label NF is used exactly when no link is failed")

    @classmethod
    def single(cls, t: Topology, link_id: str) -> "FailureScenario":
        kind = classify_link(t, link_id)
        label = kind.value if isinstance(kind, FailureKind) else CUSTOM
        return cls(frozenset([link_id]), label)

    def validate(self, t: Topology) -> None:
        """Check link ids exist and that single-kind labels are honest."""
        for lid in sorted(self.failed_links):
            if not t.knows_link(lid):
                raise UnknownIdError(f"unknown link id {lid!r}")
        if self.label in FailureKind.__members__:
            kinds = {classify_link(t, lid) for lid in self.failed_links}
            if kinds != {FailureKind(self.label)}:
                raise ScenarioError(f"scenario labelled {self.label} fails links of kinds "
                                    f"{sorted(str(getattr(k, 'value', k)) for k in kinds)}")

    def to_dict(self) -> dict:
        return {"label": self.label, "failed_links": sorted(self.failed_links)}

    @classmethod
    def from_dict(cls, doc: dict) -> "FailureScenario":
        return cls(frozenset(doc.get("failed_links", ())), doc.get("label", NF))


NO_FAILURE = FailureScenario()


@dataclass(frozen=True)
class DownReport:
    down_servers: frozenset = frozenset()
    dead_demands: frozenset = frozenset()

    @property
    def survivable(self) -> bool:
        return not self.dead_demands


def classify_link(t: Topology, link_id: str) -> FailureKind | str:
    """Failure class of a link, decided by its endpoint device kinds.

    Links touching an OLT return ``"olt-attach"``; they are outside the
    five-class taxonomy.
    """
    link = t.link_record(link_id)
    if link.direction is Direction.OLT_ATTACH:
        return OLT_ATTACH
    a, b = t.kind(link.src), t.kind(link.dst)
    kind = _KIND_BY_ENDPOINTS.get((a, b)) or _KIND_BY_ENDPOINTS.get((b, a))
    if kind is None:
        raise ValueError(f"link {link_id!r} ({a.value}->{b.value}) has no failure class")
    return kind


def links_of_kind(t: Topology, kind: FailureKind) -> list[str]:
    return [l.id for l in t.links if classify_link(t, l.id) == kind]


def enumerate_single_failures(t: Topology, kind: FailureKind | str) -> list[FailureScenario]:
    kind = FailureKind(kind)
    return [FailureScenario(frozenset([lid]), kind.value) for lid in sorted(links_of_kind(t, kind))]


def apply_failure(t: Topology, s: FailureScenario) -> Topology:
    """Return ``t`` without the scenario's links. ``t`` itself is untouched.

    Already-failed links are accepted, which makes the operation idempotent.
    """
    for lid in sorted(s.failed_links):
        if not t.knows_link(lid):
            raise UnknownIdError(f"unknown link id {lid!r}")
    kill = s.failed_links - t.failed
    if not kill:
        return t
    removed = tuple(l for l in t.links if l.id in kill)
    return replace(t, links=tuple(l for l in t.links if l.id not in kill),
                   failed_links=tuple(sorted(t.failed_links + removed, key=lambda l: l.id)))


def _reaches_fabric(t: Topology, server: str, upward: bool) -> bool:
    # walk uplinks away from (or downlinks into) the server until an AWGR
    adj = t.out_links if upward else t.in_links
    want = Direction.UPLINK if upward else Direction.DOWNLINK
    seen = {server}
    queue = deque([server])
    while queue:
        here = queue.popleft()
        for l in adj[here]:
            if l.direction is not want:
                continue
            nxt = l.dst if upward else l.src
            if t.kind(nxt) is DeviceKind.AWGR:
                return True
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return False


def down_analysis(t: Topology, s: FailureScenario, demands: Sequence) -> DownReport:
    """Which demands lose every path, and which of their endpoints are cut off.

    A server counts as down when it terminates a dead demand and either its
    whole upward side (server -> coupler -> AWGR) or its whole downward side
    (AWGR -> splitter -> server) is severed.
    """
    failed = apply_failure(t, s)
    dead = set()
    endpoints = set()
    for d in demands:
        if not connected(failed, d.src, d.dst):
            dead.add(d.id)
            endpoints.update((d.src, d.dst))
    down = {srv for srv in endpoints
            if not _reaches_fabric(failed, srv, True) or not _reaches_fabric(failed, srv, False)}
    return DownReport(frozenset(down), frozenset(dead))


def write_scenario(s: FailureScenario, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(s.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def read_scenario(path: str | Path) -> FailureScenario:
    return FailureScenario.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
