"""Device/link graph for AWGR-based PON data-centre fabrics.

Two builders are provided:

* :func:`build_pon3` - four racks, one coupler and one splitter per rack,
  two 4x4 AWGRs and a single OLT.
* :func:`build_two_tier` - four cells of four racks, two couplers and two
  splitters per cell, two first-tier and two second-tier 8x8 AWGRs and four
  OLTs.

AWGRs are treated as wavelength-agnostic crossbars; only physical links
carry a capacity. Topologies are immutable.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Optional

from ponfabric.metrics import DeviceParams

PON3 = "pon3"
TWO_TIER = "two-tier"
ARCHITECTURES = (PON3, TWO_TIER)

DEFAULT_SERVERS_PER_RACK = 4
DEFAULT_MAX_PATHS = 16
# guard against path explosion in hand-written configs
ENUMERATION_LIMIT = 100_000


class DeviceKind(str, enum.Enum):
    SERVER = "server"
    COUPLER = "coupler"
    AWGR = "awgr"
    SPLITTER = "splitter"
    OLT = "olt"

    @property
    def passive(self) -> bool:
        return self in (DeviceKind.COUPLER, DeviceKind.AWGR, DeviceKind.SPLITTER)


class Direction(str, enum.Enum):
    UPLINK = "uplink"
    DOWNLINK = "downlink"
    INTER_AWGR = "inter-awgr"
    OLT_ATTACH = "olt-attach"


# (direction) -> allowed (from kind, to kind) pairs
_LAYER_RULES = {
    Direction.UPLINK: {(DeviceKind.SERVER, DeviceKind.COUPLER),
                       (DeviceKind.COUPLER, DeviceKind.AWGR)},
    Direction.DOWNLINK: {(DeviceKind.AWGR, DeviceKind.SPLITTER),
                         (DeviceKind.SPLITTER, DeviceKind.SERVER)},
    Direction.INTER_AWGR: {(DeviceKind.AWGR, DeviceKind.AWGR)},
    Direction.OLT_ATTACH: {(DeviceKind.AWGR, DeviceKind.OLT),
                           (DeviceKind.OLT, DeviceKind.AWGR)},
}


class TopologyError(ValueError):
    """Base class for invalid topologies and config documents."""


class SchemaError(TopologyError):
    pass


class LayerOrderError(TopologyError):
    pass


class DuplicateIdError(TopologyError):
    pass


class UnknownIdError(TopologyError, KeyError):
    pass


class PathExplosionError(TopologyError):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    kind: DeviceKind
    cell: Optional[int] = None
    rack: Optional[int] = None
    slot: Optional[int] = None
    tier: Optional[int] = None

    @property
    def locus(self) -> tuple:
        return (self.cell, self.rack, self.slot)


@dataclass(frozen=True)
class Link:
    id: str
    src: str
    dst: str
    capacity: float
    direction: Direction


@dataclass(frozen=True)
class TopologyParams:
    architecture: str
    servers_per_rack: int
    racks_per_cell: int
    cells: Optional[int]
    awgr_ports: int
    device: DeviceParams = field(default_factory=DeviceParams)


@dataclass(frozen=True)
class CandidatePath:
    """A simple device path between two servers, as a sequence of links."""

    links: tuple[str, ...]
    nodes: tuple[str, ...]
    olts: tuple[str, ...] = ()

    @property
    def olt_relay(self) -> bool:
        return bool(self.olts)

    @property
    def hops(self) -> int:
        return len(self.links)

    def sort_key(self):
        return (self.olt_relay, self.hops, self.links)


@dataclass(frozen=True)
class Topology:
    params: TopologyParams
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    # links removed by failure injection
    failed_links: tuple[Link, ...] = ()

    def __post_init__(self):
        _check_integrity(self.nodes, self.links + self.failed_links)

    @cached_property
    def failed(self) -> frozenset:
        return frozenset(l.id for l in self.failed_links)

    @cached_property
    def node_map(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def link_map(self) -> dict[str, Link]:
        return {l.id: l for l in self.links}

    @cached_property
    def out_links(self) -> dict[str, tuple[Link, ...]]:
        out: dict[str, list[Link]] = {n.id: [] for n in self.nodes}
        for l in self.links:
            out[l.src].append(l)
        return {k: tuple(sorted(v, key=lambda l: l.id)) for k, v in out.items()}

    @cached_property
    def in_links(self) -> dict[str, tuple[Link, ...]]:
        inn: dict[str, list[Link]] = {n.id: [] for n in self.nodes}
        for l in self.links:
            inn[l.dst].append(l)
        return {k: tuple(sorted(v, key=lambda l: l.id)) for k, v in inn.items()}

    @property
    def architecture(self) -> str:
        return self.params.architecture

    def kind(self, node_id: str) -> DeviceKind:
        return self.node_map[node_id].kind

    def nodes_of(self, kind: DeviceKind) -> list[Node]:
        return [n for n in self.nodes if n.kind is kind]

    @property
    def servers(self) -> list[str]:
        return [n.id for n in self.nodes if n.kind is DeviceKind.SERVER]

    @property
    def olts(self) -> list[str]:
        return [n.id for n in self.nodes if n.kind is DeviceKind.OLT]

    def has_link(self, link_id: str) -> bool:
        return link_id in self.link_map

    def knows_link(self, link_id: str) -> bool:
        return link_id in self.link_map or link_id in self.failed

    def link_record(self, link_id: str) -> Link:
        """Live or failed link by id."""
        if link_id in self.link_map:
            return self.link_map[link_id]
        for l in self.failed_links:
            if l.id == link_id:
                return l
        raise UnknownIdError(f"unknown link id {link_id!r}")

    def capacities(self) -> dict[str, float]:
        return {l.id: l.capacity for l in self.links}

    def count(self, kind: DeviceKind) -> int:
        return sum(1 for n in self.nodes if n.kind is kind)


def _check_integrity(nodes: Iterable[Node], links: Iterable[Link]) -> None:
    kinds: dict[str, DeviceKind] = {}
    for n in nodes:
        if n.id in kinds:
            raise DuplicateIdError(f"duplicate node id {n.id!r}")
        kinds[n.id] = n.kind
    seen = set()
    for l in links:
        if l.id in seen or l.id in kinds:
            raise DuplicateIdError(f"duplicate link id {l.id!r}")
        seen.add(l.id)
        if not l.capacity > 0:
            raise TopologyError(f"link {l.id!r}: capacity must be > 0, got {l.capacity}")
        for end in (l.src, l.dst):
            if end not in kinds:
                raise UnknownIdError(f"link {l.id!r} references unknown node {end!r}")
        if l.src == l.dst:
            raise LayerOrderError(f"link {l.id!r} is a self-loop on {l.src!r}")
        pair = (kinds[l.src], kinds[l.dst])
        if pair not in _LAYER_RULES[l.direction]:
            raise LayerOrderError(
                f"link {l.id!r}: {pair[0].value} -> {pair[1].value} is not a valid "
                f"{l.direction.value}")


def _link_id(src: str, dst: str, k: int | None = None) -> str:
    return f"{src}>{dst}" if k is None else f"{src}>{dst}#{k}"


def _link(src, dst, direction, cap, k=None) -> Link:
    return Link(_link_id(src, dst, k), src, dst, cap, direction)


def build_pon3(servers_per_rack: int = DEFAULT_SERVERS_PER_RACK,
               device: DeviceParams | None = None) -> Topology:
    """Single-tier AWGR fabric with four racks and one OLT.

    Racks 0-1 hang off ``awgr-1`` and racks 2-3 off ``awgr-2``: each rack
    coupler has one fibre into its AWGR and each rack splitter one fibre out
    of it. The AWGRs are joined by one inter-AWGR link per direction, and
    each AWGR has one port to the OLT and one back from it, so every 4x4
    port is used. Between any two servers there is exactly one OLT-free
    path; pairs whose racks sit on different AWGRs additionally have an OLT
    relay path that bypasses the inter-AWGR link.
    """
    if servers_per_rack < 1:
        raise ValueError("servers_per_rack must be >= 1")
    device = device or DeviceParams()
    cap = device.link_capacity_gbps
    nodes: list[Node] = []
    links: list[Link] = []
    awgrs = ("awgr-1", "awgr-2")
    for a in awgrs:
        nodes.append(Node(a, DeviceKind.AWGR, tier=1))
    olt = "olt-0"
    nodes.append(Node(olt, DeviceKind.OLT))
    for r in range(4):
        cpl, spl = f"cpl-r{r}", f"spl-r{r}"
        awgr = awgrs[r // 2]
        nodes += [Node(cpl, DeviceKind.COUPLER, rack=r), Node(spl, DeviceKind.SPLITTER, rack=r)]
        links.append(_link(cpl, awgr, Direction.UPLINK, cap))
        links.append(_link(awgr, spl, Direction.DOWNLINK, cap))
        for k in range(servers_per_rack):
            srv = f"srv-r{r}-s{k}"
            nodes.append(Node(srv, DeviceKind.SERVER, rack=r, slot=k))
            links.append(_link(srv, cpl, Direction.UPLINK, cap))
            links.append(_link(spl, srv, Direction.DOWNLINK, cap))
    a1, a2 = awgrs
    links += [
        _link(a1, a2, Direction.INTER_AWGR, cap),
        _link(a2, a1, Direction.INTER_AWGR, cap),
        _link(a1, olt, Direction.OLT_ATTACH, cap),
        _link(olt, a2, Direction.OLT_ATTACH, cap),
        _link(a2, olt, Direction.OLT_ATTACH, cap),
        _link(olt, a1, Direction.OLT_ATTACH, cap),
    ]
    params = TopologyParams(PON3, servers_per_rack, racks_per_cell=4, cells=None,
                            awgr_ports=4, device=device)
    return _finish(params, nodes, links)


def build_two_tier(servers_per_rack: int = DEFAULT_SERVERS_PER_RACK,
                   device: DeviceParams | None = None) -> Topology:
    """Two-tier cascaded-AWGR fabric: 4 cells x 4 racks, four OLTs.

    Every server has uplink A (coupler A -> first-tier ``awgr-x``) and
    uplink B (coupler B -> ``awgr-y``), and is fed by splitter A (from
    ``awgr-x``) and splitter B (from ``awgr-y``). Each first-tier AWGR has
    two links up to and two links down from each second-tier AWGR
    (``awgr-u``, ``awgr-v``). OLTs 0-1 take traffic from ``awgr-u`` and
    return it into ``awgr-v``; OLTs 2-3 do the reverse.
    """
    if servers_per_rack < 1:
        raise ValueError("servers_per_rack must be >= 1")
    device = device or DeviceParams()
    cap = device.link_capacity_gbps
    nodes: list[Node] = []
    links: list[Link] = []
    first = {"a": "awgr-x", "b": "awgr-y"}
    second = ("awgr-u", "awgr-v")
    for a in first.values():
        nodes.append(Node(a, DeviceKind.AWGR, tier=1))
    for a in second:
        nodes.append(Node(a, DeviceKind.AWGR, tier=2))
    for c in range(4):
        for plane, awgr in first.items():
            cpl, spl = f"cpl-c{c}-{plane}", f"spl-c{c}-{plane}"
            nodes += [Node(cpl, DeviceKind.COUPLER, cell=c),
                      Node(spl, DeviceKind.SPLITTER, cell=c)]
            links.append(_link(cpl, awgr, Direction.UPLINK, cap))
            links.append(_link(awgr, spl, Direction.DOWNLINK, cap))
        for r in range(4):
            for k in range(servers_per_rack):
                srv = f"srv-c{c}-r{r}-s{k}"
                nodes.append(Node(srv, DeviceKind.SERVER, cell=c, rack=r, slot=k))
                for plane in first:
                    links.append(_link(srv, f"cpl-c{c}-{plane}", Direction.UPLINK, cap))
                    links.append(_link(f"spl-c{c}-{plane}", srv, Direction.DOWNLINK, cap))
    for lower in first.values():
        for upper in second:
            for k in range(2):
                links.append(_link(lower, upper, Direction.INTER_AWGR, cap, k))
                links.append(_link(upper, lower, Direction.INTER_AWGR, cap, k))
    for i in range(4):
        olt = f"olt-{i}"
        nodes.append(Node(olt, DeviceKind.OLT))
        up, down = second if i < 2 else second[::-1]
        links.append(_link(up, olt, Direction.OLT_ATTACH, cap))
        links.append(_link(olt, down, Direction.OLT_ATTACH, cap))
    params = TopologyParams(TWO_TIER, servers_per_rack, racks_per_cell=4, cells=4,
                            awgr_ports=8, device=device)
    return _finish(params, nodes, links)


def _finish(params, nodes, links) -> Topology:
    return Topology(params, tuple(sorted(nodes, key=lambda n: n.id)),
                    tuple(sorted(links, key=lambda l: l.id)))


def build(architecture: str, servers_per_rack: int = DEFAULT_SERVERS_PER_RACK,
          device: DeviceParams | None = None) -> Topology:
    if architecture == PON3:
        return build_pon3(servers_per_rack, device)
    if architecture == TWO_TIER:
        return build_two_tier(servers_per_rack, device)
    raise ValueError(f"unknown architecture {architecture!r}; expected one of {ARCHITECTURES}")


# -- config documents -------------------------------------------------------

def topology_schema() -> dict:
    """The JSON schema that topology config documents must satisfy."""
    text = resources.files("ponfabric.schemas").joinpath("topology.schema.json").read_text("utf-8")
    return json.loads(text)


def save_topology(t: Topology) -> dict:
    """Serialize a topology into a config document (a JSON-compatible dict)."""
    p = t.params
    return {
        "params": {
            "architecture": p.architecture,
            "servers_per_rack": p.servers_per_rack,
            "racks_per_cell": p.racks_per_cell,
            "cells": p.cells,
            "awgr_ports": p.awgr_ports,
            "device": p.device.to_dict(),
        },
        "nodes": [
            {"id": n.id, "kind": n.kind.value,
             "locus": [n.cell, n.rack, n.slot], "tier": n.tier}
            for n in t.nodes
        ],
        "links": [_link_doc(l) for l in t.links],
        "failed": [_link_doc(l) for l in t.failed_links],
    }


def _link_doc(l: Link) -> dict:
    return {"id": l.id, "from": l.src, "to": l.dst,
            "capacity": l.capacity, "direction": l.direction.value}


def _doc_link(l: dict) -> Link:
    return Link(l["id"], l["from"], l["to"], float(l["capacity"]), Direction(l["direction"]))


def load_topology(doc: dict[str, Any]) -> Topology:
    """Build a topology from a config document.

    Raises:
        SchemaError: the document does not validate; the message names the
            offending field and its location.
        DuplicateIdError: two nodes or links share an id.
        LayerOrderError: a link's endpoint kinds do not match its direction.
    """
    import jsonschema

    validator = jsonschema.Draft202012Validator(topology_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(x) for x in e.absolute_path) or "<root>"
        raise SchemaError(f"at {where}: {e.message}")
    p = doc["params"]
    device = DeviceParams(**p.get("device", {}))
    params = TopologyParams(p["architecture"], p["servers_per_rack"], p["racks_per_cell"],
                            p.get("cells"), p["awgr_ports"], device)
    nodes = []
    for n in doc["nodes"]:
        cell, rack, slot = n.get("locus", [None, None, None])
        nodes.append(Node(n["id"], DeviceKind(n["kind"]), cell, rack, slot, n.get("tier")))
    links = tuple(_doc_link(l) for l in doc["links"])
    failed = tuple(_doc_link(l) for l in doc.get("failed", ()))
    return Topology(params, tuple(nodes), links, failed)


def write_topology(t: Topology, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(save_topology(t), indent=2) + "\n", encoding="utf-8")
    return path


def read_topology(path: str | Path) -> Topology:
    return load_topology(json.loads(Path(path).read_text(encoding="utf-8")))


def with_link_capacity(t: Topology, capacity: float) -> Topology:
    """Copy of ``t`` with every link capacity set to ``capacity``."""
    return replace(t, links=tuple(replace(l, capacity=capacity) for l in t.links))


# -- path enumeration ---------------------------------------------------------

# a path may only move forward through these phases
_PHASE = {Direction.UPLINK: 0, Direction.INTER_AWGR: 1, Direction.OLT_ATTACH: 1,
          Direction.DOWNLINK: 2}


def _check_endpoints(t: Topology, src: str, dst: str) -> None:
    for s in (src, dst):
        if s not in t.node_map:
            raise UnknownIdError(f"unknown node {s!r}")
        if t.kind(s) is not DeviceKind.SERVER:
            raise ValueError(f"{s!r} is not a server")
    if src == dst:
        raise ValueError("src and dst must differ")


def connected(t: Topology, src: str, dst: str) -> bool:
    """True when :func:`candidate_paths` would return at least one path.

    Same layering rules, but stops at the first path. Without a third
    server in the way, a device-revisiting walk can always be shortened to
    a simple one, so plain reachability over (node, phase) states suffices.
    """
    _check_endpoints(t, src, dst)
    seen = {(src, 0)}
    stack = [(src, 0)]
    while stack:
        here, phase = stack.pop()
        for link in t.out_links[here]:
            step = _PHASE[link.direction]
            if step < phase:
                continue
            nxt = link.dst
            if t.node_map[nxt].kind is DeviceKind.SERVER:
                if nxt == dst:
                    return True
                continue
            if (nxt, step) not in seen:
                seen.add((nxt, step))
                stack.append((nxt, step))
    return False


def candidate_paths(t: Topology, src: str, dst: str,
                    max_paths: int = DEFAULT_MAX_PATHS) -> list[CandidatePath]:
    """Enumerate simple layered paths from server ``src`` to server ``dst``.

    Paths never pass through a third server and never revisit a device.
    They are ordered OLT-free first, then by hop count, then by their link
    id sequence, and truncated to ``max_paths``. An empty list means the
    pair is disconnected.
    """
    _check_endpoints(t, src, dst)

    found: list[CandidatePath] = []
    out = t.out_links
    node_map = t.node_map
    link_ids: list[str] = []
    node_ids: list[str] = [src]
    visited = {src}
    budget = [ENUMERATION_LIMIT]

    def walk(here: str, phase: int) -> None:
        budget[0] -= 1
        if budget[0] < 0:
            raise PathExplosionError(f"more than {ENUMERATION_LIMIT} partial paths from {src!r}")
        for link in out[here]:
            nxt = link.dst
            step = _PHASE[link.direction]
            if step < phase or nxt in visited:
                continue
            if node_map[nxt].kind is DeviceKind.SERVER:
                if nxt == dst:
                    nodes = (*node_ids, nxt)
                    olts = tuple(n for n in nodes if node_map[n].kind is DeviceKind.OLT)
                    found.append(CandidatePath((*link_ids, link.id), nodes, olts))
                continue
            visited.add(nxt)
            link_ids.append(link.id)
            node_ids.append(nxt)
            walk(nxt, step)
            node_ids.pop()
            link_ids.pop()
            visited.discard(nxt)

    walk(src, 0)
    found.sort(key=CandidatePath.sort_key)
    return found[:max_paths]
