"""Network description: switches, links, and pre-computed secure paths.

The topology is loaded once from a JSON file and treated as immutable.
Paths are ordered lists of cross-connects written in Alice-to-Bob
orientation (in_port faces Alice, out_port faces Bob); fixed fiber
cabling between switches is implied by consecutive cross-connects and
derived at load time. resolve_active_path answers the one question the
rest of the system asks: given what the switches currently have
installed, which pre-computed path (if any) is fully lit end to end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .physics import CalibrationAnchors, ChannelParams, calibrate

LINK_KINDS = ("coupler", "mcf", "multihop")

Port = tuple[str, int]


class TopologyError(ValueError):
    """Malformed or internally inconsistent topology file."""


@dataclass(frozen=True)
class CrossConnect:
    switch: str
    in_port: int
    out_port: int

    def __post_init__(self):
        if self.in_port == self.out_port:
            raise TopologyError(
                f"cross-connect on {self.switch} maps port {self.in_port} to itself"
            )

    @property
    def ports(self) -> frozenset[int]:
        return frozenset((self.in_port, self.out_port))


@dataclass(frozen=True)
class LinkSpec:
    link_id: str
    kind: str
    hop_count: int
    channel: ChannelParams


@dataclass(frozen=True)
class PathSpec:
    path_id: str
    link_id: str
    cross_connects: tuple[CrossConnect, ...]

    def port_set(self) -> set[Port]:
        used: set[Port] = set()
        for cc in self.cross_connects:
            used.add((cc.switch, cc.in_port))
            used.add((cc.switch, cc.out_port))
        return used


@dataclass(frozen=True)
class Topology:
    switches: dict[str, int]  # switch id -> port count
    links: tuple[LinkSpec, ...]
    paths: tuple[PathSpec, ...]  # order is the QPM selection order
    alice_port: Port
    bob_port: Port
    cables: dict[Port, Port] = field(default_factory=dict)

    def link(self, link_id: str) -> LinkSpec:
        for link in self.links:
            if link.link_id == link_id:
                return link
        raise KeyError(link_id)

    def path(self, path_id: str) -> PathSpec:
        for path in self.paths:
            if path.path_id == path_id:
                return path
        raise KeyError(path_id)

    def link_for_path(self, path_id: str) -> LinkSpec:
        return self.link(self.path(path_id).link_id)

    def path_ids(self) -> list[str]:
        return [p.path_id for p in self.paths]


def _require(data: Mapping, key: str, where: str):
    if key not in data:
        raise TopologyError(f"{where}: missing required field '{key}'")
    return data[key]


def _parse_channel(data: Mapping, where: str) -> ChannelParams:
    if "calibrate" in data:
        anchors = data["calibrate"]
        return calibrate(
            CalibrationAnchors(
                baseline_skr_bps=_require(anchors, "baseline_skr_bps", where),
                baseline_qber=_require(anchors, "baseline_qber", where),
                knee_power_dbm=_require(anchors, "knee_power_dbm", where),
                death_power_dbm=_require(anchors, "death_power_dbm", where),
                suppression_db=_require(anchors, "suppression_db", where),
                ec_efficiency=anchors.get("ec_efficiency", 1.2),
            )
        )
    return ChannelParams(
        sifted_rate_cps=_require(data, "sifted_rate_cps", where),
        intrinsic_error=_require(data, "intrinsic_error", where),
        dark_rate_cps=_require(data, "dark_rate_cps", where),
        noise_coupling_cps_per_mw=_require(data, "noise_coupling_cps_per_mw", where),
        suppression_db=_require(data, "suppression_db", where),
        ec_efficiency=data.get("ec_efficiency", 1.2),
        knee_sharpness=data.get("knee_sharpness", 1.0),
    )


def _parse_endpoint(raw, name: str, switches: Mapping[str, int]) -> Port:
    if not (isinstance(raw, (list, tuple)) and len(raw) == 2):
        raise TopologyError(f"{name} must be a [switch, port] pair")
    sw, port = raw[0], raw[1]
    if sw not in switches:
        raise TopologyError(f"{name} references unknown switch '{sw}'")
    if not isinstance(port, int) or not 0 <= port < switches[sw]:
        raise TopologyError(f"{name} port {port} out of range on switch '{sw}'")
    return (sw, port)


def _check_port(sw: str, port: int, switches: Mapping[str, int], where: str):
    if sw not in switches:
        raise TopologyError(f"{where} references unknown switch '{sw}'")
    if not isinstance(port, int) or not 0 <= port < switches[sw]:
        raise TopologyError(f"{where} port {port} out of range on switch '{sw}'")


def _derive_cables(topo_paths: Iterable[PathSpec]) -> dict[Port, Port]:
    """Fixed fiber runs implied by consecutive cross-connects of each path."""
    cables: dict[Port, Port] = {}
    for path in topo_paths:
        ccs = path.cross_connects
        for left, right in zip(ccs, ccs[1:]):
            a: Port = (left.switch, left.out_port)
            b: Port = (right.switch, right.in_port)
            for end, other in ((a, b), (b, a)):
                if cables.get(end, other) != other:
                    raise TopologyError(
                        f"path '{path.path_id}': port {end} would be cabled to "
                        f"both {cables[end]} and {other}"
                    )
            cables[a] = b
            cables[b] = a
    return cables


def parse_topology(data: Mapping) -> Topology:
    """Validate a parsed topology document and build the immutable value."""
    switches: dict[str, int] = {}
    for entry in _require(data, "switches", "topology"):
        sw_id = _require(entry, "id", "switch entry")
        ports = _require(entry, "ports", "switch entry")
        if sw_id in switches:
            raise TopologyError(f"duplicate switch id '{sw_id}'")
        if not isinstance(ports, int) or ports < 1:
            raise TopologyError(f"switch '{sw_id}' must have a positive port count")
        switches[sw_id] = ports

    alice_port = _parse_endpoint(_require(data, "alice_port", "topology"), "alice_port", switches)
    bob_port = _parse_endpoint(_require(data, "bob_port", "topology"), "bob_port", switches)
    if alice_port == bob_port:
        raise TopologyError("alice_port and bob_port must differ")

    links: list[LinkSpec] = []
    for entry in _require(data, "links", "topology"):
        link_id = _require(entry, "id", "link entry")
        kind = _require(entry, "kind", f"link '{link_id}'")
        hop_count = _require(entry, "hop_count", f"link '{link_id}'")
        if any(l.link_id == link_id for l in links):
            raise TopologyError(f"duplicate link id '{link_id}'")
        if kind not in LINK_KINDS:
            raise TopologyError(f"link '{link_id}' has unknown kind '{kind}'")
        if kind == "multihop":
            if hop_count < 2:
                raise TopologyError(f"multihop link '{link_id}' needs hop_count >= 2")
        elif hop_count != 1:
            raise TopologyError(f"{kind} link '{link_id}' must have hop_count = 1")
        try:
            channel = _parse_channel(_require(entry, "channel", f"link '{link_id}'"), f"link '{link_id}' channel")
        except ValueError as exc:
            raise TopologyError(f"link '{link_id}': {exc}") from exc
        links.append(LinkSpec(link_id=link_id, kind=kind, hop_count=hop_count, channel=channel))

    paths: list[PathSpec] = []
    raw_paths = _require(data, "paths", "topology")
    if not raw_paths:
        raise TopologyError("topology must define at least one path")
    for entry in raw_paths:
        path_id = _require(entry, "id", "path entry")
        link_id = _require(entry, "link", f"path '{path_id}'")
        if any(p.path_id == path_id for p in paths):
            raise TopologyError(f"duplicate path id '{path_id}'")
        if not any(l.link_id == link_id for l in links):
            raise TopologyError(f"path '{path_id}' references unknown link '{link_id}'")
        raw_ccs = _require(entry, "cross_connects", f"path '{path_id}'")
        if not raw_ccs:
            raise TopologyError(f"path '{path_id}' has no cross-connects")
        ccs = []
        for raw_cc in raw_ccs:
            sw = _require(raw_cc, "switch", f"path '{path_id}' cross-connect")
            in_port = _require(raw_cc, "in_port", f"path '{path_id}' cross-connect")
            out_port = _require(raw_cc, "out_port", f"path '{path_id}' cross-connect")
            _check_port(sw, in_port, switches, f"path '{path_id}'")
            _check_port(sw, out_port, switches, f"path '{path_id}'")
            ccs.append(CrossConnect(switch=sw, in_port=in_port, out_port=out_port))
        paths.append(PathSpec(path_id=path_id, link_id=link_id, cross_connects=tuple(ccs)))

    # One port drives at most one cross-connect within a path.
    for path in paths:
        seen: set[Port] = set()
        for cc in path.cross_connects:
            for port in ((cc.switch, cc.in_port), (cc.switch, cc.out_port)):
                if port in seen:
                    raise TopologyError(
                        f"path '{path.path_id}' reuses port {port}"
                    )
                seen.add(port)

    # Parallel paths may meet only at the QKD endpoint ports.
    endpoint_ports = {alice_port, bob_port}
    for i, a in enumerate(paths):
        for b in paths[i + 1:]:
            shared = (a.port_set() & b.port_set()) - endpoint_ports
            if shared:
                raise TopologyError(
                    f"paths '{a.path_id}' and '{b.path_id}' share port {sorted(shared)[0]}"
                )

    # Anchoring and orientation: first cross-connect leaves the Alice QKD
    # port, last one lands on the Bob QKD port.
    for path in paths:
        first, last = path.cross_connects[0], path.cross_connects[-1]
        if (first.switch, first.in_port) != alice_port:
            raise TopologyError(f"path '{path.path_id}' does not start at alice_port")
        if (last.switch, last.out_port) != bob_port:
            raise TopologyError(f"path '{path.path_id}' does not end at bob_port")

    single_hop_sizes = [len(p.cross_connects) for p in paths
                        if next(l for l in links if l.link_id == p.link_id).kind != "multihop"]
    for path in paths:
        link = next(l for l in links if l.link_id == path.link_id)
        if link.kind == "multihop" and single_hop_sizes:
            if len(path.cross_connects) <= max(single_hop_sizes):
                raise TopologyError(
                    f"multihop path '{path.path_id}' must use more cross-connects "
                    "than any single-hop path"
                )

    topo = Topology(
        switches=switches,
        links=tuple(links),
        paths=tuple(paths),
        alice_port=alice_port,
        bob_port=bob_port,
        cables={},
    )
    object.__setattr__(topo, "cables", _derive_cables(topo.paths))

    # Round trip: installing exactly one path's cross-connects must light
    # exactly that path.
    for path in topo.paths:
        states = {sw: set() for sw in switches}
        for cc in path.cross_connects:
            states[cc.switch].add((cc.in_port, cc.out_port))
        if resolve_active_path(topo, states) != path.path_id:
            raise TopologyError(
                f"path '{path.path_id}' does not form a circuit from alice_port to bob_port"
            )
    return topo


def load_topology(file_path: str) -> Topology:
    """Load and validate a topology JSON file."""
    with open(file_path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TopologyError(f"cannot parse {file_path}: {exc}") from exc
    return parse_topology(data)


def resolve_active_path(
    topology: Topology,
    switch_states: Mapping[str, Iterable[tuple[int, int]]],
) -> Optional[str]:
    """Identify which pre-computed path is fully established, if any.

    switch_states maps each switch id to its installed cross-connect
    entries as (in_port, out_port) pairs. The fabric is walked hop by hop
    from the Alice QKD port, treating each entry as a bidirectional port
    bridge and following fixed cables between switches. Returns the
    path id whose cross-connect set is exactly the traversed circuit, or
    None when no complete unambiguous circuit exists.
    """
    tables: dict[str, list[tuple[int, int]]] = {
        sw: list(switch_states[sw]) for sw in topology.switches
    }
    total_entries = sum(len(t) for t in tables.values())

    traversed: set[tuple[str, frozenset[int]]] = set()
    current: Port = topology.alice_port
    for _ in range(total_entries + 1):
        sw, port = current
        using = [(i, o) for (i, o) in tables[sw] if port in (i, o)]
        if len(using) != 1:
            return None  # dark port, or ambiguous fabric state
        in_port, out_port = using[0]
        entry = (sw, frozenset((in_port, out_port)))
        if entry in traversed:
            return None  # loop
        traversed.add(entry)
        current = (sw, out_port if port == in_port else in_port)
        if current == topology.bob_port:
            for path in topology.paths:
                wanted = {(cc.switch, cc.ports) for cc in path.cross_connects}
                if wanted == traversed:
                    return path.path_id
            return None
        if current not in topology.cables:
            return None  # circuit dead-ends on an uncabled port
        current = topology.cables[current]
    return None
