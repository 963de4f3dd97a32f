"""Compilation of a Scenario into a concrete topology graph.

The graph is bipartite: node vertices on one side, one switch vertex per
declared network on the other, one edge per interface.  Addressing is a pure
function of the scenario text:

* network ``i`` (0-based declaration order) gets ``10.10.i.0/24``; the
  external network gets ``203.0.113.0/24`` instead,
* firewall interfaces take the gateway block starting at ``.1``,
* every other interface takes ``.10 + j + 1`` where ``j`` counts non-firewall
  interfaces on that network in attach order,
* an explicit ``ip=`` pin wins and is skipped by the automatic counters.

Recompiling the same scenario therefore always yields an identical graph.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass

from .model import Role, Scenario, validate_scenario

SWITCH_PREFIX = "sw:"

FIREWALL_HOST_BASE = 1
NODE_HOST_BASE = 11


class ScenarioInvalidError(ValueError):
    """Raised when compile_topology is handed a scenario that fails validation."""

    def __init__(self, findings):
        self.findings = findings
        lines = "; ".join(f"{f.code}@{f.location}" for f in findings)
        super().__init__(f"scenario has validation errors: {lines}")


class AddressSpaceError(ValueError):
    """A /24 ran out of host addresses for the interfaces attached to it."""


def switch_id(network: str) -> str:
    return SWITCH_PREFIX + network


def is_switch(vertex: str) -> bool:
    return vertex.startswith(SWITCH_PREFIX)


def iface_key(node: str, iface: str) -> str:
    return f"{node}/{iface}"


@dataclass(frozen=True)
class TopologyGraph:
    scenario_name: str
    node_vertices: tuple[str, ...]
    switch_vertices: tuple[str, ...]
    edges: tuple[tuple[str, str, str], ...]  # (node vertex, switch vertex, iface name)
    subnets: tuple[tuple[str, str], ...]  # (network name, CIDR)
    ip_assignments: tuple[tuple[str, str], ...]  # (node/iface, address)

    def subnet_of(self, network: str) -> str:
        for name, cidr in self.subnets:
            if name == network:
                return cidr
        raise KeyError(network)

    def address_of(self, node: str, iface: str) -> str:
        key = iface_key(node, iface)
        for k, addr in self.ip_assignments:
            if k == key:
                return addr
        raise KeyError(key)

    def node_addresses(self, node: str) -> list[str]:
        prefix = node + "/"
        return [addr for k, addr in self.ip_assignments if k.startswith(prefix)]

    def adjacency(self) -> dict[str, list[str]]:
        """Undirected adjacency with neighbor lists sorted for deterministic walks."""
        adj: dict[str, list[str]] = {v: [] for v in self.node_vertices}
        adj.update({v: [] for v in self.switch_vertices})
        for node_v, switch_v, _ in self.edges:
            if switch_v not in adj[node_v]:
                adj[node_v].append(switch_v)
            if node_v not in adj[switch_v]:
                adj[switch_v].append(node_v)
        for neighbors in adj.values():
            neighbors.sort()
        return adj

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "nodes": list(self.node_vertices),
            "switches": list(self.switch_vertices),
            "edges": [list(edge) for edge in self.edges],
            "subnets": {name: cidr for name, cidr in self.subnets},
            "ip_assignments": {key: addr for key, addr in self.ip_assignments},
        }


def canonical_json(data) -> str:
    """Key-sorted, whitespace-free JSON; byte-stable across runs."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def compile_topology(scenario: Scenario) -> TopologyGraph:
    """Build the topology graph; rejects scenarios with validation errors."""
    report = validate_scenario(scenario)
    if not report.ok:
        raise ScenarioInvalidError(report.errors)

    subnets = tuple((net.name, scenario.network_cidr(net.name)) for net in scenario.networks)
    assignments: list[tuple[str, str]] = []
    for net in scenario.networks:
        assignments.extend(_assign_network(scenario, net.name))
    # Report in node declaration order, matching edge order.
    order = {
        iface_key(node.name, iface.name): idx
        for idx, (node, iface) in enumerate(
            (node, iface) for node in scenario.nodes for iface in node.interfaces
        )
    }
    assignments.sort(key=lambda item: order[item[0]])

    edges = tuple(
        (node.name, switch_id(iface.network), iface.name)
        for node in scenario.nodes
        for iface in node.interfaces
    )
    return TopologyGraph(
        scenario_name=scenario.name,
        node_vertices=tuple(node.name for node in scenario.nodes),
        switch_vertices=tuple(switch_id(net.name) for net in scenario.networks),
        edges=edges,
        subnets=subnets,
        ip_assignments=tuple(assignments),
    )


def _assign_network(scenario: Scenario, network: str) -> list[tuple[str, str]]:
    cidr = ipaddress.ip_network(scenario.network_cidr(network))
    base = int(cidr.network_address)
    pinned = {
        iface.ip
        for node in scenario.nodes
        for iface in node.interfaces
        if iface.network == network and iface.ip is not None
    }

    def next_free(counter: int) -> tuple[str, int]:
        while True:
            addr = str(ipaddress.ip_address(base + counter))
            counter += 1
            if counter >= cidr.num_addresses - 1:
                raise AddressSpaceError(f"network {network!r} exhausted {cidr}")
            if addr not in pinned:
                return addr, counter

    out: list[tuple[str, str]] = []
    gw_counter = FIREWALL_HOST_BASE
    host_counter = NODE_HOST_BASE
    for node in scenario.nodes:
        for iface in node.interfaces:
            if iface.network != network:
                continue
            if iface.ip is not None:
                addr = iface.ip
            elif node.role == Role.FIREWALL:
                addr, gw_counter = next_free(gw_counter)
            else:
                addr, host_counter = next_free(host_counter)
            out.append((iface_key(node.name, iface.name), addr))
    return out
