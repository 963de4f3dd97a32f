"""Simulated network fabric: routing, filtering, and the per-flow pipeline.

Flows travel the compiled topology along the BFS-shortest path (ties broken
by the lexicographically smallest vertex-id sequence).  Walking that path:

* every switch with a tap sensor on its network lets the sensor evaluate the
  flow (taps observe and alert but never affect delivery),
* every interior firewall evaluates its rule list top-down, first match
  wins; with no match the default policy applies: deny when the flow enters
  from the external-flagged network, allow otherwise,
* every interior node with an inline sensor evaluates the flow after that
  node's filters; an ips-mode inline sensor with a matching drop rule stops
  the flow there.

A flow that is stopped never reaches later vertices, so sensors behind the
stop point do not see it.  Events for one flow are emitted in path order,
ending with exactly one DeliveryEvent or DropEvent.
"""

from __future__ import annotations

import ipaddress
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Optional, Sequence, Union

from .detection import (
    AlertEvent,
    AnomalyEvent,
    DetectionRule,
    SensorBinding,
    Verdict,
    WindowState,
    ActionTaken,
    evaluate,
    evaluate_window,
)
from .flows import FlowEvent, FlowProto
from .model import FilterRule, FilterAction, Proto, Role, Scenario
from .topology import TopologyGraph, is_switch, switch_id

DEFAULT_POLICY = "default-policy"


@dataclass(frozen=True)
class FlowPath:
    vertices: tuple[str, ...]  # alternating node/switch, endpoints are nodes
    traversed_firewalls: tuple[str, ...]  # interior firewall-role vertices, in order

    @property
    def src(self) -> str:
        return self.vertices[0]

    @property
    def dst(self) -> str:
        return self.vertices[-1]


@dataclass(frozen=True)
class Delivered:
    pass


@dataclass(frozen=True)
class Filtered:
    firewall: str
    rule_index: Optional[int]  # None means the default policy decided

    @property
    def rule_label(self) -> str:
        return DEFAULT_POLICY if self.rule_index is None else str(self.rule_index)


FilterOutcome = Union[Delivered, Filtered]


@dataclass(frozen=True)
class DeliveryEvent:
    tick: int
    flow_ref: int
    dst_node: str

    def to_dict(self) -> dict:
        return {"tick": self.tick, "flow_ref": self.flow_ref, "dst_node": self.dst_node}


@dataclass(frozen=True)
class DropEvent:
    tick: int
    flow_ref: int
    reason: str  # "filtered" | "ips-drop" | "unreachable"
    by: str  # firewall or sensor host; "" for unreachable
    rule: str  # rule index, default-policy, or "sid:N"

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "flow_ref": self.flow_ref,
            "reason": self.reason,
            "by": self.by,
            "rule": self.rule,
        }


PipelineEvent = Union[AlertEvent, AnomalyEvent, DeliveryEvent, DropEvent]


class UnknownNodeError(ValueError):
    pass


class NotRunningError(RuntimeError):
    """Flows were submitted to an instance whose phase is not RUNNING."""

    code = "E_NOT_RUNNING"


# ---------------------------------------------------------------------------
# Routing
# ---------------------------------------------------------------------------


def route_flow(graph: TopologyGraph, flow: FlowEvent, roles: Mapping[str, Role]) -> Optional[FlowPath]:
    """Shortest path for a flow, or None when its endpoints cannot reach."""
    return route(graph, flow.src_node, flow.dst_node, roles)


def route(
    graph: TopologyGraph, src: str, dst: str, roles: Mapping[str, Role]
) -> Optional[FlowPath]:
    if src not in graph.node_vertices:
        raise UnknownNodeError(f"unknown node {src!r}")
    if dst not in graph.node_vertices:
        raise UnknownNodeError(f"unknown node {dst!r}")
    if src == dst:
        return FlowPath((src,), ())

    adjacency = graph.adjacency()
    dist_from_src = _bfs_distances(adjacency, src)
    if dst not in dist_from_src:
        return None
    dist_to_dst = _bfs_distances(adjacency, dst)
    total = dist_from_src[dst]

    # Greedy walk: among neighbors one hop closer to dst (and still on a
    # shortest path), take the lexicographically smallest vertex id.  This
    # yields the unique smallest shortest vertex sequence.
    vertices = [src]
    current = src
    while current != dst:
        steps_taken = len(vertices) - 1
        candidates = [
            v
            for v in adjacency[current]
            if dist_to_dst.get(v, -1) == total - steps_taken - 1
        ]
        current = min(candidates)
        vertices.append(current)

    interior = vertices[1:-1]
    firewalls = tuple(
        v for v in interior if not is_switch(v) and roles.get(v) == Role.FIREWALL
    )
    return FlowPath(tuple(vertices), firewalls)


def _bfs_distances(adjacency: Mapping[str, list[str]], start: str) -> dict[str, int]:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        vertex = queue.popleft()
        for neighbor in adjacency[vertex]:
            if neighbor not in dist:
                dist[neighbor] = dist[vertex] + 1
                queue.append(neighbor)
    return dist


# ---------------------------------------------------------------------------
# Filtering
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4096)
def _net_bounds(cidr: str) -> tuple[int, int]:
    net = ipaddress.ip_network(cidr)
    return int(net.network_address), int(net.broadcast_address)


def _cidr_match(cidr: str, ip: str) -> bool:
    if cidr == "any":
        return True
    lo, hi = _net_bounds(cidr)
    return lo <= int(ipaddress.ip_address(ip)) <= hi


def rule_matches(rule: FilterRule, flow: FlowEvent) -> bool:
    if rule.proto != Proto.ANY and rule.proto.value != flow.proto.value:
        return False
    if not rule.src_port.matches(flow.src_port):
        return False
    if not rule.dst_port.matches(flow.dst_port):
        return False
    if not _cidr_match(rule.src_cidr, flow.src_ip):
        return False
    if not _cidr_match(rule.dst_cidr, flow.dst_ip):
        return False
    return True


def _filter_at(
    rules: Sequence[FilterRule], flow: FlowEvent, entry_is_external: bool
) -> tuple[bool, Optional[int]]:
    """(allowed, deciding rule index); index None = default policy decided."""
    for index, rule in enumerate(rules):
        if rule_matches(rule, flow):
            return rule.action == FilterAction.ALLOW, index
    return (not entry_is_external), None


def apply_filters(
    path: FlowPath,
    flow: FlowEvent,
    rulesets: Mapping[str, Sequence[FilterRule]],
    external_switches: frozenset[str],
) -> FilterOutcome:
    """Filter-layer verdict along a path: earliest filtering firewall decides."""
    for position, vertex in enumerate(path.vertices):
        if vertex not in path.traversed_firewalls:
            continue
        entry = path.vertices[position - 1]
        allowed, index = _filter_at(
            rulesets.get(vertex, ()), flow, entry in external_switches
        )
        if not allowed:
            return Filtered(vertex, index)
    return Delivered()


# ---------------------------------------------------------------------------
# Fabric: bound scenario + topology, per-flow pipeline
# ---------------------------------------------------------------------------


class Fabric:
    """Read-only view of one compiled scenario, shared across instances."""

    def __init__(self, scenario: Scenario, graph: TopologyGraph):
        self.scenario = scenario
        self.graph = graph
        self.roles = {node.name: node.role for node in scenario.nodes}
        self.external_switches = frozenset(
            switch_id(net.name) for net in scenario.networks if net.external
        )
        self.fw_rulesets: dict[str, tuple[FilterRule, ...]] = {
            node.name: node.fw_rules
            for node in scenario.nodes
            if node.role == Role.FIREWALL
        }
        self.sensors: tuple[SensorBinding, ...] = tuple(
            SensorBinding(node.name, node.sensor)
            for node in scenario.nodes
            if node.sensor is not None
        )

    def route(self, flow: FlowEvent) -> Optional[FlowPath]:
        return route_flow(self.graph, flow, self.roles)

    def taps_on(self, switch: str) -> list[SensorBinding]:
        return [
            s
            for s in self.sensors
            if s.spec.tap_network is not None and switch_id(s.spec.tap_network) == switch
        ]

    def inline_on(self, vertex: str) -> list[SensorBinding]:
        return [s for s in self.sensors if s.spec.inline and s.host == vertex]

    def process_flow(
        self,
        flow: FlowEvent,
        sensor_rulesets: Mapping[str, tuple[DetectionRule, ...]],
    ) -> list[PipelineEvent]:
        """Route one flow and walk its path; returns the flow's events in order."""
        path = self.route(flow)
        if path is None:
            return [DropEvent(flow.tick, flow.fid, "unreachable", "", "")]

        events: list[PipelineEvent] = []
        for position, vertex in enumerate(path.vertices):
            if is_switch(vertex):
                for sensor in self.taps_on(vertex):
                    verdict = evaluate(sensor, sensor_rulesets.get(sensor.host, ()), flow)
                    events.extend(verdict.alerts)
                continue
            interior = 0 < position < len(path.vertices) - 1
            if not interior:
                continue
            if vertex in path.traversed_firewalls:
                entry = path.vertices[position - 1]
                allowed, index = _filter_at(
                    self.fw_rulesets.get(vertex, ()),
                    flow,
                    entry in self.external_switches,
                )
                if not allowed:
                    label = DEFAULT_POLICY if index is None else str(index)
                    events.append(DropEvent(flow.tick, flow.fid, "filtered", vertex, label))
                    return events
            for sensor in self.inline_on(vertex):
                verdict = evaluate(sensor, sensor_rulesets.get(sensor.host, ()), flow)
                events.extend(verdict.alerts)
                if verdict.final_action == ActionTaken.DROP:
                    drop_sids = [
                        a.sid for a in verdict.alerts if a.action_taken == ActionTaken.DROP
                    ]
                    events.append(
                        DropEvent(
                            flow.tick,
                            flow.fid,
                            "ips-drop",
                            sensor.host,
                            f"sid:{drop_sids[0]}" if drop_sids else "",
                        )
                    )
                    return events
        events.append(DeliveryEvent(flow.tick, flow.fid, path.dst))
        return events


def process_flows(
    fabric: Fabric,
    flows: Sequence[FlowEvent],
    sensor_rulesets: Mapping[str, tuple[DetectionRule, ...]],
    window: Optional[WindowState] = None,
) -> tuple[list[PipelineEvent], Optional[WindowState]]:
    """Run a batch through the pipeline in submission order.

    When a window state is given, every submitted flow also feeds the anomaly
    monitor (after its own pipeline events), mirroring the per-tick loop.
    """
    events: list[PipelineEvent] = []
    for flow in flows:
        events.extend(fabric.process_flow(flow, sensor_rulesets))
        if window is not None:
            window, anomaly = evaluate_window(window, flow)
            if anomaly is not None:
                events.append(anomaly)
    return events, window
