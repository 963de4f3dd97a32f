"""Integrated per-instance runtime: clock, fabric, sensors, and the log.

A RangeInstance owns one scenario instance end to end.  Commands and steps
must be serialized by the caller (the control plane holds one lock per
instance); the underlying state values are immutable snapshots, so reads
need no locking.

Ticking order inside ``step``: each tick first runs lifecycle timers (VM
creation, destroy completion), then pushes every queued flow stamped at or
before the tick through the network pipeline, provided the instance is
RUNNING.  Each flow contributes its own record followed by its alerts and
its final drop/delivery, then any anomaly the monitor emits; all of it lands
in the append-only log in that deterministic order.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import replace
from typing import Mapping, Optional, Sequence

from . import lifecycle
from .detection import (
    AlertEvent,
    AnomalyEvent,
    DetectionRule,
    WindowState,
    load_ruleset,
)
from .eventlog import EventRecord, EventStore
from .flows import FlowEvent
from .injects import InjectResult, InjectSpec, generate
from .lifecycle import Command, InstanceState, Phase, SimulatedBackend
from .model import Role, Scenario, ServiceKind
from .netsim import DeliveryEvent, DropEvent, Fabric, NotRunningError
from .placement import HostSpec
from .topology import compile_topology


def default_ruleset_text(scenario_name: str) -> str:
    """Shipped .rules file for a template; empty for unknown scenarios."""
    try:
        resource = importlib.resources.files("rangeforge").joinpath(
            f"rulesets/{scenario_name}.rules"
        )
        return resource.read_text(encoding="utf-8")
    except (FileNotFoundError, ModuleNotFoundError):
        return ""


def default_rulesets_for(scenario: Scenario) -> dict[str, tuple[DetectionRule, ...]]:
    """Every sensor host gets the scenario's shipped ruleset (may be empty)."""
    text = default_ruleset_text(scenario.name)
    rules = load_ruleset(text) if text.strip() else ()
    return {
        node.name: rules for node in scenario.nodes if node.sensor is not None
    }


class RangeInstance:
    """One live scenario instance bound to an event store."""

    def __init__(
        self,
        scenario: Scenario,
        cluster: Sequence[HostSpec],
        seed: int,
        instance_id: str,
        store: EventStore,
        sensor_rulesets: Optional[Mapping[str, tuple[DetectionRule, ...]]] = None,
    ):
        self.scenario = scenario
        self.fabric = Fabric(scenario, compile_topology(scenario))
        self.store = store
        self.backend = SimulatedBackend()
        self.state: InstanceState = lifecycle.instantiate(
            scenario, cluster, seed, instance_id=instance_id
        )
        self.cluster = list(cluster)
        self.window = WindowState()
        self.sensor_rulesets: dict[str, tuple[DetectionRule, ...]] = dict(
            sensor_rulesets if sensor_rulesets is not None else default_rulesets_for(scenario)
        )
        self.pending_flows: list[FlowEvent] = []
        self.next_fid = 1
        self.next_inject = 1
        store.create(instance_id)

    @property
    def id(self) -> str:
        return self.state.id

    # -- control -----------------------------------------------------------

    def command(self, command: Command) -> list[EventRecord]:
        new_state, events = lifecycle.apply_command(
            self.state, command, self.scenario, self.backend
        )
        self.state = new_state
        return self.store.append_many(
            self.id, [(e.tick, "lifecycle", e.to_dict()) for e in events]
        )

    def inject(self, spec: InjectSpec) -> tuple[InjectResult, list[EventRecord]]:
        if self.state.phase != Phase.RUNNING:
            raise NotRunningError(
                f"injects require phase RUNNING, instance is {self.state.phase.value}"
            )
        inject_id = f"inj-{self.next_inject}"
        result = generate(
            spec,
            self.scenario,
            self.fabric.graph,
            clock_tick=self.state.clock_ticks + 1,
            inject_id=inject_id,
        )
        self.next_inject += 1
        flows = []
        for flow in result.flows:
            flows.append(replace(flow, fid=self.next_fid))
            self.next_fid += 1
        result = replace(result, flows=tuple(flows))
        self.pending_flows.extend(flows)
        payload = {
            "inject_id": result.inject_id,
            "kind": spec.kind,
            "source_node": spec.source_node,
            "target_node": spec.target_node,
            "params": {k: v for k, v in spec.params},
            "seed": spec.seed,
            "flow_count": len(result.flows),
            "summary": {tag: count for tag, count in result.summary},
        }
        records = self.store.append_many(
            self.id, [(self.state.clock_ticks, "inject", payload)]
        )
        return result, records

    def step(self, ticks: int) -> list[EventRecord]:
        """Advance the clock; all produced events are appended and returned."""
        if ticks < 1:
            raise ValueError("ticks must be >= 1")
        appended: list[EventRecord] = []
        for _ in range(ticks):
            entries: list[tuple[int, str, dict]] = []
            new_state, lifecycle_events = lifecycle.step(self.state, 1, self.scenario)
            self.state = new_state
            tick = self.state.clock_ticks
            entries.extend((e.tick, "lifecycle", e.to_dict()) for e in lifecycle_events)

            if self.state.phase == Phase.RUNNING and self.pending_flows:
                due = [f for f in self.pending_flows if f.tick <= tick]
                self.pending_flows = [f for f in self.pending_flows if f.tick > tick]
                for flow in due:
                    entries.append((flow.tick, "flow", flow.to_dict()))
                    for event in self.fabric.process_flow(flow, self.sensor_rulesets):
                        entries.append(_pipeline_entry(event))
                    self.window, anomaly = _window_update(self.window, flow)
                    if anomaly is not None:
                        entries.append((anomaly.tick, "anomaly", anomaly.to_dict()))
            appended.extend(self.store.append_many(self.id, entries))
        return appended

    def events(self, since_seq: int = 0, kind: Optional[str] = None) -> list[EventRecord]:
        return self.store.query(self.id, since_seq=since_seq, kind=kind)

    # -- inject defaulting ---------------------------------------------------

    def default_inject_endpoints(self, kind: str) -> tuple[str, str]:
        """Pick a natural (source, target) pair for an inject kind."""
        from .injects import InjectError, inject_kind

        entry = inject_kind(kind)
        attackers = [n for n in self.scenario.nodes if n.role == Role.ATTACKER]
        operators = [n for n in self.scenario.nodes if n.role == Role.OPERATOR]
        sources = attackers or (operators if kind == "phishing_mail" else [])
        if not sources:
            raise InjectError("E_BAD_SOURCE", "scenario has no attacker node to source injects")
        targets = [n for n in self.scenario.nodes if n.role == Role.TARGET]
        if entry.requires_service is not None:
            targets = [
                n for n in targets if n.service_of_kind(entry.requires_service) is not None
            ]
        if not targets:
            raise InjectError("E_NO_SERVICE", f"scenario has no suitable target for {kind}")
        return sources[0].name, targets[0].name


def _window_update(window: WindowState, flow: FlowEvent):
    from .detection import evaluate_window

    return evaluate_window(window, flow)


def _pipeline_entry(event) -> tuple[int, str, dict]:
    if isinstance(event, AlertEvent):
        return (event.tick, "alert", event.to_dict())
    if isinstance(event, DropEvent):
        return (event.tick, "drop", event.to_dict())
    if isinstance(event, DeliveryEvent):
        return (event.tick, "delivery", event.to_dict())
    if isinstance(event, AnomalyEvent):
        return (event.tick, "anomaly", event.to_dict())
    raise TypeError(f"unexpected pipeline event {event!r}")
