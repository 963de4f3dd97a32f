"""Instance and per-VM state machines over a deterministic virtual clock.

One tick is 100 ms of virtual time; nothing in this module reads the wall
clock.  Commands move the instance phase along a fixed transition table and
emit exactly one lifecycle event each; everything else (VM creation
latencies, reset re-provisioning, destroy completion) happens on tick
boundaries inside ``step`` with cause=timer.

Provisioning latency is 5 ticks plus a jitter of 0-3 ticks drawn per VM from
a splitmix64 stream seeded with ``instance_seed XOR fnv1a64(node_name)``;
the stream state advances on every draw, so a reset draws fresh latencies
while staying fully replayable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

from .model import NodeSpec, Scenario
from .placement import HostSpec, PlacementPlan, plan as plan_placement, vm_specs_from_scenario
from .seeds import splitmix64, stream_seed

BASE_CREATE_LATENCY = 5  # ticks before jitter
JITTER_MASK = 0x3  # low 2 bits -> jitter 0..3
DESTROY_LATENCY = 2  # ticks from DESTROYING to DESTROYED


class Phase(str, Enum):
    DEFINED = "DEFINED"
    PLACING = "PLACING"
    PROVISIONING = "PROVISIONING"
    RUNNING = "RUNNING"
    PAUSED = "PAUSED"
    RESETTING = "RESETTING"
    DESTROYING = "DESTROYING"
    DESTROYED = "DESTROYED"
    FAILED = "FAILED"


TERMINAL_PHASES = (Phase.DESTROYING, Phase.DESTROYED)


class VmState(str, Enum):
    PENDING = "PENDING"
    CREATING = "CREATING"
    RUNNING = "RUNNING"
    STOPPED = "STOPPED"
    FAILED = "FAILED"


class Command(str, Enum):
    START = "start"
    PAUSE = "pause"
    RESUME = "resume"
    RESET = "reset"
    DESTROY = "destroy"


class Cause(str, Enum):
    COMMAND = "command"
    TIMER = "timer"
    FAILURE = "failure"


_TRANSITIONS: dict[tuple[Phase, Command], Phase] = {
    (Phase.DEFINED, Command.START): Phase.PROVISIONING,
    (Phase.RUNNING, Command.PAUSE): Phase.PAUSED,
    (Phase.PAUSED, Command.RESUME): Phase.RUNNING,
    (Phase.RUNNING, Command.RESET): Phase.RESETTING,
    (Phase.PAUSED, Command.RESET): Phase.RESETTING,
}
for _phase in Phase:
    if _phase not in TERMINAL_PHASES:
        _TRANSITIONS[(_phase, Command.DESTROY)] = Phase.DESTROYING


class TransitionError(Exception):
    code = "E_BAD_TRANSITION"

    def __init__(self, phase: Phase, command: Command):
        self.phase = phase
        self.command = command
        super().__init__(f"command {command.value!r} not accepted in phase {phase.value}")


class DestroyedError(Exception):
    code = "E_DESTROYED"

    def __init__(self):
        super().__init__("instance is DESTROYED; no further transitions accepted")


@dataclass(frozen=True)
class LifecycleEvent:
    tick: int
    subject: str  # instance id or node name
    from_state: str
    to_state: str
    cause: Cause

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "subject": self.subject,
            "from_state": self.from_state,
            "to_state": self.to_state,
            "cause": self.cause.value,
        }


@dataclass(frozen=True)
class InstanceState:
    id: str
    scenario_name: str
    phase: Phase
    vm_states: tuple[tuple[str, VmState], ...]  # scenario node order
    clock_ticks: int
    seed: int
    plan: PlacementPlan
    vm_ready_tick: tuple[tuple[str, int], ...] = ()  # -1 when nothing scheduled
    vm_rng_state: tuple[tuple[str, int], ...] = ()
    destroy_tick: int = -1

    def vm_state(self, node: str) -> VmState:
        for name, state in self.vm_states:
            if name == node:
                return state
        raise KeyError(node)

    @property
    def vm_state_map(self) -> dict[str, VmState]:
        return dict(self.vm_states)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "scenario": self.scenario_name,
            "phase": self.phase.value,
            "vm_states": {name: state.value for name, state in self.vm_states},
            "clock_ticks": self.clock_ticks,
            "seed": self.seed,
            "plan": self.plan.to_dict(),
        }


# ---------------------------------------------------------------------------
# Backend drivers
# ---------------------------------------------------------------------------


class BackendDriver:
    """Seam for a real hypervisor manager.

    ``create_vm`` returns the provisioning latency in ticks and the advanced
    rng state; ``destroy_vm`` returns teardown latency.  ``query_state`` is
    the hook a real driver would answer from the hypervisor; the simulator
    returns None because the orchestrator's own bookkeeping is authoritative
    here.
    """

    def create_vm(self, node: NodeSpec, host: str, rng_state: int) -> tuple[int, int]:
        raise NotImplementedError

    def destroy_vm(self, node: NodeSpec) -> int:
        raise NotImplementedError

    def query_state(self, node_name: str) -> Optional[str]:
        return None


class SimulatedBackend(BackendDriver):
    """The shipped deterministic backend: seeded latency, no side effects."""

    def create_vm(self, node: NodeSpec, host: str, rng_state: int) -> tuple[int, int]:
        draw, new_state = splitmix64(rng_state)
        return BASE_CREATE_LATENCY + (draw & JITTER_MASK), new_state

    def destroy_vm(self, node: NodeSpec) -> int:
        return DESTROY_LATENCY


class CommandEchoBackend(BackendDriver):
    """Documents the real-backend seam: records the external commands a
    hypervisor driver would issue, with fixed latencies."""

    def __init__(self):
        self.commands: list[str] = []

    def create_vm(self, node: NodeSpec, host: str, rng_state: int) -> tuple[int, int]:
        self.commands.append(
            f"vm create {node.name} --host {host} "
            f"--cpu {node.effective_cpu} --ram-mb {node.effective_ram_mb} --os {node.os_label}"
        )
        return BASE_CREATE_LATENCY, rng_state

    def destroy_vm(self, node: NodeSpec) -> int:
        self.commands.append(f"vm destroy {node.name}")
        return DESTROY_LATENCY

    def query_state(self, node_name: str) -> Optional[str]:
        self.commands.append(f"vm query {node_name}")
        return None


_instance_counter = itertools.count(1)


def instantiate(
    scenario: Scenario,
    cluster: Sequence[HostSpec],
    seed: int,
    instance_id: Optional[str] = None,
) -> InstanceState:
    """New instance: placement computed up front, all VMs pending, clock 0.

    Raises placement.InfeasibleError when the cluster cannot host the
    scenario; no instance is created in that case.
    """
    placement = plan_placement(vm_specs_from_scenario(scenario), cluster)
    if instance_id is None:
        instance_id = f"i-{next(_instance_counter)}"
    return InstanceState(
        id=instance_id,
        scenario_name=scenario.name,
        phase=Phase.DEFINED,
        vm_states=tuple((node.name, VmState.PENDING) for node in scenario.nodes),
        clock_ticks=0,
        seed=seed,
        plan=placement,
        vm_ready_tick=tuple((node.name, -1) for node in scenario.nodes),
        vm_rng_state=tuple(
            (node.name, stream_seed(seed, node.name)) for node in scenario.nodes
        ),
        destroy_tick=-1,
    )


def apply_command(
    state: InstanceState,
    command: Command,
    scenario: Scenario,
    backend: Optional[BackendDriver] = None,
) -> tuple[InstanceState, list[LifecycleEvent]]:
    """Run one control command; exactly one event per accepted command."""
    if state.phase == Phase.DESTROYED:
        raise DestroyedError()
    backend = backend or SimulatedBackend()
    target = _TRANSITIONS.get((state.phase, command))
    if target is None:
        raise TransitionError(state.phase, command)

    event = LifecycleEvent(
        tick=state.clock_ticks,
        subject=state.id,
        from_state=state.phase.value,
        to_state=target.value,
        cause=Cause.COMMAND,
    )
    new_state = replace(state, phase=target)

    if target in (Phase.PROVISIONING, Phase.RESETTING):
        new_state = _schedule_creation(new_state, scenario, backend)
    elif target == Phase.DESTROYING:
        new_state = replace(new_state, destroy_tick=state.clock_ticks + DESTROY_LATENCY)
    return new_state, [event]


def _schedule_creation(
    state: InstanceState, scenario: Scenario, backend: BackendDriver
) -> InstanceState:
    host_of = dict(state.plan.assignments)
    ready: list[tuple[str, int]] = []
    rng: list[tuple[str, int]] = []
    for node in scenario.nodes:
        rng_state = dict(state.vm_rng_state)[node.name]
        latency, new_rng = backend.create_vm(node, host_of[node.name], rng_state)
        ready.append((node.name, state.clock_ticks + latency))
        rng.append((node.name, new_rng))
    return replace(state, vm_ready_tick=tuple(ready), vm_rng_state=tuple(rng))


def step(
    state: InstanceState,
    ticks: int,
    scenario: Scenario,
) -> tuple[InstanceState, list[LifecycleEvent]]:
    """Advance the virtual clock tick by tick, firing due timer transitions."""
    if state.phase == Phase.DESTROYED:
        raise DestroyedError()
    if ticks < 1:
        raise ValueError("ticks must be >= 1")

    events: list[LifecycleEvent] = []
    vm_states = dict(state.vm_states)
    ready = dict(state.vm_ready_tick)
    phase = state.phase
    clock = state.clock_ticks

    def vm_event(tick: int, node: str, to_state: VmState) -> None:
        events.append(
            LifecycleEvent(tick, node, vm_states[node].value, to_state.value, Cause.TIMER)
        )
        vm_states[node] = to_state

    for _ in range(ticks):
        clock += 1
        if phase in (Phase.PROVISIONING, Phase.RESETTING):
            for node in scenario.nodes:
                name = node.name
                if vm_states[name] in (VmState.PENDING, VmState.RUNNING) and ready[name] >= clock:
                    vm_event(clock, name, VmState.CREATING)
                if vm_states[name] == VmState.CREATING and ready[name] == clock:
                    vm_event(clock, name, VmState.RUNNING)
            if all(s == VmState.RUNNING for s in vm_states.values()):
                events.append(
                    LifecycleEvent(clock, state.id, phase.value, Phase.RUNNING.value, Cause.TIMER)
                )
                phase = Phase.RUNNING
        elif phase == Phase.DESTROYING and clock == state.destroy_tick:
            for node in scenario.nodes:
                if vm_states[node.name] != VmState.STOPPED:
                    vm_event(clock, node.name, VmState.STOPPED)
            events.append(
                LifecycleEvent(clock, state.id, phase.value, Phase.DESTROYED.value, Cause.TIMER)
            )
            phase = Phase.DESTROYED

    new_state = replace(
        state,
        phase=phase,
        clock_ticks=clock,
        vm_states=tuple((node.name, vm_states[node.name]) for node in scenario.nodes),
    )
    return new_state, events
