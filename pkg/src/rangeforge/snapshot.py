"""Snapshot and restore of a live instance.

A snapshot is one JSON document: a format version, a canonical body with
everything needed to resume (scenario text, cluster, full lifecycle state
including the per-VM rng states, pending flows, window counts, sensor rules,
counters, and the log's next seq), and a sha256 over the body.  Restoring a
snapshot and stepping produces the same future events as stepping the
original, record for record (seq offsets aside when restoring into a fresh
log).
"""

from __future__ import annotations

import hashlib
import json
from typing import Optional

from .detection import load_ruleset, window_state_from_dict
from .dsl import parse_scenario, serialize
from .eventlog import EventStore
from .flows import flow_from_dict
from .lifecycle import InstanceState, Phase, VmState
from .placement import HostSpec, PlacementPlan
from .runtime import RangeInstance

FORMAT_VERSION = 1


class SnapshotError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


def snapshot_dict(instance: RangeInstance) -> dict:
    state = instance.state
    body = {
        "scenario_text": serialize(instance.scenario),
        "cluster": [
            {"id": h.id, "cpu_cores": h.cpu_cores, "ram_mb": h.ram_mb}
            for h in instance.cluster
        ],
        "state": {
            "id": state.id,
            "scenario_name": state.scenario_name,
            "phase": state.phase.value,
            "vm_states": [[name, vm.value] for name, vm in state.vm_states],
            "clock_ticks": state.clock_ticks,
            "seed": state.seed,
            "plan": {
                "assignments": [list(item) for item in state.plan.assignments],
                "residuals": [list(item) for item in state.plan.residuals],
            },
            "vm_ready_tick": [list(item) for item in state.vm_ready_tick],
            "vm_rng_state": [list(item) for item in state.vm_rng_state],
            "destroy_tick": state.destroy_tick,
        },
        "window": instance.window.to_dict(),
        "pending_flows": [flow.to_dict() for flow in instance.pending_flows],
        "next_fid": instance.next_fid,
        "next_inject": instance.next_inject,
        "sensor_rules": {
            host: [rule.render() for rule in rules]
            for host, rules in sorted(instance.sensor_rulesets.items())
        },
        "next_seq": instance.store.next_seq(state.id),
    }
    encoded = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return {
        "format_version": FORMAT_VERSION,
        "body": body,
        "sha256": hashlib.sha256(encoded.encode("utf-8")).hexdigest(),
    }


def write_snapshot(instance: RangeInstance, path: str) -> None:
    document = snapshot_dict(instance)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(document, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def read_snapshot(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            document = json.load(fh)
    except (OSError, ValueError) as exc:
        raise SnapshotError("E_CORRUPT", f"unreadable snapshot: {exc}") from exc
    if not isinstance(document, dict) or "body" not in document or "sha256" not in document:
        raise SnapshotError("E_CORRUPT", "snapshot missing body or checksum")
    version = document.get("format_version")
    if version != FORMAT_VERSION:
        raise SnapshotError(
            "E_VERSION", f"snapshot format {version!r} unsupported (want {FORMAT_VERSION})"
        )
    encoded = json.dumps(document["body"], sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(encoded.encode("utf-8")).hexdigest()
    if digest != document["sha256"]:
        raise SnapshotError("E_CORRUPT", "snapshot checksum mismatch")
    return document["body"]


def restore(path: str, store: EventStore) -> RangeInstance:
    """Rebuild a live instance from a snapshot file.

    The target store must either have no log for the instance (seq restarts
    at 1) or a log ending exactly where the snapshot says it should.
    """
    body = read_snapshot(path)
    try:
        return _rebuild(body, store)
    except SnapshotError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SnapshotError("E_CORRUPT", f"snapshot body malformed: {exc}") from exc


def _rebuild(body: dict, store: EventStore) -> RangeInstance:
    scenario = parse_scenario(body["scenario_text"])
    cluster = [
        HostSpec(h["id"], int(h["cpu_cores"]), int(h["ram_mb"])) for h in body["cluster"]
    ]
    raw = body["state"]
    if not store.can_continue(raw["id"], int(body["next_seq"])):
        raise SnapshotError(
            "E_CONFLICT",
            f"store already has a diverging log for instance {raw['id']!r}",
        )

    instance = RangeInstance(
        scenario,
        cluster,
        seed=int(raw["seed"]),
        instance_id=raw["id"],
        store=store,
        sensor_rulesets={
            host: load_ruleset("\n".join(lines))
            for host, lines in body["sensor_rules"].items()
        },
    )
    instance.state = InstanceState(
        id=raw["id"],
        scenario_name=raw["scenario_name"],
        phase=Phase(raw["phase"]),
        vm_states=tuple((name, VmState(value)) for name, value in raw["vm_states"]),
        clock_ticks=int(raw["clock_ticks"]),
        seed=int(raw["seed"]),
        plan=PlacementPlan(
            assignments=tuple((vm, host) for vm, host in raw["plan"]["assignments"]),
            residuals=tuple(
                (host, int(cpu), int(ram)) for host, cpu, ram in raw["plan"]["residuals"]
            ),
        ),
        vm_ready_tick=tuple((name, int(tick)) for name, tick in raw["vm_ready_tick"]),
        vm_rng_state=tuple((name, int(st)) for name, st in raw["vm_rng_state"]),
        destroy_tick=int(raw["destroy_tick"]),
    )
    instance.window = window_state_from_dict(body["window"])
    instance.pending_flows = [flow_from_dict(f) for f in body["pending_flows"]]
    instance.next_fid = int(body["next_fid"])
    instance.next_inject = int(body["next_inject"])
    return instance
