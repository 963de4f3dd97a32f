"""Integrated runtime: replay determinism, snapshot/restore equivalence."""

import json
import os

import pytest

from rangeforge.eventlog import EventStore
from rangeforge.injects import InjectSpec
from rangeforge.lifecycle import Command, Phase
from rangeforge.netsim import NotRunningError
from rangeforge.placement import DEFAULT_CLUSTER
from rangeforge.runtime import RangeInstance
from rangeforge.snapshot import SnapshotError, restore, write_snapshot
from rangeforge.templates import builtin_template


def drive(data_dir: str, pause_after_inject=False) -> RangeInstance:
    """A fixed schedule: start, provision, scan + sqli, step it out."""
    store = EventStore(data_dir)
    instance = RangeInstance(
        builtin_template("scenario-1"), DEFAULT_CLUSTER, seed=42, instance_id="i-1", store=store
    )
    instance.command(Command.START)
    instance.step(10)
    instance.inject(
        InjectSpec.make("port_scan", "kali", "ubuntu-srv", params={"start_port": 20, "end_port": 25})
    )
    instance.inject(InjectSpec.make("sql_injection", "kali", "ubuntu-srv"))
    if pause_after_inject:
        instance.command(Command.PAUSE)
        instance.step(3)
        instance.command(Command.RESUME)
    instance.step(12)
    return instance


def log_bytes(data_dir: str) -> bytes:
    with open(os.path.join(data_dir, "events", "i-1.jsonl"), "rb") as fh:
        return fh.read()


class TestReplayDeterminism:
    def test_two_fresh_runs_byte_identical(self, tmp_path):
        a = str(tmp_path / "a")
        b = str(tmp_path / "b")
        drive(a)
        drive(b)
        assert log_bytes(a) == log_bytes(b)

    def test_pause_defers_flow_processing(self, tmp_path):
        instance = drive(str(tmp_path), pause_after_inject=True)
        # all 7 flows eventually processed despite the pause window
        flows = instance.events(kind="flow")
        assert len(flows) == 7
        deliveries = instance.events(kind="delivery")
        assert len(deliveries) == 7

    def test_per_flow_event_grouping(self, tmp_path):
        instance = drive(str(tmp_path))
        records = instance.events()
        # find the sql injection flow; its alert (sid 1003) and verdict follow it
        sqli = next(
            r for r in records if r.kind == "flow" and "sql-injection" in r.payload["payload_tags"]
        )
        following = [r for r in records if r.seq in (sqli.seq + 1, sqli.seq + 2)]
        assert following[0].kind == "alert"
        assert following[0].payload["sid"] == 1003
        assert following[0].payload["flow_ref"] == sqli.payload["fid"]
        assert following[1].kind == "delivery"

    def test_inject_before_running_rejected(self, tmp_path):
        store = EventStore(str(tmp_path))
        instance = RangeInstance(
            builtin_template("scenario-1"), DEFAULT_CLUSTER, seed=1, instance_id="i-1", store=store
        )
        with pytest.raises(NotRunningError):
            instance.inject(InjectSpec.make("port_scan", "kali", "ubuntu-srv"))
        instance.command(Command.START)
        with pytest.raises(NotRunningError):
            instance.inject(InjectSpec.make("port_scan", "kali", "ubuntu-srv"))


class TestSnapshotRestore:
    def test_round_trip_identity_of_future_events(self, tmp_path):
        # Run A straight through; run B snapshots mid-run and restores into a
        # fresh store; their post-snapshot event payloads must match 1:1.
        a_dir = str(tmp_path / "a")
        store_a = EventStore(a_dir)
        original = RangeInstance(
            builtin_template("scenario-2"), DEFAULT_CLUSTER, seed=7, instance_id="i-1", store=store_a
        )
        original.command(Command.START)
        original.step(9)
        original.inject(InjectSpec.make("ssh_bruteforce", "parrot", "oracle-srv"))
        snap_path = str(tmp_path / "snap.json")
        write_snapshot(original, snap_path)
        state_at_snapshot = original.state

        tail_original = [
            (r.tick, r.kind, r.payload)
            for r in _stepped(original, 30)
        ]

        store_b = EventStore(str(tmp_path / "b"))
        restored = restore(snap_path, store_b)
        assert restored.state == state_at_snapshot
        assert restored.window == _window_of(original, snap_path)
        tail_restored = [(r.tick, r.kind, r.payload) for r in _stepped(restored, 30)]
        assert tail_original == tail_restored

    def test_snapshot_of_destroyed_instance(self, tmp_path):
        store = EventStore(str(tmp_path / "x"))
        instance = RangeInstance(
            builtin_template("scenario-1"), DEFAULT_CLUSTER, seed=3, instance_id="i-1", store=store
        )
        instance.command(Command.DESTROY)
        instance.step(2)
        assert instance.state.phase == Phase.DESTROYED
        path = str(tmp_path / "dead.json")
        write_snapshot(instance, path)
        restored = restore(path, EventStore(str(tmp_path / "y")))
        assert restored.state.phase == Phase.DESTROYED
        from rangeforge.lifecycle import DestroyedError

        with pytest.raises(DestroyedError):
            restored.command(Command.START)

    def test_truncated_snapshot_refused(self, tmp_path):
        store = EventStore(str(tmp_path / "x"))
        instance = RangeInstance(
            builtin_template("scenario-1"), DEFAULT_CLUSTER, seed=3, instance_id="i-1", store=store
        )
        path = str(tmp_path / "snap.json")
        write_snapshot(instance, path)
        with open(path, "r", encoding="utf-8") as fh:
            content = fh.read()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(content[: len(content) // 2])
        with pytest.raises(SnapshotError) as excinfo:
            restore(path, EventStore(str(tmp_path / "y")))
        assert excinfo.value.code == "E_CORRUPT"

    def test_checksum_tamper_refused(self, tmp_path):
        store = EventStore(str(tmp_path / "x"))
        instance = RangeInstance(
            builtin_template("scenario-1"), DEFAULT_CLUSTER, seed=3, instance_id="i-1", store=store
        )
        path = str(tmp_path / "snap.json")
        write_snapshot(instance, path)
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        doc["body"]["next_fid"] = 999
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
        with pytest.raises(SnapshotError) as excinfo:
            restore(path, EventStore(str(tmp_path / "y")))
        assert excinfo.value.code == "E_CORRUPT"

    def test_version_mismatch_refused(self, tmp_path):
        store = EventStore(str(tmp_path / "x"))
        instance = RangeInstance(
            builtin_template("scenario-1"), DEFAULT_CLUSTER, seed=3, instance_id="i-1", store=store
        )
        path = str(tmp_path / "snap.json")
        write_snapshot(instance, path)
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        doc["format_version"] = 99
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
        with pytest.raises(SnapshotError) as excinfo:
            restore(path, EventStore(str(tmp_path / "y")))
        assert excinfo.value.code == "E_VERSION"

    def test_original_untouched_by_failed_restore(self, tmp_path):
        store = EventStore(str(tmp_path / "x"))
        instance = RangeInstance(
            builtin_template("scenario-1"), DEFAULT_CLUSTER, seed=3, instance_id="i-1", store=store
        )
        instance.command(Command.START)
        path = str(tmp_path / "snap.json")
        write_snapshot(instance, path)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write("garbage")
        before = instance.state
        with pytest.raises(SnapshotError):
            restore(path, store)
        assert instance.state == before


class TestRuntimeFuzz:
    def test_random_schedules_keep_invariants(self, tmp_path):
        # whatever the operator mashes, the log stays contiguous, the clock
        # monotone, and only coded errors surface.
        import random

        from rangeforge.injects import InjectError
        from rangeforge.lifecycle import DestroyedError, TransitionError
        from rangeforge.netsim import NotRunningError

        for seed in range(25):
            rng = random.Random(seed)
            store = EventStore(str(tmp_path / f"fuzz-{seed}"))
            template = ["scenario-1", "scenario-2", "scenario-3"][seed % 3]
            instance = RangeInstance(
                builtin_template(template),
                DEFAULT_CLUSTER,
                seed=seed,
                instance_id="i-1",
                store=store,
            )
            last_clock = 0
            for _ in range(40):
                roll = rng.random()
                try:
                    if roll < 0.35:
                        instance.command(rng.choice(list(Command)))
                    elif roll < 0.75:
                        instance.step(rng.randint(1, 12))
                    else:
                        kind = rng.choice(
                            ["port_scan", "ssh_bruteforce", "sql_injection", "ddos_flood", "phishing_mail"]
                        )
                        source, target = instance.default_inject_endpoints(kind)
                        params = {"count": 30} if kind == "ddos_flood" else {}
                        if kind == "port_scan":
                            params = {"start_port": 1, "end_port": 10}
                        instance.inject(InjectSpec.make(kind, source, target, params=params, seed=seed))
                except (TransitionError, DestroyedError, NotRunningError, InjectError):
                    pass
                assert instance.state.clock_ticks >= last_clock
                last_clock = instance.state.clock_ticks
            seqs = [r.seq for r in instance.events()]
            assert seqs == list(range(1, len(seqs) + 1)), seed


def _stepped(instance: RangeInstance, ticks: int):
    records = []
    for _ in range(ticks):
        records.extend(instance.step(1))
    return records


def _window_of(_original, snap_path):
    from rangeforge.detection import window_state_from_dict
    from rangeforge.snapshot import read_snapshot

    return window_state_from_dict(read_snapshot(snap_path)["window"])
