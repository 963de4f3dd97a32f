"""Event store: ordering, filtering, torn-tail recovery."""

import json
import os

import pytest

from rangeforge.eventlog import EventStore, StoreCorruptError, UnknownInstanceError


@pytest.fixture
def store(tmp_path):
    return EventStore(str(tmp_path))


class TestAppendQuery:
    def test_seqs_are_gap_free_from_one(self, store):
        store.create("i-1")
        for tick in range(3):
            store.append("i-1", tick, "lifecycle", {"n": tick})
        records = store.query("i-1", since_seq=0)
        assert [r.seq for r in records] == [1, 2, 3]

    def test_since_filter(self, store):
        store.create("i-1")
        for tick in range(3):
            store.append("i-1", tick, "lifecycle", {"n": tick})
        records = store.query("i-1", since_seq=2)
        assert [r.seq for r in records] == [3]

    def test_kind_filter_preserves_order(self, store):
        store.create("i-1")
        store.append("i-1", 0, "lifecycle", {})
        store.append("i-1", 1, "alert", {"sid": 1})
        store.append("i-1", 1, "flow", {})
        store.append("i-1", 2, "alert", {"sid": 2})
        alerts = store.query("i-1", kind="alert")
        assert [r.seq for r in alerts] == [2, 4]
        assert [r.payload["sid"] for r in alerts] == [1, 2]

    def test_unknown_instance(self, store):
        with pytest.raises(UnknownInstanceError):
            store.query("ghost")

    def test_unknown_kind_rejected(self, store):
        store.create("i-1")
        with pytest.raises(ValueError):
            store.append("i-1", 0, "banana", {})

    def test_isolation_between_instances(self, store):
        store.create("i-1")
        store.create("i-2")
        store.append("i-1", 0, "lifecycle", {"who": 1})
        store.append("i-2", 0, "lifecycle", {"who": 2})
        assert store.query("i-1")[0].payload == {"who": 1}
        assert store.query("i-2")[0].payload == {"who": 2}
        assert store.next_seq("i-1") == store.next_seq("i-2") == 2


class TestPersistence:
    def test_reload_after_clean_shutdown(self, tmp_path):
        store = EventStore(str(tmp_path))
        store.create("i-1")
        store.append_many("i-1", [(0, "lifecycle", {"k": i}) for i in range(5)])
        reopened = EventStore(str(tmp_path))
        assert [r.seq for r in reopened.query("i-1")] == [1, 2, 3, 4, 5]

    def test_torn_tail_is_truncated(self, tmp_path):
        store = EventStore(str(tmp_path))
        store.create("i-1")
        store.append_many("i-1", [(0, "lifecycle", {"k": i}) for i in range(3)])
        path = os.path.join(str(tmp_path), "events", "i-1.jsonl")
        with open(path, "a", encoding="utf-8") as fh:
            fh.write('{"seq": 4, "tick": 0, "kind": "lifec')  # torn write
        reopened = EventStore(str(tmp_path))
        assert [r.seq for r in reopened.query("i-1")] == [1, 2, 3]
        # the torn bytes are gone from disk too
        with open(path, "r", encoding="utf-8") as fh:
            assert len(fh.read().splitlines()) == 3
        # appends continue seamlessly
        record = reopened.append("i-1", 9, "lifecycle", {})
        assert record.seq == 4

    def test_interior_gap_is_corruption(self, tmp_path):
        store = EventStore(str(tmp_path))
        store.create("i-1")
        store.append("i-1", 0, "lifecycle", {})
        path = os.path.join(str(tmp_path), "events", "i-1.jsonl")
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"seq": 5, "tick": 0, "kind": "flow", "payload": {}}) + "\n")
            fh.write(json.dumps({"seq": 6, "tick": 0, "kind": "flow", "payload": {}}) + "\n")
        with pytest.raises(StoreCorruptError):
            EventStore(str(tmp_path))

    def test_byte_stable_encoding(self, tmp_path):
        def write_one(directory):
            store = EventStore(directory)
            store.create("i-1")
            store.append("i-1", 3, "alert", {"b": 2, "a": 1})
            with open(os.path.join(directory, "events", "i-1.jsonl"), "rb") as fh:
                return fh.read()

        a = write_one(str(tmp_path / "one"))
        b = write_one(str(tmp_path / "two"))
        assert a == b
        assert a == b'{"kind":"alert","payload":{"a":1,"b":2},"seq":1,"tick":3}\n'
