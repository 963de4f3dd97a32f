"""Append-only per-instance event log (JSON Lines).

One file per instance under ``<data_dir>/events/``.  Records carry a
per-instance seq starting at 1 with no gaps; payload keys are sorted so two
replays of the same schedule produce byte-identical files.

Appends are write-ahead: the line is written and flushed to the OS before
the caller proceeds, and a record is only acknowledged once its full line is
on the file.  A process killed mid-write leaves at most one torn final line,
which recovery truncates; acknowledged records are never lost or duplicated.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from typing import Iterable, Optional

EVENT_KINDS = ("lifecycle", "flow", "alert", "drop", "anomaly", "inject", "delivery")


class StoreCorruptError(Exception):
    code = "E_CORRUPT_LOG"


class UnknownInstanceError(KeyError):
    code = "E_NOT_FOUND"


@dataclass(frozen=True)
class EventRecord:
    seq: int
    tick: int
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "tick": self.tick, "kind": self.kind, "payload": self.payload}


def _encode(record: EventRecord) -> str:
    return json.dumps(record.to_dict(), sort_keys=True, separators=(",", ":"))


def _decode(line: str) -> EventRecord:
    data = json.loads(line)
    return EventRecord(
        seq=int(data["seq"]), tick=int(data["tick"]), kind=data["kind"], payload=data["payload"]
    )


class EventStore:
    """File-backed log collection; one writer per instance at a time."""

    def __init__(self, data_dir: str):
        self.events_dir = os.path.join(data_dir, "events")
        os.makedirs(self.events_dir, exist_ok=True)
        self._lock = threading.Lock()
        self._records: dict[str, list[EventRecord]] = {}
        for name in sorted(os.listdir(self.events_dir)):
            if name.endswith(".jsonl"):
                self._load(name[: -len(".jsonl")])

    def _path(self, instance_id: str) -> str:
        return os.path.join(self.events_dir, f"{instance_id}.jsonl")

    def _load(self, instance_id: str) -> None:
        """Read a log, truncating a torn final line left by a crash."""
        path = self._path(instance_id)
        records: list[EventRecord] = []
        good_bytes = 0
        with open(path, "rb") as fh:
            raw = fh.read()
        offset = 0
        while offset < len(raw):
            newline = raw.find(b"\n", offset)
            if newline == -1:
                break  # torn tail: record was never acknowledged
            line = raw[offset : newline + 1]
            try:
                record = _decode(line.decode("utf-8"))
            except (ValueError, KeyError, UnicodeDecodeError):
                if newline + 1 == len(raw):
                    break  # torn tail that happens to end in a newline-ish byte run
                raise StoreCorruptError(f"{path}: undecodable interior line at byte {offset}")
            expected = len(records) + 1
            if record.seq != expected:
                raise StoreCorruptError(
                    f"{path}: seq {record.seq} where {expected} expected"
                )
            records.append(record)
            good_bytes = newline + 1
            offset = newline + 1
        if good_bytes != len(raw):
            with open(path, "r+b") as fh:
                fh.truncate(good_bytes)
        self._records[instance_id] = records

    def create(self, instance_id: str) -> None:
        with self._lock:
            if instance_id in self._records:
                return
            self._records[instance_id] = []
            open(self._path(instance_id), "a", encoding="utf-8").close()

    def instances(self) -> list[str]:
        with self._lock:
            return sorted(self._records)

    def exists(self, instance_id: str) -> bool:
        return instance_id in self._records

    def next_seq(self, instance_id: str) -> int:
        records = self._require(instance_id)
        return len(records) + 1

    def _require(self, instance_id: str) -> list[EventRecord]:
        try:
            return self._records[instance_id]
        except KeyError:
            raise UnknownInstanceError(instance_id) from None

    def append(self, instance_id: str, tick: int, kind: str, payload: dict) -> EventRecord:
        return self.append_many(instance_id, [(tick, kind, payload)])[0]

    def append_many(
        self, instance_id: str, entries: Iterable[tuple[int, str, dict]]
    ) -> list[EventRecord]:
        """Append a batch atomically ordered; fsync once at the end."""
        records = self._require(instance_id)
        out: list[EventRecord] = []
        entries = list(entries)
        if not entries:
            return out
        with open(self._path(instance_id), "a", encoding="utf-8") as fh:
            for tick, kind, payload in entries:
                if kind not in EVENT_KINDS:
                    raise ValueError(f"unknown event kind {kind!r}")
                record = EventRecord(len(records) + 1, tick, kind, payload)
                fh.write(_encode(record) + "\n")
                fh.flush()
                records.append(record)
                out.append(record)
            fh.flush()
            os.fsync(fh.fileno())
        return out

    def query(
        self,
        instance_id: str,
        since_seq: int = 0,
        kind: Optional[str] = None,
    ) -> list[EventRecord]:
        records = self._require(instance_id)
        out = records[since_seq:] if since_seq < len(records) else []
        if kind is not None:
            out = [r for r in out if r.kind == kind]
        return out

    def can_continue(self, instance_id: str, next_seq: int) -> bool:
        """True when this store's log for the instance ends exactly before
        ``next_seq`` (or does not exist yet, in which case seq restarts at 1;
        restored logs compare to the original modulo that offset)."""
        if instance_id not in self._records:
            return True
        return len(self._records[instance_id]) + 1 == next_seq
