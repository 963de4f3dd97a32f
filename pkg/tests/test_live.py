"""Socket-level behavior: SSE follow/resume and CLI/API parity."""

import json

import httpx
import pytest
from click.testing import CliRunner

from rangeforge.cli import main as rangectl
from rangeforge.dsl import serialize
from rangeforge.templates import builtin_template

from live_server import live_server


@pytest.fixture
def base(tmp_path):
    with live_server(str(tmp_path)) as url:
        yield url


def make_running(base: str, scenario="scenario-1", seed=42) -> str:
    r = httpx.post(f"{base}/api/v1/instances", json={"scenario": scenario, "seed": seed})
    iid = r.json()["id"]
    httpx.post(f"{base}/api/v1/instances/{iid}/commands", json={"command": "start"})
    httpx.post(f"{base}/api/v1/instances/{iid}/step", json={"ticks": 10})
    return iid


def read_sse(base: str, iid: str, since: int, want: int, timeout=10.0) -> list[dict]:
    """Collect `want` records from the follow stream, then disconnect."""
    records: list[dict] = []
    with httpx.stream(
        "GET",
        f"{base}/api/v1/instances/{iid}/events",
        params={"follow": "true", "since": since},
        timeout=timeout,
    ) as response:
        for line in response.iter_lines():
            if line.startswith("data: "):
                records.append(json.loads(line[len("data: "):]))
                if len(records) >= want:
                    break
    return records


class TestServerSentEvents:
    def test_follow_streams_in_seq_order(self, base):
        iid = make_running(base)
        records = read_sse(base, iid, since=0, want=10)
        assert [r["seq"] for r in records] == list(range(1, 11))

    def test_reconnect_with_since_has_no_gaps_or_duplicates(self, base):
        iid = make_running(base)
        first = read_sse(base, iid, since=0, want=6)
        last_seq = first[-1]["seq"]
        # more activity while "disconnected"
        httpx.post(f"{base}/api/v1/instances/{iid}/injects", json={"kind": "sql_injection"})
        httpx.post(f"{base}/api/v1/instances/{iid}/step", json={"ticks": 3})
        second = read_sse(base, iid, since=last_seq, want=4)
        seqs = [r["seq"] for r in first + second]
        assert seqs == list(range(1, len(seqs) + 1))

    def test_stream_sees_live_appends(self, base):
        import threading

        iid = make_running(base)
        already = len(httpx.get(f"{base}/api/v1/instances/{iid}/events").json()["events"])

        results: list[dict] = []

        def consume():
            results.extend(read_sse(base, iid, since=already, want=2))

        thread = threading.Thread(target=consume)
        thread.start()
        httpx.post(f"{base}/api/v1/instances/{iid}/injects", json={"kind": "sql_injection"})
        httpx.post(f"{base}/api/v1/instances/{iid}/step", json={"ticks": 2})
        thread.join(timeout=10)
        assert not thread.is_alive()
        assert results[0]["kind"] == "inject"


class TestConcurrentIsolation:
    def test_interleaved_mutations_never_cross_instances(self, base):
        import threading

        a = make_running(base, scenario="scenario-1", seed=1)
        b = make_running(base, scenario="scenario-2", seed=2)

        def storm(iid: str, kind: str):
            for _ in range(6):
                httpx.post(
                    f"{base}/api/v1/instances/{iid}/injects",
                    json={"kind": kind, "params": {"start_port": 1, "end_port": 4}}
                    if kind == "port_scan"
                    else {"kind": kind},
                )
                httpx.post(f"{base}/api/v1/instances/{iid}/step", json={"ticks": 6})

        threads = [
            threading.Thread(target=storm, args=(a, "port_scan")),
            threading.Thread(target=storm, args=(b, "sql_injection")),
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        for iid, expected_tag in ((a, "port-scan"), (b, "sql-injection")):
            events = httpx.get(f"{base}/api/v1/instances/{iid}/events").json()["events"]
            seqs = [e["seq"] for e in events]
            assert seqs == list(range(1, len(seqs) + 1)), iid
            tags = {
                tag
                for e in events
                if e["kind"] == "flow"
                for tag in e["payload"]["payload_tags"]
            }
            assert tags == {expected_tag}, iid
        state_a = httpx.get(f"{base}/api/v1/instances/{a}").json()
        state_b = httpx.get(f"{base}/api/v1/instances/{b}").json()
        assert state_a["scenario"] == "scenario-1"
        assert state_b["scenario"] == "scenario-2"
        assert state_a["phase"] == state_b["phase"] == "RUNNING"


class TestCliParity:
    """Every CLI verb maps to one endpoint and matches direct API calls."""

    def run(self, base, *args):
        runner = CliRunner()
        result = runner.invoke(rangectl, [*args, "--server", base])
        assert result.exit_code == 0, result.output
        return json.loads(result.output)

    def test_catalog(self, base):
        cli_names = [s["name"] for s in self.run(base, "catalog")["scenarios"]]
        api_names = [
            s["name"] for s in httpx.get(f"{base}/api/v1/scenarios").json()["scenarios"]
        ]
        assert cli_names == api_names == ["scenario-1", "scenario-2", "scenario-3"]

    def test_validate_file(self, base, tmp_path):
        scn = tmp_path / "mini.scn"
        scn.write_text(serialize(builtin_template("scenario-3")))
        body = self.run(base, "validate", str(scn))
        assert body["ok"]

    def test_up_status_plan_cmd_step_inject_events(self, base):
        created = self.run(base, "up", "scenario-2", "--seed", "7")
        iid = created["id"]
        assert created["state"]["phase"] == "DEFINED"

        self.run(base, "cmd", iid, "start")
        stepped = self.run(base, "step", iid, "10")
        assert stepped["state"]["phase"] == "RUNNING"

        status = self.run(base, "status", iid)
        api_status = httpx.get(f"{base}/api/v1/instances/{iid}").json()
        assert status == api_status

        plan = self.run(base, "plan", iid)
        assert plan == httpx.get(f"{base}/api/v1/instances/{iid}/plan").json()

        injected = self.run(
            base, "inject", iid, "ssh_bruteforce", "--param", "attempts=4", "--seed", "3"
        )
        assert injected["flow_count"] == 4

        self.run(base, "step", iid, "6")
        events = self.run(base, "events", iid, "--kind", "alert")
        assert len(events["events"]) == 4
        assert events == httpx.get(
            f"{base}/api/v1/instances/{iid}/events", params={"kind": "alert"}
        ).json()

    def test_snapshot_restore_verbs(self, base, tmp_path):
        created = self.run(base, "up", "scenario-1", "--seed", "1")
        iid = created["id"]
        out = str(tmp_path / "snap.json")
        body = self.run(base, "snapshot", iid, "--out", out)
        assert body["path"] == out

        with live_server(str(tmp_path / "other")) as second:
            restored = self.run(second, "restore", out)
            assert restored["id"] == iid

    def test_cli_error_exits_nonzero(self, base):
        runner = CliRunner()
        result = runner.invoke(rangectl, ["status", "i-404", "--server", base])
        assert result.exit_code == 1
        assert "E_NOT_FOUND" in result.output
