"""Control-plane HTTP API behavior (in-process; live-socket tests are in
test_live.py)."""

import pytest
from fastapi.testclient import TestClient

from rangeforge.server import ServerConfig, create_app
from rangeforge.dsl import serialize
from rangeforge.templates import builtin_template


@pytest.fixture
def client(tmp_path):
    app = create_app(ServerConfig(data_dir=str(tmp_path)))
    with TestClient(app) as c:
        yield c


def make_running(client, scenario="scenario-1", seed=42):
    r = client.post("/api/v1/instances", json={"scenario": scenario, "seed": seed})
    assert r.status_code == 201, r.text
    iid = r.json()["id"]
    assert client.post(f"/api/v1/instances/{iid}/commands", json={"command": "start"}).status_code == 200
    r = client.post(f"/api/v1/instances/{iid}/step", json={"ticks": 10})
    assert r.json()["state"]["phase"] == "RUNNING"
    return iid


class TestCatalog:
    def test_lists_three_builtin_templates(self, client):
        r = client.get("/api/v1/scenarios")
        names = [s["name"] for s in r.json()["scenarios"]]
        assert names == ["scenario-1", "scenario-2", "scenario-3"]
        entry = r.json()["scenarios"][0]
        assert entry["source"] == "builtin"
        assert "subnets" in entry and "ip_assignments" in entry

    def test_loaded_scn_files_appear(self, tmp_path):
        scn_dir = tmp_path / "scenarios"
        scn_dir.mkdir()
        custom = builtin_template("scenario-1")
        text = serialize(custom).replace('"scenario-1"', '"classroom-a"')
        (scn_dir / "classroom-a.scn").write_text(text)
        app = create_app(ServerConfig(data_dir=str(tmp_path)))
        with TestClient(app) as client:
            names = [s["name"] for s in client.get("/api/v1/scenarios").json()["scenarios"]]
            assert "classroom-a" in names
            assert len(names) == 4

    def test_malformed_scn_file_fails_loudly(self, tmp_path):
        scn_dir = tmp_path / "scenarios"
        scn_dir.mkdir()
        (scn_dir / "bad.scn").write_text("scenario { broken")
        with pytest.raises(RuntimeError):
            create_app(ServerConfig(data_dir=str(tmp_path)))

    def test_scn_file_shadowing_builtin_fails_loudly(self, tmp_path):
        scn_dir = tmp_path / "scenarios"
        scn_dir.mkdir()
        (scn_dir / "shadow.scn").write_text(serialize(builtin_template("scenario-1")))
        with pytest.raises(RuntimeError):
            create_app(ServerConfig(data_dir=str(tmp_path)))

    def test_malformed_cluster_file_fails_loudly(self, tmp_path):
        from rangeforge.placement import ClusterSpecError

        cluster = tmp_path / "hosts.json"
        cluster.write_text('{"hosts": "not-a-list"}')
        with pytest.raises(ClusterSpecError):
            create_app(ServerConfig(data_dir=str(tmp_path), cluster_file=str(cluster)))

    def test_validate_endpoint_reports_errors(self, client):
        r = client.post(
            "/api/v1/scenarios/validate",
            content=b'scenario "x" { node a { role = wizard } }',
        )
        body = r.json()
        assert not body["ok"]
        assert any(e["code"] == "E_BAD_ROLE" for e in body["errors"])

    def test_validate_endpoint_accepts_good_text(self, client):
        r = client.post(
            "/api/v1/scenarios/validate",
            content=serialize(builtin_template("scenario-2")).encode(),
        )
        body = r.json()
        assert body["ok"]
        assert body["errors"] == []

    def test_inject_catalog_endpoint(self, client):
        kinds = [k["kind"] for k in client.get("/api/v1/injects").json()["injects"]]
        assert len(kinds) == 5


class TestInstances:
    def test_unknown_scenario_404(self, client):
        r = client.post("/api/v1/instances", json={"scenario": "nope", "seed": 1})
        assert r.status_code == 404
        assert r.json()["code"] == "E_UNKNOWN_SCENARIO"

    def test_infeasible_cluster_409(self, client):
        r = client.post(
            "/api/v1/instances",
            json={
                "scenario": "scenario-1",
                "seed": 1,
                "cluster": {"hosts": [{"id": "tiny", "cpu_cores": 1, "ram_mb": 256}]},
            },
        )
        assert r.status_code == 409
        assert r.json()["code"] == "E_INFEASIBLE"

    def test_lifecycle_round_trip(self, client):
        iid = make_running(client)
        r = client.post(f"/api/v1/instances/{iid}/commands", json={"command": "pause"})
        assert r.status_code == 200
        assert client.get(f"/api/v1/instances/{iid}").json()["phase"] == "PAUSED"

    def test_bad_transition_409(self, client):
        r = client.post("/api/v1/instances", json={"scenario": "scenario-1", "seed": 1})
        iid = r.json()["id"]
        r = client.post(f"/api/v1/instances/{iid}/commands", json={"command": "pause"})
        assert r.status_code == 409
        assert r.json()["code"] == "E_BAD_TRANSITION"

    def test_plan_endpoint(self, client):
        iid = make_running(client)
        plan = client.get(f"/api/v1/instances/{iid}/plan").json()
        assert set(plan["assignments"]) == {"pfsense-fw", "kali", "ubuntu-srv", "win-srv"}
        assert all(v["cpu"] >= 0 and v["ram_mb"] >= 0 for v in plan["residuals"].values())

    def test_missing_instance_404(self, client):
        assert client.get("/api/v1/instances/i-999").status_code == 404

    def test_instance_listing(self, client):
        make_running(client)
        listed = client.get("/api/v1/instances").json()["instances"]
        assert [i["id"] for i in listed] == ["i-1"]


class TestInjectsAndEvents:
    def test_inject_with_defaults_and_event_query(self, client):
        iid = make_running(client)
        r = client.post(f"/api/v1/instances/{iid}/injects", json={"kind": "sql_injection"})
        assert r.status_code == 200
        assert r.json()["flow_count"] == 1
        client.post(f"/api/v1/instances/{iid}/step", json={"ticks": 3})
        alerts = client.get(
            f"/api/v1/instances/{iid}/events", params={"kind": "alert"}
        ).json()["events"]
        assert len(alerts) == 1
        assert alerts[0]["payload"]["sid"] == 1003

    def test_inject_not_running_409(self, client):
        r = client.post("/api/v1/instances", json={"scenario": "scenario-1", "seed": 1})
        iid = r.json()["id"]
        r = client.post(f"/api/v1/instances/{iid}/injects", json={"kind": "port_scan"})
        assert r.status_code == 409
        assert r.json()["code"] == "E_NOT_RUNNING"

    def test_inject_no_service_coded_error(self, client):
        iid = make_running(client)
        r = client.post(
            f"/api/v1/instances/{iid}/injects",
            json={"kind": "ssh_bruteforce", "target_node": "win-srv"},
        )
        assert r.status_code == 422
        assert r.json()["code"] == "E_NO_SERVICE"

    def test_event_since_and_seq_contiguity(self, client):
        iid = make_running(client)
        events = client.get(f"/api/v1/instances/{iid}/events").json()["events"]
        seqs = [e["seq"] for e in events]
        assert seqs == list(range(1, len(seqs) + 1))
        later = client.get(
            f"/api/v1/instances/{iid}/events", params={"since": seqs[-3]}
        ).json()["events"]
        assert [e["seq"] for e in later] == seqs[-2:]

    def test_isolation_between_instances(self, client):
        a = make_running(client)
        b = make_running(client, scenario="scenario-2", seed=9)
        client.post(f"/api/v1/instances/{a}/injects", json={"kind": "port_scan", "params": {"start_port": 1, "end_port": 5}})
        client.post(f"/api/v1/instances/{a}/step", json={"ticks": 8})
        b_events = client.get(f"/api/v1/instances/{b}/events").json()["events"]
        assert all(e["kind"] != "flow" for e in b_events)
        assert client.get(f"/api/v1/instances/{b}").json()["phase"] == "RUNNING"


class TestRealtimeMode:
    def test_clock_advances_without_manual_steps(self, tmp_path):
        import time

        app = create_app(ServerConfig(data_dir=str(tmp_path), realtime=True))
        with TestClient(app) as client:
            r = client.post("/api/v1/instances", json={"scenario": "scenario-1", "seed": 1})
            iid = r.json()["id"]
            client.post(f"/api/v1/instances/{iid}/commands", json={"command": "start"})
            deadline = time.time() + 5
            phase = ""
            while time.time() < deadline:
                body = client.get(f"/api/v1/instances/{iid}").json()
                phase = body["phase"]
                if phase == "RUNNING":
                    break
                time.sleep(0.1)
            assert phase == "RUNNING"  # 8 ticks at ~100 ms each, no step calls


class TestEnvironmentDefaults:
    def test_cli_base_url_comes_from_env(self, monkeypatch):
        from rangeforge.cli import _base_url

        monkeypatch.setenv("RANGEFORGE_LISTEN", "10.1.2.3:9999")
        assert _base_url(None) == "http://10.1.2.3:9999"
        assert _base_url("127.0.0.1:1") == "http://127.0.0.1:1"
        monkeypatch.delenv("RANGEFORGE_LISTEN")
        assert _base_url(None) == "http://127.0.0.1:8470"


class TestSnapshotEndpoints:
    def test_snapshot_restore_conflict_and_fresh_restore(self, client, tmp_path):
        iid = make_running(client)
        r = client.post(f"/api/v1/instances/{iid}/snapshot", json={})
        path = r.json()["path"]
        # restoring while the instance is live conflicts
        r = client.post("/api/v1/instances/restore", json={"path": path})
        assert r.status_code in (400, 409)

    def test_restore_into_fresh_service(self, tmp_path):
        dir_a, dir_b = str(tmp_path / "a"), str(tmp_path / "b")
        app_a = create_app(ServerConfig(data_dir=dir_a))
        snap_path = str(tmp_path / "snap.json")
        with TestClient(app_a) as client_a:
            iid = make_running(client_a)
            client_a.post(f"/api/v1/instances/{iid}/snapshot", json={"path": snap_path})
        app_b = create_app(ServerConfig(data_dir=dir_b))
        with TestClient(app_b) as client_b:
            r = client_b.post("/api/v1/instances/restore", json={"path": snap_path})
            assert r.status_code == 200, r.text
            assert r.json()["state"]["phase"] == "RUNNING"
            r = client_b.post(f"/api/v1/instances/{r.json()['id']}/step", json={"ticks": 2})
            assert r.status_code == 200
