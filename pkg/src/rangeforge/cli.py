"""rangectl: command-line client for the control plane (plus ``serve``).

Every verb maps to exactly one HTTP endpoint, so anything scripted against
the CLI behaves identically to the API.  The server address comes from
``--server`` or the RANGEFORGE_LISTEN environment variable; data placement
from RANGEFORGE_DATA_DIR.
"""

from __future__ import annotations

import json
import os
import sys
from typing import Optional

import click
import httpx

from .server import ENV_DATA_DIR, ENV_LISTEN, ServerConfig, serve as run_server

DEFAULT_LISTEN = "127.0.0.1:8470"


def _base_url(server: Optional[str]) -> str:
    listen = server or os.environ.get(ENV_LISTEN) or DEFAULT_LISTEN
    if not listen.startswith("http"):
        listen = f"http://{listen}"
    return listen.rstrip("/")


def _client(server: Optional[str]) -> httpx.Client:
    return httpx.Client(base_url=_base_url(server), timeout=30.0)


def _emit(response: httpx.Response) -> None:
    try:
        body = response.json()
    except ValueError:
        body = {"raw": response.text}
    click.echo(json.dumps(body, indent=2, sort_keys=True))
    if response.status_code >= 400:
        sys.exit(1)


@click.group()
def main() -> None:
    """Cyber-range control: scenarios, instances, injects, event logs."""


@main.command()
@click.option("--listen", default=None, help=f"host:port (default ${ENV_LISTEN} or {DEFAULT_LISTEN})")
@click.option("--data-dir", default=None, help=f"state directory (default ${ENV_DATA_DIR} or ./rangeforge-data)")
@click.option("--cluster", "cluster_file", default=None, type=click.Path(exists=True), help="cluster JSON file")
@click.option("--realtime", is_flag=True, help="advance 1 tick per 100 ms wall time")
@click.option("--static-dir", default=None, type=click.Path(), help="serve the operator console from this directory")
def serve(listen, data_dir, cluster_file, realtime, static_dir) -> None:
    """Run the control-plane service."""
    listen = listen or os.environ.get(ENV_LISTEN) or DEFAULT_LISTEN
    data_dir = data_dir or os.environ.get(ENV_DATA_DIR) or "./rangeforge-data"
    config = ServerConfig(
        data_dir=data_dir,
        cluster_file=cluster_file,
        realtime=realtime,
        static_dir=static_dir,
    )
    click.echo(f"rangeforge listening on {listen}, data in {data_dir}", err=True)
    run_server(config, listen)


@main.command()
@click.option("--server", default=None)
def catalog(server) -> None:
    """List scenarios (builtin templates plus loaded .scn files)."""
    with _client(server) as client:
        _emit(client.get("/api/v1/scenarios"))


@main.command()
@click.argument("file", type=click.Path(exists=True))
@click.option("--server", default=None)
def validate(file, server) -> None:
    """Validate a .scn scenario file."""
    with open(file, "r", encoding="utf-8") as fh:
        text = fh.read()
    with _client(server) as client:
        _emit(
            client.post(
                "/api/v1/scenarios/validate",
                content=text.encode("utf-8"),
                headers={"content-type": "text/plain; charset=utf-8"},
            )
        )


@main.command()
@click.argument("scenario")
@click.option("--seed", default=0, type=int)
@click.option("--cluster", "cluster_file", default=None, type=click.Path(exists=True))
@click.option("--server", default=None)
def up(scenario, seed, cluster_file, server) -> None:
    """Create an instance of a scenario."""
    body: dict = {"scenario": scenario, "seed": seed}
    if cluster_file:
        with open(cluster_file, "r", encoding="utf-8") as fh:
            body["cluster"] = json.load(fh)
    with _client(server) as client:
        _emit(client.post("/api/v1/instances", json=body))


@main.command()
@click.argument("instance_id")
@click.option("--server", default=None)
def status(instance_id, server) -> None:
    """Show instance phase, clock, and per-VM states."""
    with _client(server) as client:
        _emit(client.get(f"/api/v1/instances/{instance_id}"))


@main.command()
@click.argument("instance_id")
@click.option("--server", default=None)
def plan(instance_id, server) -> None:
    """Show the instance's placement plan and host residuals."""
    with _client(server) as client:
        _emit(client.get(f"/api/v1/instances/{instance_id}/plan"))


@main.command()
@click.argument("instance_id")
@click.argument("command", type=click.Choice(["start", "pause", "resume", "reset", "destroy"]))
@click.option("--server", default=None)
def cmd(instance_id, command, server) -> None:
    """Send a lifecycle command."""
    with _client(server) as client:
        _emit(client.post(f"/api/v1/instances/{instance_id}/commands", json={"command": command}))


@main.command()
@click.argument("instance_id")
@click.argument("ticks", type=int)
@click.option("--server", default=None)
def step(instance_id, ticks, server) -> None:
    """Advance the instance's virtual clock by TICKS ticks."""
    with _client(server) as client:
        _emit(client.post(f"/api/v1/instances/{instance_id}/step", json={"ticks": ticks}))


@main.command()
@click.argument("instance_id")
@click.argument("kind")
@click.option("--param", "params", multiple=True, help="k=v inject parameter (repeatable)")
@click.option("--source", default=None, help="source node (defaults to the scenario's attacker)")
@click.option("--target", default=None, help="target node (defaults to a suitable target)")
@click.option("--seed", default=0, type=int)
@click.option("--server", default=None)
def inject(instance_id, kind, params, source, target, seed, server) -> None:
    """Fire an attack inject at a running instance."""
    parsed: dict[str, int] = {}
    for item in params:
        key, _, value = item.partition("=")
        if not key or not value.lstrip("-").isdigit():
            raise click.UsageError(f"--param must be name=int, got {item!r}")
        parsed[key] = int(value)
    body = {"kind": kind, "params": parsed, "seed": seed}
    if source:
        body["source_node"] = source
    if target:
        body["target_node"] = target
    with _client(server) as client:
        _emit(client.post(f"/api/v1/instances/{instance_id}/injects", json=body))


@main.command()
@click.argument("instance_id")
@click.option("--since", default=0, type=int)
@click.option("--kind", default=None)
@click.option("--follow", is_flag=True)
@click.option("--server", default=None)
def events(instance_id, since, kind, follow, server) -> None:
    """Query the instance event log, optionally following live."""
    params: dict = {"since": since}
    if kind:
        params["kind"] = kind
    if not follow:
        with _client(server) as client:
            _emit(client.get(f"/api/v1/instances/{instance_id}/events", params=params))
        return
    params["follow"] = "true"
    with _client(server) as client:
        with client.stream(
            "GET", f"/api/v1/instances/{instance_id}/events", params=params, timeout=None
        ) as response:
            for line in response.iter_lines():
                if line.startswith("data: "):
                    click.echo(line[len("data: "):])


@main.command()
@click.argument("instance_id")
@click.option("--out", default=None, type=click.Path())
@click.option("--server", default=None)
def snapshot(instance_id, out, server) -> None:
    """Write a snapshot of the instance to disk (server side)."""
    body = {"path": out} if out else {}
    with _client(server) as client:
        _emit(client.post(f"/api/v1/instances/{instance_id}/snapshot", json=body))


@main.command()
@click.argument("path", type=click.Path())
@click.option("--server", default=None)
def restore(path, server) -> None:
    """Restore an instance from a snapshot file (server side)."""
    with _client(server) as client:
        _emit(client.post("/api/v1/instances/restore", json={"path": path}))


if __name__ == "__main__":
    main()
