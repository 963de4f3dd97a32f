"""Run the control plane on a real localhost socket for socket-level tests
(SSE follow, CLI parity, the console contract suite drives the same thing)."""

from __future__ import annotations

import contextlib
import socket
import threading
import time

import httpx
import uvicorn

from rangeforge.server import ServerConfig, create_app


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class _Server(uvicorn.Server):
    def install_signal_handlers(self) -> None:  # runs in a thread
        pass


@contextlib.contextmanager
def live_server(data_dir: str, **config_kwargs):
    port = free_port()
    config = uvicorn.Config(
        create_app(ServerConfig(data_dir=data_dir, **config_kwargs)),
        host="127.0.0.1",
        port=port,
        log_level="error",
    )
    server = _Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{port}"
    deadline = time.time() + 10
    while time.time() < deadline:
        try:
            httpx.get(base + "/api/v1/scenarios", timeout=1)
            break
        except httpx.HTTPError:
            time.sleep(0.05)
    else:
        raise RuntimeError("live server did not come up")
    try:
        yield base
    finally:
        server.should_exit = True
        thread.join(timeout=5)
