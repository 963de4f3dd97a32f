"""Shared fixtures and the seeded random-scenario builder.

``random_scenario`` produces structurally valid scenarios (they pass
validation with zero errors by construction) covering the whole feature
surface: multiple networks, every role, explicit sizing, pinned addresses,
sensors in both modes, filter rules with ranges, and anti-affinity
constraints.  It is pure in the passed Random, so tests can replay any case
from its seed.
"""

from __future__ import annotations

import random

import pytest

from rangeforge.model import (
    FilterAction,
    FilterRule,
    InterfaceSpec,
    NetworkSpec,
    NodeSpec,
    PortMatch,
    Proto,
    Role,
    Scenario,
    SensorMode,
    SensorSpec,
    ServiceKind,
    ServiceSpec,
    DEFAULT_PORTS,
)

OS_LABELS = [
    "ubuntu",
    "kali",
    "pfsense",
    "opnsense",
    "windows-server",
    "security-onion",
    "mikrotik-chr",
    "freebsd",
    "oracle-linux",
    "parrot",
    "metasploitable",
]


def _port_match(rng: random.Random) -> PortMatch:
    roll = rng.random()
    if roll < 0.4:
        return PortMatch.any()
    if roll < 0.8:
        return PortMatch.single(rng.randint(1, 65535))
    lo = rng.randint(1, 60000)
    return PortMatch(lo, lo + rng.randint(0, 5000))


def _cidr(rng: random.Random) -> str:
    if rng.random() < 0.5:
        return "any"
    if rng.random() < 0.5:
        return f"10.10.{rng.randint(0, 5)}.0/24"
    return f"{rng.randint(1, 223)}.{rng.randint(0, 255)}.{rng.randint(0, 255)}.{rng.randint(1, 254)}"


def _filter_rule(rng: random.Random) -> FilterRule:
    return FilterRule(
        action=rng.choice([FilterAction.ALLOW, FilterAction.DENY]),
        proto=rng.choice(list(Proto)),
        src_cidr=_cidr(rng),
        dst_cidr=_cidr(rng),
        src_port=_port_match(rng),
        dst_port=_port_match(rng),
    )


def random_scenario(rng: random.Random, max_nodes: int = 6) -> Scenario:
    """A structurally valid scenario drawn from the full feature surface."""
    n_networks = rng.randint(1, 4)
    external_index = rng.randint(0, n_networks - 1) if rng.random() < 0.7 else None
    networks = tuple(
        NetworkSpec(f"net-{i}", external=(i == external_index)) for i in range(n_networks)
    )
    net_names = [net.name for net in networks]

    n_nodes = rng.randint(1, max_nodes)
    roles = [rng.choice(list(Role)) for _ in range(n_nodes)]
    if n_networks == 1:
        # firewalls/routers need two interfaces; keep them off single-net scenarios
        roles = [r if r not in (Role.FIREWALL, Role.ROUTER) else Role.TARGET for r in roles]

    used_pins: set[str] = set()
    nodes = []
    for index, role in enumerate(roles):
        name = f"node-{index}"
        min_ifaces = 2 if role in (Role.FIREWALL, Role.ROUTER) else 1
        iface_count = rng.randint(min_ifaces, min(3, max(min_ifaces, n_networks)))
        iface_nets = (
            rng.sample(net_names, k=min(iface_count, n_networks))
            if iface_count <= n_networks
            else [rng.choice(net_names) for _ in range(iface_count)]
        )
        interfaces = []
        for j, net in enumerate(iface_nets):
            pin = None
            if rng.random() < 0.15:
                scenario_index = net_names.index(net)
                base = (
                    "203.0.113"
                    if scenario_index == external_index
                    else f"10.10.{scenario_index}"
                )
                candidate = f"{base}.{rng.randint(100, 200)}"
                if candidate not in used_pins:
                    pin = candidate
                    used_pins.add(candidate)
            interfaces.append(InterfaceSpec(f"eth{j}", net, ip=pin))

        kinds = rng.sample(list(ServiceKind), k=rng.randint(0, 3))
        ports_taken: set[int] = set()
        services = []
        for kind in kinds:
            port = DEFAULT_PORTS[kind]
            if port in ports_taken:
                port = rng.randint(1024, 65535)
            while port in ports_taken:
                port = rng.randint(1024, 65535)
            ports_taken.add(port)
            services.append(ServiceSpec(kind, port))

        sensor = None
        if rng.random() < 0.3:
            if role in (Role.FIREWALL, Role.ROUTER) and rng.random() < 0.5:
                sensor = SensorSpec(rng.choice(["suricata", "snort"]), SensorMode.IPS)
            else:
                sensor = SensorSpec(
                    rng.choice(["suricata", "snort", "zeek"]),
                    SensorMode.IDS,
                    tap_network=rng.choice(net_names),
                )

        fw_rules = tuple(
            _filter_rule(rng) for _ in range(rng.randint(0, 3)) if role == Role.FIREWALL
        )

        nodes.append(
            NodeSpec(
                name=name,
                role=role,
                os_label=rng.choice(OS_LABELS),
                cpu=rng.choice([None, rng.randint(1, 8)]),
                ram_mb=rng.choice([None, rng.choice([512, 1024, 2048, 4096])]),
                interfaces=tuple(interfaces),
                services=tuple(services),
                sensor=sensor,
                fw_rules=fw_rules,
            )
        )

    constraints: list[tuple[str, ...]] = []
    if n_nodes >= 2 and rng.random() < 0.4:
        members = rng.sample([n.name for n in nodes], k=rng.randint(2, min(3, n_nodes)))
        constraints.append(tuple(members))

    return Scenario(
        name=f"gen-{rng.randint(0, 10**6)}",
        networks=networks,
        nodes=tuple(nodes),
        constraints=tuple(constraints),
    )


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)


def sensor_variants(scenario_name: str):
    """One template in ids-tap form and ips-inline form at the same security
    point.

    Scenario 3's shipped sensor lives on the monitor node, which cannot run
    inline; its ips variant moves the sensor onto the router the traffic
    actually crosses.  Returns (tap_scenario, inline_scenario, tap_host,
    inline_host).
    """
    from dataclasses import replace

    from rangeforge.templates import builtin_template

    scenario = builtin_template(scenario_name)
    if scenario_name == "scenario-3":
        tap_host, inline_host = "sec-onion", "chr-router"
    else:
        tap_host = inline_host = next(n.name for n in scenario.nodes if n.sensor is not None)
    engine = next(n.sensor.engine_label for n in scenario.nodes if n.sensor is not None)

    def with_sensor(host, sensor):
        nodes = tuple(
            replace(n, sensor=sensor if n.name == host else None) for n in scenario.nodes
        )
        return replace(scenario, nodes=nodes)

    tap = with_sensor(tap_host, SensorSpec(engine, SensorMode.IDS, tap_network="external"))
    inline = with_sensor(inline_host, SensorSpec(engine, SensorMode.IPS))
    return tap, inline, tap_host, inline_host
