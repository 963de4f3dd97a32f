"""Scenario domain model and validation.

A Scenario is a declarative description of one training network: its virtual
networks, the nodes attached to them, the services those nodes expose, the
sensors watching traffic, and per-firewall filter rules.  All types are
immutable values; two scenarios compare equal field by field, which the DSL
round-trip tests rely on.

Validation never raises.  ``validate_scenario`` returns an ordered report of
coded findings (errors and warnings) so callers can surface every problem in
one pass.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

IDENT_RE = re.compile(r"^[a-z0-9-]+$")

# Networks get 10.10.<index>.0/24 in declaration order; the (at most one)
# external network instead gets the documentation range below.  Spoofed DDoS
# sources come from SPOOF_CIDR so they are visibly non-local.
INTERNAL_CIDR_TEMPLATE = "10.10.{index}.0/24"
EXTERNAL_CIDR = "203.0.113.0/24"
SPOOF_CIDR = "198.51.100.0/24"


class Role(str, Enum):
    FIREWALL = "firewall"
    ROUTER = "router"
    ATTACKER = "attacker"
    TARGET = "target"
    MONITOR = "monitor"
    OPERATOR = "operator"


class ServiceKind(str, Enum):
    HTTP = "http"
    DNS = "dns"
    SSH = "ssh"
    RDP = "rdp"
    SMTP = "smtp"
    IMAP = "imap"


# IANA well-known ports per service kind; other ports are legal but warned on.
DEFAULT_PORTS = {
    ServiceKind.HTTP: 80,
    ServiceKind.DNS: 53,
    ServiceKind.SSH: 22,
    ServiceKind.RDP: 3389,
    ServiceKind.SMTP: 25,
    ServiceKind.IMAP: 143,
}


class SensorMode(str, Enum):
    IDS = "ids"
    IPS = "ips"


class Proto(str, Enum):
    TCP = "tcp"
    UDP = "udp"
    ICMP = "icmp"
    ANY = "any"


class FilterAction(str, Enum):
    ALLOW = "allow"
    DENY = "deny"


# Default VM sizing when a node declares no explicit cpu/ram_mb.  The figures
# name software, not hardware, so the table is ours; the DSL can override it
# per node.
DEFAULT_SIZING = {
    Role.FIREWALL: (1, 1024),
    Role.MONITOR: (4, 8192),
}
FALLBACK_SIZING = (2, 2048)


def default_sizing(role: Role) -> tuple[int, int]:
    """(cpu_cores, ram_mb) used when a node spec leaves sizing implicit."""
    return DEFAULT_SIZING.get(role, FALLBACK_SIZING)


@dataclass(frozen=True)
class ServiceSpec:
    kind: ServiceKind
    port: int


@dataclass(frozen=True)
class SensorSpec:
    engine_label: str  # "suricata", "snort", "zeek", ... metadata only
    mode: SensorMode
    tap_network: Optional[str] = None  # tap attachment; None means inline

    @property
    def inline(self) -> bool:
        return self.tap_network is None


@dataclass(frozen=True)
class InterfaceSpec:
    name: str
    network: str
    ip: Optional[str] = None  # explicit pin; overrides deterministic assignment


@dataclass(frozen=True)
class PortMatch:
    """Port selector of a filter rule: a single port, a range, or any."""

    lo: int = 0
    hi: int = 65535

    @classmethod
    def any(cls) -> "PortMatch":
        return cls(0, 65535)

    @classmethod
    def single(cls, port: int) -> "PortMatch":
        return cls(port, port)

    @property
    def is_any(self) -> bool:
        return self.lo == 0 and self.hi == 65535

    def matches(self, port: int) -> bool:
        return self.lo <= port <= self.hi

    def render(self) -> str:
        if self.is_any:
            return "any"
        if self.lo == self.hi:
            return str(self.lo)
        return f"{self.lo}-{self.hi}"


@dataclass(frozen=True)
class FilterRule:
    action: FilterAction
    proto: Proto
    src_cidr: str  # CIDR text or "any"
    dst_cidr: str
    src_port: PortMatch
    dst_port: PortMatch

    def render(self) -> str:
        return (
            f"{self.action.value} {self.proto.value} {self.src_cidr} "
            f"{self.src_port.render()} -> {self.dst_cidr} {self.dst_port.render()}"
        )


@dataclass(frozen=True)
class NodeSpec:
    name: str
    role: Role
    os_label: str = "ubuntu"
    cpu: Optional[int] = None  # None -> default_sizing(role)
    ram_mb: Optional[int] = None
    interfaces: tuple[InterfaceSpec, ...] = ()
    services: tuple[ServiceSpec, ...] = ()
    sensor: Optional[SensorSpec] = None
    fw_rules: tuple[FilterRule, ...] = ()
    anti_affinity_group: Optional[str] = None

    @property
    def effective_cpu(self) -> int:
        return self.cpu if self.cpu is not None else default_sizing(self.role)[0]

    @property
    def effective_ram_mb(self) -> int:
        return self.ram_mb if self.ram_mb is not None else default_sizing(self.role)[1]

    def service_of_kind(self, kind: ServiceKind) -> Optional[ServiceSpec]:
        for svc in self.services:
            if svc.kind == kind:
                return svc
        return None


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    external: bool = False


@dataclass(frozen=True)
class Scenario:
    name: str
    networks: tuple[NetworkSpec, ...] = ()
    nodes: tuple[NodeSpec, ...] = ()
    # Anti-affinity declarations: each entry is an ordered tuple of node names
    # that must not share a hypervisor host.
    constraints: tuple[tuple[str, ...], ...] = ()

    def network(self, name: str) -> Optional[NetworkSpec]:
        for net in self.networks:
            if net.name == name:
                return net
        return None

    def node(self, name: str) -> Optional[NodeSpec]:
        for node in self.nodes:
            if node.name == name:
                return node
        return None

    def external_network(self) -> Optional[NetworkSpec]:
        for net in self.networks:
            if net.external:
                return net
        return None

    def network_cidr(self, name: str) -> str:
        """Deterministic subnet for a declared network (declaration-indexed)."""
        for index, net in enumerate(self.networks):
            if net.name == name:
                if net.external:
                    return EXTERNAL_CIDR
                return INTERNAL_CIDR_TEMPLATE.format(index=index)
        raise KeyError(name)

    def effective_group(self, node: NodeSpec) -> Optional[str]:
        """Anti-affinity group id: explicit wins, else constraint membership."""
        if node.anti_affinity_group is not None:
            return node.anti_affinity_group
        for index, members in enumerate(self.constraints):
            if node.name in members:
                return f"separate-{index}"
        return None


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    severity: Severity
    code: str
    location: str  # e.g. "node ubuntu-srv / iface eth0"
    message: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    @property
    def errors(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity == Severity.ERROR)

    @property
    def warnings(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity == Severity.WARNING)

    @property
    def ok(self) -> bool:
        return not self.errors


def _error(code: str, location: str, message: str) -> Finding:
    return Finding(Severity.ERROR, code, location, message)


def _warning(code: str, location: str, message: str) -> Finding:
    return Finding(Severity.WARNING, code, location, message)


def validate_scenario(scenario: Scenario) -> ValidationReport:
    """Check every structural invariant; findings follow declaration order."""
    findings: list[Finding] = []
    loc_scenario = f"scenario {scenario.name!r}"

    if not scenario.name or not IDENT_RE.match(scenario.name):
        findings.append(
            _error("E_BAD_NAME", loc_scenario, "scenario name must match [a-z0-9-]+")
        )

    net_names: set[str] = set()
    external_count = 0
    for net in scenario.networks:
        loc = f"network {net.name!r}"
        if not net.name or not IDENT_RE.match(net.name):
            findings.append(_error("E_BAD_NAME", loc, "network name must match [a-z0-9-]+"))
        if net.name in net_names:
            findings.append(_error("E_DUP_NET", loc, "duplicate network name"))
        net_names.add(net.name)
        if net.external:
            external_count += 1
    if external_count > 1:
        findings.append(
            _error(
                "E_MULTI_EXTERNAL",
                loc_scenario,
                f"{external_count} networks flagged external; at most one allowed",
            )
        )

    node_names: set[str] = set()
    pinned_ips: dict[str, str] = {}
    for node in scenario.nodes:
        loc_node = f"node {node.name!r}"
        if not node.name or not IDENT_RE.match(node.name):
            findings.append(_error("E_BAD_NAME", loc_node, "node name must match [a-z0-9-]+"))
        if node.name in node_names:
            findings.append(_error("E_DUP_NODE", loc_node, "duplicate node name"))
        node_names.add(node.name)

        min_ifaces = 2 if node.role in (Role.FIREWALL, Role.ROUTER) else 1
        if len(node.interfaces) < min_ifaces:
            findings.append(
                _error(
                    "E_TOO_FEW_IFACES",
                    loc_node,
                    f"role {node.role.value} requires >= {min_ifaces} interfaces, "
                    f"has {len(node.interfaces)}",
                )
            )

        if node.cpu is not None and node.cpu < 1:
            findings.append(_error("E_BAD_RESOURCE", loc_node, "cpu must be >= 1"))
        if node.ram_mb is not None and node.ram_mb < 1:
            findings.append(_error("E_BAD_RESOURCE", loc_node, "ram_mb must be >= 1"))

        iface_names: set[str] = set()
        for iface in node.interfaces:
            loc_iface = f"{loc_node} / iface {iface.name!r}"
            if iface.name in iface_names:
                findings.append(_error("E_DUP_IFACE", loc_iface, "duplicate interface name"))
            iface_names.add(iface.name)
            if iface.network not in net_names:
                findings.append(
                    _error(
                        "E_UNKNOWN_NET",
                        loc_iface,
                        f"references undeclared network {iface.network!r}",
                    )
                )
            elif iface.ip is not None:
                cidr = scenario.network_cidr(iface.network)
                if not _ip_in_cidr(iface.ip, cidr):
                    findings.append(
                        _error(
                            "E_IP_OUT_OF_SUBNET",
                            loc_iface,
                            f"pinned ip {iface.ip} outside {cidr}",
                        )
                    )
                if iface.ip in pinned_ips:
                    findings.append(
                        _error(
                            "E_DUP_PIN",
                            loc_iface,
                            f"ip {iface.ip} already pinned at {pinned_ips[iface.ip]}",
                        )
                    )
                pinned_ips.setdefault(iface.ip, loc_iface)

        seen_ports: set[int] = set()
        for svc in node.services:
            loc_svc = f"{loc_node} / service {svc.kind.value}"
            if not 1 <= svc.port <= 65535:
                findings.append(_error("E_BAD_PORT", loc_svc, f"port {svc.port} out of range"))
            elif svc.port in seen_ports:
                findings.append(_error("E_DUP_SERVICE_PORT", loc_svc, f"port {svc.port} reused"))
            elif svc.port != DEFAULT_PORTS[svc.kind]:
                findings.append(
                    _warning(
                        "W_NON_DEFAULT_PORT",
                        loc_svc,
                        f"port {svc.port} differs from well-known {DEFAULT_PORTS[svc.kind]}",
                    )
                )
            seen_ports.add(svc.port)

        if node.sensor is not None:
            loc_sensor = f"{loc_node} / sensor"
            sensor = node.sensor
            if sensor.mode == SensorMode.IPS and not sensor.inline:
                findings.append(
                    _error(
                        "E_IPS_NOT_INLINE",
                        loc_sensor,
                        "mode=ips requires inline attachment",
                    )
                )
            if sensor.mode == SensorMode.IPS and node.role not in (Role.FIREWALL, Role.ROUTER):
                findings.append(
                    _error(
                        "E_IPS_BAD_ROLE",
                        loc_sensor,
                        f"ips sensor on role {node.role.value}; needs firewall or router",
                    )
                )
            if sensor.tap_network is not None and sensor.tap_network not in net_names:
                findings.append(
                    _error(
                        "E_UNKNOWN_NET",
                        loc_sensor,
                        f"tap references undeclared network {sensor.tap_network!r}",
                    )
                )

    constrained: set[str] = set()
    for index, members in enumerate(scenario.constraints):
        loc_con = f"constraint separate-{index}"
        if len(members) < 2:
            findings.append(_error("E_BAD_CONSTRAINT", loc_con, "needs >= 2 members"))
        for member in members:
            if member not in node_names:
                findings.append(
                    _error("E_UNKNOWN_NODE", loc_con, f"unknown node {member!r}")
                )
            elif member in constrained:
                findings.append(
                    _error(
                        "E_CONSTRAINT_OVERLAP",
                        loc_con,
                        f"node {member!r} appears in multiple constraints",
                    )
                )
            node = scenario.node(member)
            if node is not None and node.anti_affinity_group is not None:
                findings.append(
                    _error(
                        "E_CONSTRAINT_OVERLAP",
                        loc_con,
                        f"node {member!r} already carries an explicit group",
                    )
                )
            constrained.add(member)

    return ValidationReport(tuple(findings))


def _ip_in_cidr(ip: str, cidr: str) -> bool:
    import ipaddress

    try:
        return ipaddress.ip_address(ip) in ipaddress.ip_network(cidr)
    except ValueError:
        return False


def scenario_to_dict(scenario: Scenario) -> dict:
    """Plain-data form used for canonical JSON serialization."""
    return {
        "name": scenario.name,
        "networks": [
            {"name": n.name, "external": n.external} for n in scenario.networks
        ],
        "nodes": [_node_to_dict(node) for node in scenario.nodes],
        "constraints": [list(members) for members in scenario.constraints],
    }


def _node_to_dict(node: NodeSpec) -> dict:
    out: dict = {
        "name": node.name,
        "role": node.role.value,
        "os": node.os_label,
        "cpu": node.effective_cpu,
        "ram_mb": node.effective_ram_mb,
        "interfaces": [
            {"name": i.name, "network": i.network, "ip": i.ip} for i in node.interfaces
        ],
        "services": [{"kind": s.kind.value, "port": s.port} for s in node.services],
        "fw_rules": [r.render() for r in node.fw_rules],
        "anti_affinity_group": node.anti_affinity_group,
    }
    if node.sensor is not None:
        out["sensor"] = {
            "engine": node.sensor.engine_label,
            "mode": node.sensor.mode.value,
            "tap_network": node.sensor.tap_network,
        }
    else:
        out["sensor"] = None
    return out


def iter_network_interfaces(
    scenario: Scenario, network: str
) -> Iterable[tuple[NodeSpec, InterfaceSpec]]:
    """Interfaces attached to a network, in declaration (attach) order."""
    for node in scenario.nodes:
        for iface in node.interfaces:
            if iface.network == network:
                yield node, iface
