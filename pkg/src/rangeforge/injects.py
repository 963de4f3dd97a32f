"""Synthetic attack traffic generators.

Five inject kinds cover the training catalog: a TCP port sweep, an SSH
password-guessing burst, a single tagged SQL-injection request, a spoofed
DDoS flood, and a phishing mail delivery.  Generation is a pure function of
(spec, scenario, topology, tick): the flows, their order, and the spoofed
addresses are fully reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .flows import FlowEvent, FlowProto
from .model import Role, Scenario, ServiceKind, SPOOF_CIDR
from .seeds import Splitmix64Stream, stream_seed
from .topology import TopologyGraph

TAG_PORT_SCAN = "port-scan"
TAG_SSH_BRUTEFORCE = "ssh-bruteforce"
TAG_SQL_INJECTION = "sql-injection"
TAG_DDOS = "ddos"
TAG_PHISHING = "phishing"

_SPOOF_BASE = 198 * 2**24 + 51 * 2**16 + 100 * 2**8  # 198.51.100.0
_EPHEMERAL_BASE = 40000


class InjectError(ValueError):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


@dataclass(frozen=True)
class InjectSpec:
    kind: str
    source_node: str
    target_node: str
    params: tuple[tuple[str, int], ...] = ()
    seed: int = 0

    def param(self, name: str, default: int) -> int:
        for key, value in self.params:
            if key == name:
                return value
        return default

    @classmethod
    def make(
        cls,
        kind: str,
        source_node: str,
        target_node: str,
        params: Optional[Mapping[str, int]] = None,
        seed: int = 0,
    ) -> "InjectSpec":
        items = tuple(sorted((params or {}).items()))
        return cls(kind, source_node, target_node, items, seed)


@dataclass(frozen=True)
class InjectResult:
    inject_id: str
    flows: tuple[FlowEvent, ...]
    summary: tuple[tuple[str, int], ...]  # (tag, flow count)

    def to_dict(self) -> dict:
        return {
            "inject_id": self.inject_id,
            "flow_count": len(self.flows),
            "summary": {tag: count for tag, count in self.summary},
        }


@dataclass(frozen=True)
class InjectKind:
    kind: str
    tag: str
    requires_service: Optional[ServiceKind]
    params: tuple[tuple[str, int], ...]  # (name, default)
    description: str

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "tag": self.tag,
            "requires_service": self.requires_service.value if self.requires_service else None,
            "params": {name: default for name, default in self.params},
            "description": self.description,
        }


_CATALOG = (
    InjectKind(
        "port_scan",
        TAG_PORT_SCAN,
        None,
        (("start_port", 1), ("end_port", 1024)),
        "TCP sweep: one flow per port in the range",
    ),
    InjectKind(
        "ssh_bruteforce",
        TAG_SSH_BRUTEFORCE,
        ServiceKind.SSH,
        (("attempts", 20),),
        "Repeated login attempts against the target's ssh service",
    ),
    InjectKind(
        "sql_injection",
        TAG_SQL_INJECTION,
        ServiceKind.HTTP,
        (),
        "One tagged http request against the target's web service",
    ),
    InjectKind(
        "ddos_flood",
        TAG_DDOS,
        None,
        (("count", 500), ("dst_port", 0)),
        "Flood from seeded spoofed sources in 198.51.100.0/24 (dst_port 0 = auto)",
    ),
    InjectKind(
        "phishing_mail",
        TAG_PHISHING,
        ServiceKind.SMTP,
        (),
        "One mail delivery flow to the target's smtp service",
    ),
)


def list_injects() -> list[InjectKind]:
    """The closed catalog of inject kinds with parameter schemas."""
    return list(_CATALOG)


def inject_kind(kind: str) -> InjectKind:
    for entry in _CATALOG:
        if entry.kind == kind:
            return entry
    raise InjectError("E_UNKNOWN_KIND", f"unknown inject kind {kind!r}")


def generate(
    spec: InjectSpec,
    scenario: Scenario,
    topology: TopologyGraph,
    clock_tick: int,
    inject_id: Optional[str] = None,
) -> InjectResult:
    """Produce the inject's flows, timestamped consecutively from clock_tick."""
    kind = inject_kind(spec.kind)
    source = scenario.node(spec.source_node)
    target = scenario.node(spec.target_node)
    if source is None:
        raise InjectError("E_UNKNOWN_NODE", f"unknown source node {spec.source_node!r}")
    if target is None:
        raise InjectError("E_UNKNOWN_NODE", f"unknown target node {spec.target_node!r}")

    allowed_roles = (Role.ATTACKER, Role.OPERATOR) if spec.kind == "phishing_mail" else (Role.ATTACKER,)
    if source.role not in allowed_roles:
        raise InjectError(
            "E_BAD_SOURCE",
            f"{spec.kind} must come from role "
            f"{'/'.join(r.value for r in allowed_roles)}, not {source.role.value}",
        )

    service = None
    if kind.requires_service is not None:
        service = target.service_of_kind(kind.requires_service)
        if service is None:
            raise InjectError(
                "E_NO_SERVICE",
                f"target {target.name!r} has no {kind.requires_service.value} service",
            )

    src_ips = topology.node_addresses(source.name)
    dst_ips = topology.node_addresses(target.name)
    if not src_ips or not dst_ips:
        raise InjectError("E_UNKNOWN_NODE", "endpoint has no addressed interface")
    src_ip, dst_ip = src_ips[0], dst_ips[0]

    if inject_id is None:
        inject_id = f"{spec.kind}-t{clock_tick}"

    flows: list[FlowEvent] = []

    def add(index: int, **kwargs) -> None:
        flows.append(
            FlowEvent(
                tick=clock_tick + index,
                src_node=source.name,
                dst_node=target.name,
                **kwargs,
            )
        )

    if spec.kind == "port_scan":
        start = spec.param("start_port", 1)
        end = spec.param("end_port", 1024)
        if not 1 <= start <= end <= 65535:
            raise InjectError("E_BAD_PARAM", f"bad port range {start}-{end}")
        for index, port in enumerate(range(start, end + 1)):
            add(
                index,
                src_ip=src_ip,
                dst_ip=dst_ip,
                proto=FlowProto.TCP,
                src_port=_EPHEMERAL_BASE + index % 25000,
                dst_port=port,
                payload_tags=frozenset({TAG_PORT_SCAN}),
                packets=1,
                bytes=60,
            )
    elif spec.kind == "ssh_bruteforce":
        attempts = spec.param("attempts", 20)
        if attempts < 1:
            raise InjectError("E_BAD_PARAM", "attempts must be >= 1")
        for index in range(attempts):
            add(
                index,
                src_ip=src_ip,
                dst_ip=dst_ip,
                proto=FlowProto.TCP,
                src_port=_EPHEMERAL_BASE + index % 25000,
                dst_port=service.port,
                payload_tags=frozenset({TAG_SSH_BRUTEFORCE}),
                packets=12,
                bytes=1400,
            )
    elif spec.kind == "sql_injection":
        add(
            0,
            src_ip=src_ip,
            dst_ip=dst_ip,
            proto=FlowProto.TCP,
            src_port=_EPHEMERAL_BASE,
            dst_port=service.port,
            payload_tags=frozenset({TAG_SQL_INJECTION}),
            packets=6,
            bytes=900,
        )
    elif spec.kind == "ddos_flood":
        count = spec.param("count", 500)
        if count < 1:
            raise InjectError("E_BAD_PARAM", "count must be >= 1")
        dst_port = spec.param("dst_port", 0)
        if dst_port == 0:
            dst_port = target.services[0].port if target.services else 80
        stream = Splitmix64Stream(stream_seed(spec.seed, source.name))
        for index in range(count):
            draw = stream.next_u64()
            spoofed = _SPOOF_BASE + 1 + (draw % 254)  # hosts .1-.254 of 198.51.100.0/24
            add(
                index,
                src_ip=_render_ip(spoofed),
                dst_ip=dst_ip,
                proto=FlowProto.TCP,
                src_port=_EPHEMERAL_BASE + index % 25000,
                dst_port=dst_port,
                payload_tags=frozenset({TAG_DDOS}),
                packets=1,
                bytes=512,
            )
    elif spec.kind == "phishing_mail":
        add(
            0,
            src_ip=src_ip,
            dst_ip=dst_ip,
            proto=FlowProto.TCP,
            src_port=_EPHEMERAL_BASE,
            dst_port=service.port,
            payload_tags=frozenset({TAG_PHISHING}),
            packets=8,
            bytes=2200,
        )

    return InjectResult(
        inject_id=inject_id,
        flows=tuple(flows),
        summary=((kind.tag, len(flows)),),
    )


def _render_ip(value: int) -> str:
    return ".".join(str((value >> shift) & 0xFF) for shift in (24, 16, 8, 0))
