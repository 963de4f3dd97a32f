"""The atomic unit of simulated traffic.

A FlowEvent stands for one logical exchange (not individual packets): a
5-tuple, the virtual tick it rides on, a set of payload tags that content
rules match against, and packet/byte counts for displays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class FlowProto(str, Enum):
    TCP = "tcp"
    UDP = "udp"
    ICMP = "icmp"


@dataclass(frozen=True)
class FlowEvent:
    tick: int
    src_node: str
    dst_node: str
    src_ip: str
    dst_ip: str
    proto: FlowProto
    src_port: int
    dst_port: int  # 0 for icmp
    payload_tags: frozenset[str] = field(default_factory=frozenset)
    packets: int = 1
    bytes: int = 64
    fid: int = 0  # instance-scoped flow id, assigned at submission

    def __post_init__(self):
        if not 0 <= self.src_port <= 65535 or not 0 <= self.dst_port <= 65535:
            raise ValueError(f"port out of range: {self.src_port}/{self.dst_port}")
        if self.proto != FlowProto.ICMP and self.dst_port < 1:
            raise ValueError(f"{self.proto.value} flows need dst_port >= 1")

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "fid": self.fid,
            "src_node": self.src_node,
            "dst_node": self.dst_node,
            "src_ip": self.src_ip,
            "dst_ip": self.dst_ip,
            "proto": self.proto.value,
            "src_port": self.src_port,
            "dst_port": self.dst_port,
            "payload_tags": sorted(self.payload_tags),
            "packets": self.packets,
            "bytes": self.bytes,
        }


def flow_from_dict(data: dict) -> FlowEvent:
    return FlowEvent(
        tick=int(data["tick"]),
        src_node=data["src_node"],
        dst_node=data["dst_node"],
        src_ip=data["src_ip"],
        dst_ip=data["dst_ip"],
        proto=FlowProto(data["proto"]),
        src_port=int(data["src_port"]),
        dst_port=int(data["dst_port"]),
        payload_tags=frozenset(data.get("payload_tags", ())),
        packets=int(data.get("packets", 1)),
        bytes=int(data.get("bytes", 64)),
        fid=int(data.get("fid", 0)),
    )
