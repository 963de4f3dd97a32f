"""Signature rule engine and threshold anomaly monitor.

Rules use a single-line grammar shaped like the classic IDS engines but
deliberately tiny; this subset is the entire supported language::

    alert tcp any any -> 10.10.1.0/24 22 (msg:"ssh brute"; sid:100; tag:"ssh-bruteforce";)
    drop  tcp any any -> any 80         (msg:"sqli"; sid:200; tag:"sql-injection";)

* action: ``alert`` or ``drop``
* proto: tcp / udp / icmp / any
* endpoints: CIDR (or bare IPv4) or ``any``; single port or ``any``
* options: ``msg`` (required-ish but defaulted), ``sid`` (required, unique
  per ruleset), ``tag`` (must appear in the flow's payload tags), ``rate``
  (``count,window_seconds``; such rules feed windowed evaluation only and
  never alert per flow).

"Content" matching is exact membership of ``tag`` in the flow's payload tag
set; there is no byte or regex matching here.

The anomaly monitor counts flows per (dst_ip, dst_port) in fixed windows of
``window_ticks`` and emits one AnomalyEvent per key per window the moment the
count reaches the threshold.  State updates are pure: callers get a new
WindowState back.
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import Optional

from .flows import FlowEvent
from .model import SensorMode, SensorSpec

DEFAULT_ANOMALY_THRESHOLD = 100  # flows per window per (dst_ip, dst_port)
DEFAULT_WINDOW_TICKS = 100  # 100 ticks = 10 s of virtual time


class RuleAction(str, Enum):
    ALERT = "alert"
    DROP = "drop"


class ActionTaken(str, Enum):
    PASS = "pass"
    DROP = "drop"
    DOWNGRADED_PASS = "downgraded-pass"


@dataclass(frozen=True)
class RateSpec:
    count: int
    window_seconds: int


@dataclass(frozen=True)
class DetectionRule:
    action: RuleAction
    proto: str  # tcp/udp/icmp/any
    src_cidr: str  # CIDR text or "any"
    src_port: Optional[int]  # None = any
    dst_cidr: str
    dst_port: Optional[int]
    sid: int
    msg: str = ""
    tag: Optional[str] = None
    rate: Optional[RateSpec] = None

    def render(self) -> str:
        opts = [f'msg:"{self.msg}"', f"sid:{self.sid}"]
        if self.tag is not None:
            opts.append(f'tag:"{self.tag}"')
        if self.rate is not None:
            opts.append(f"rate:{self.rate.count},{self.rate.window_seconds}")
        sport = "any" if self.src_port is None else str(self.src_port)
        dport = "any" if self.dst_port is None else str(self.dst_port)
        return (
            f"{self.action.value} {self.proto} {self.src_cidr} {sport} -> "
            f"{self.dst_cidr} {dport} ({'; '.join(opts)};)"
        )


@dataclass(frozen=True)
class RuleParseError(Exception):
    line: int
    column: int
    code: str
    message: str

    def __str__(self) -> str:  # Exception repr stays readable in logs
        return f"{self.code} at {self.line}:{self.column}: {self.message}"


@dataclass(frozen=True)
class AlertEvent:
    tick: int
    sid: int
    msg: str
    flow_ref: int  # fid of the triggering flow
    sensor: str  # host node name
    action_taken: ActionTaken

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "sid": self.sid,
            "msg": self.msg,
            "flow_ref": self.flow_ref,
            "sensor": self.sensor,
            "action_taken": self.action_taken.value,
        }


@dataclass(frozen=True)
class AnomalyEvent:
    tick: int
    dst_ip: str
    dst_port: int
    observed_rate: int  # flows in the window at emission
    threshold: int

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "dst_ip": self.dst_ip,
            "dst_port": self.dst_port,
            "observed_rate": self.observed_rate,
            "threshold": self.threshold,
        }


# ---------------------------------------------------------------------------
# Rule parsing
# ---------------------------------------------------------------------------

_HEADER_RE = re.compile(
    r"^\s*(?P<action>\S+)\s+(?P<proto>\S+)\s+(?P<src>\S+)\s+(?P<sport>\S+)"
    r"\s+->\s+(?P<dst>\S+)\s+(?P<dport>\S+)\s*\((?P<opts>.*)\)\s*$"
)
_OPT_RE = re.compile(r'\s*(?P<key>[a-z_]+)\s*:\s*(?:"(?P<qval>[^"]*)"|(?P<val>[^;]*?))\s*$')

_KNOWN_OPTIONS = {"msg", "sid", "tag", "rate"}


def parse_rule(text: str, line: int = 1) -> DetectionRule:
    """Parse one rule line; raises RuleParseError on any defect."""
    match = _HEADER_RE.match(text)
    if match is None:
        raise RuleParseError(line, 1, "E_RULE_SYNTAX", f"unparseable rule: {text.strip()!r}")

    def err(code: str, message: str, column: int = 1) -> RuleParseError:
        return RuleParseError(line, column, code, message)

    action_text = match.group("action")
    try:
        action = RuleAction(action_text)
    except ValueError:
        raise err("E_BAD_ACTION", f"unknown action {action_text!r}") from None

    proto = match.group("proto")
    if proto not in ("tcp", "udp", "icmp", "any"):
        raise err("E_BAD_PROTO", f"unknown protocol {proto!r}")

    src_cidr = _parse_endpoint(match.group("src"), line)
    dst_cidr = _parse_endpoint(match.group("dst"), line)
    src_port = _parse_port(match.group("sport"), line)
    dst_port = _parse_port(match.group("dport"), line)

    msg = ""
    sid: Optional[int] = None
    tag: Optional[str] = None
    rate: Optional[RateSpec] = None
    opts_text = match.group("opts").strip()
    if opts_text:
        for chunk in filter(None, (part.strip() for part in opts_text.split(";"))):
            opt = _OPT_RE.match(chunk)
            if opt is None:
                raise err("E_BAD_OPTION", f"malformed option {chunk!r}")
            key = opt.group("key")
            value = opt.group("qval") if opt.group("qval") is not None else (opt.group("val") or "").strip()
            if key not in _KNOWN_OPTIONS:
                raise err("E_UNKNOWN_OPTION", f"unknown option key {key!r}")
            if key == "msg":
                msg = value
            elif key == "sid":
                if not value.isdigit() or int(value) < 1:
                    raise err("E_BAD_SID", f"sid must be a positive integer: {value!r}")
                sid = int(value)
            elif key == "tag":
                if not re.match(r"^[a-z0-9-]+$", value):
                    raise err("E_BAD_TAG", f"tag must be a lowercase token: {value!r}")
                tag = value
            elif key == "rate":
                rate_match = re.match(r"^(\d+)\s*,\s*(\d+)$", value)
                if rate_match is None:
                    raise err("E_BAD_RATE", f"rate takes 'count,window_seconds': {value!r}")
                count, window = int(rate_match.group(1)), int(rate_match.group(2))
                if count < 1 or window < 1:
                    raise err("E_BAD_RATE", "rate count and window must be >= 1")
                rate = RateSpec(count, window)
    if sid is None:
        raise err("E_MISSING_SID", "rule has no sid option")

    return DetectionRule(
        action=action,
        proto=proto,
        src_cidr=src_cidr,
        src_port=src_port,
        dst_cidr=dst_cidr,
        dst_port=dst_port,
        sid=sid,
        msg=msg,
        tag=tag,
        rate=rate,
    )


def _parse_endpoint(text: str, line: int) -> str:
    if text == "any":
        return "any"
    try:
        ipaddress.ip_network(text)
        return text
    except ValueError:
        raise RuleParseError(line, 1, "E_BAD_CIDR", f"malformed address {text!r}") from None


def _parse_port(text: str, line: int) -> Optional[int]:
    if text == "any":
        return None
    if text.isdigit() and 0 <= int(text) <= 65535:
        return int(text)
    raise RuleParseError(line, 1, "E_BAD_PORT", f"malformed port {text!r}")


def parse_ruleset(text: str) -> tuple[tuple[DetectionRule, ...], tuple[RuleParseError, ...]]:
    """Parse a .rules document: one rule per line, '#' comments, blank lines ok.

    Duplicate sids are load errors (silent shadowing hides test bugs), not
    last-wins.
    """
    rules: list[DetectionRule] = []
    errors: list[RuleParseError] = []
    seen_sids: dict[int, int] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            rule = parse_rule(stripped, line=line_no)
        except RuleParseError as exc:
            errors.append(exc)
            continue
        if rule.sid in seen_sids:
            errors.append(
                RuleParseError(
                    line_no,
                    1,
                    "E_DUP_SID",
                    f"sid {rule.sid} already defined on line {seen_sids[rule.sid]}",
                )
            )
            continue
        seen_sids[rule.sid] = line_no
        rules.append(rule)
    return tuple(rules), tuple(errors)


def load_ruleset(text: str) -> tuple[DetectionRule, ...]:
    rules, errors = parse_ruleset(text)
    if errors:
        raise errors[0]
    return rules


# ---------------------------------------------------------------------------
# Matching and evaluation
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4096)
def _net_bounds(cidr: str) -> tuple[int, int]:
    net = ipaddress.ip_network(cidr)
    return int(net.network_address), int(net.broadcast_address)


@lru_cache(maxsize=65536)
def _ip_int(ip: str) -> int:
    return int(ipaddress.ip_address(ip))


def _cidr_contains(cidr: str, ip: str) -> bool:
    if cidr == "any":
        return True
    lo, hi = _net_bounds(cidr)
    return lo <= _ip_int(ip) <= hi


def match_flow(rule: DetectionRule, flow: FlowEvent) -> bool:
    """Per-flow signature match; rate-bearing rules never match here."""
    if rule.rate is not None:
        return False
    if rule.proto != "any" and rule.proto != flow.proto.value:
        return False
    if rule.src_port is not None and rule.src_port != flow.src_port:
        return False
    if rule.dst_port is not None and rule.dst_port != flow.dst_port:
        return False
    if not _cidr_contains(rule.src_cidr, flow.src_ip):
        return False
    if not _cidr_contains(rule.dst_cidr, flow.dst_ip):
        return False
    if rule.tag is not None and rule.tag not in flow.payload_tags:
        return False
    return True


@dataclass(frozen=True)
class SensorBinding:
    """A sensor spec tied to the node hosting it."""

    host: str
    spec: SensorSpec


@dataclass(frozen=True)
class Verdict:
    alerts: tuple[AlertEvent, ...]
    final_action: ActionTaken  # PASS or DROP


def evaluate(
    sensor: SensorBinding, ruleset: tuple[DetectionRule, ...], flow: FlowEvent
) -> Verdict:
    """Run every rule over one flow as seen by one sensor.

    All matching rules alert, ordered by sid.  Only an inline sensor in ips
    mode turns a drop-action match into an actual drop; a tap/ids sensor
    records the would-be drop as action_taken=downgraded-pass.
    """
    can_drop = sensor.spec.inline and sensor.spec.mode == SensorMode.IPS
    alerts: list[AlertEvent] = []
    dropped = False
    for rule in sorted(ruleset, key=lambda r: r.sid):
        if not match_flow(rule, flow):
            continue
        if rule.action == RuleAction.DROP:
            taken = ActionTaken.DROP if can_drop else ActionTaken.DOWNGRADED_PASS
            dropped = dropped or can_drop
        else:
            taken = ActionTaken.PASS
        alerts.append(
            AlertEvent(
                tick=flow.tick,
                sid=rule.sid,
                msg=rule.msg,
                flow_ref=flow.fid,
                sensor=sensor.host,
                action_taken=taken,
            )
        )
    return Verdict(tuple(alerts), ActionTaken.DROP if dropped else ActionTaken.PASS)


# ---------------------------------------------------------------------------
# Windowed anomaly monitor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WindowState:
    threshold: int = DEFAULT_ANOMALY_THRESHOLD
    window_ticks: int = DEFAULT_WINDOW_TICKS
    # (window index, dst_ip, dst_port) -> flow count
    counts: tuple[tuple[tuple[int, str, int], int], ...] = ()

    def count_of(self, window: int, dst_ip: str, dst_port: int) -> int:
        for key, count in self.counts:
            if key == (window, dst_ip, dst_port):
                return count
        return 0

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "window_ticks": self.window_ticks,
            "counts": [
                {"window": key[0], "dst_ip": key[1], "dst_port": key[2], "count": count}
                for key, count in self.counts
            ],
        }


def window_state_from_dict(data: dict) -> WindowState:
    return WindowState(
        threshold=int(data["threshold"]),
        window_ticks=int(data["window_ticks"]),
        counts=tuple(
            ((int(e["window"]), e["dst_ip"], int(e["dst_port"])), int(e["count"]))
            for e in data.get("counts", ())
        ),
    )


def evaluate_window(
    state: WindowState, flow: FlowEvent
) -> tuple[WindowState, Optional[AnomalyEvent]]:
    """Count a flow against its (dst_ip, dst_port) window; emit on crossing.

    Windows are fixed, disjoint spans of ``window_ticks`` ticks keyed by
    ``flow.tick // window_ticks``; counts never carry across windows, and
    each key fires at most once per window (exactly when the count reaches
    the threshold).
    """
    window = flow.tick // state.window_ticks
    key = (window, flow.dst_ip, flow.dst_port)
    counts = dict(state.counts)
    counts[key] = counts.get(key, 0) + 1
    new_state = replace(state, counts=tuple(sorted(counts.items())))
    if counts[key] == state.threshold:
        return new_state, AnomalyEvent(
            tick=flow.tick,
            dst_ip=flow.dst_ip,
            dst_port=flow.dst_port,
            observed_rate=counts[key],
            threshold=state.threshold,
        )
    return new_state, None
