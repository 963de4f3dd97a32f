"""Scenario text format (``.scn``): parser and canonical serializer.

The format is a line-oriented brace grammar::

    scenario "name" {
      network wan external
      network lan
      node fw {
        role = firewall
        os = pfsense
        cpu = 1
        ram_mb = 1024
        group = edge
        iface wan0 net = wan
        iface lan0 net = lan ip = 10.10.1.1
        service http port = 80
        sensor engine = suricata mode = ids monitor = wan
        rule allow tcp any any -> 10.10.1.0/24 80
      }
      constraint separate(a, b)
    }

Statements end at a newline or ``;``; ``#`` starts a comment.  The parser
reports every problem it can find in one pass (it never stops at the first
error and never raises on malformed input).  Error codes form a closed set:

    E_SYNTAX          unexpected or missing token
    E_BAD_CHAR        byte that fits no token
    E_UNTERMINATED    string literal without closing quote
    E_BAD_NAME        identifier not matching [a-z0-9-]+
    E_BAD_ROLE        role outside the closed role set
    E_BAD_KIND        unknown service kind
    E_BAD_MODE        sensor mode other than ids/ips
    E_BAD_PROTO       protocol outside tcp/udp/icmp/any
    E_BAD_ACTION      rule action outside allow/deny
    E_BAD_INT         integer field that does not parse or is out of range
    E_BAD_IP          malformed IPv4 literal
    E_BAD_CIDR        malformed CIDR/address in a rule
    E_BAD_PORT        malformed port or port range
    E_BAD_ATTR        unknown attribute inside a node block
    E_UNKNOWN_NET     reference to an undeclared network
    E_UNKNOWN_NODE    constraint member that is not a declared node
    E_DUP_IP          explicit ip= pinned twice

``serialize`` emits one canonical formatting (2-space indent, LF, sorted
nothing: declaration order is preserved) such that ``parse(serialize(s))``
reconstructs an equal Scenario.
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass
from typing import Optional

from .model import (
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
    IDENT_RE,
)

FILE_EXTENSION = ".scn"


@dataclass(frozen=True)
class SourceSpan:
    line: int  # 1-based
    column: int  # 1-based
    length: int


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    code: str
    message: str


@dataclass(frozen=True)
class ParseResult:
    scenario: Optional[Scenario]
    errors: tuple[ParseError, ...]

    @property
    def ok(self) -> bool:
        return self.scenario is not None and not self.errors


class DslError(ValueError):
    """Raised by parse_scenario when the text does not parse cleanly."""

    def __init__(self, errors: tuple[ParseError, ...]):
        self.errors = errors
        head = "; ".join(f"{e.code}@{e.span.line}:{e.span.column}" for e in errors[:5])
        super().__init__(f"{len(errors)} parse error(s): {head}")


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<comment>\#[^\n]*)
  | (?P<string>"[^"\n]*")
  | (?P<unterminated>"[^"\n]*)
  | (?P<arrow>->)
  | (?P<word>[A-Za-z0-9][A-Za-z0-9._/-]*)
  | (?P<sep>[;\n])
  | (?P<sym>[{}(),=])
  | (?P<ws>[ \t\r]+)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)

# Token kinds: WORD, STRING, ARROW, SEP, and literal symbols {}(),=; EOF.


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: SourceSpan


def _lex(text: str) -> tuple[list[Token], list[ParseError]]:
    tokens: list[Token] = []
    errors: list[ParseError] = []
    line = 1
    line_start = 0
    for match in _TOKEN_RE.finditer(text):
        start = match.start()
        column = start - line_start + 1
        span = SourceSpan(line, column, len(match.group(0)))
        kind = match.lastgroup
        raw = match.group(0)
        if kind == "ws" or kind == "comment":
            pass
        elif kind == "sep":
            tokens.append(Token("SEP", raw, span))
        elif kind == "word":
            tokens.append(Token("WORD", raw, span))
        elif kind == "string":
            tokens.append(Token("STRING", raw[1:-1], span))
        elif kind == "unterminated":
            errors.append(ParseError(span, "E_UNTERMINATED", "unterminated string literal"))
        elif kind == "arrow":
            tokens.append(Token("ARROW", raw, span))
        elif kind == "sym":
            tokens.append(Token(raw, raw, span))
        else:
            errors.append(ParseError(span, "E_BAD_CHAR", f"unexpected character {raw!r}"))
        if "\n" in raw:
            line += raw.count("\n")
            line_start = start + raw.rindex("\n") + 1
    eof_span = SourceSpan(line, len(text) - line_start + 1, 0)
    tokens.append(Token("EOF", "", eof_span))
    return tokens, errors


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token], errors: list[ParseError]):
        self.tokens = tokens
        self.pos = 0
        self.errors = errors
        # Deferred reference checks: (span, kind, payload)
        self.net_refs: list[tuple[SourceSpan, str]] = []
        self.node_refs: list[tuple[SourceSpan, str]] = []
        self.ip_pins: list[tuple[SourceSpan, str]] = []

    # -- token helpers ---------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def skip_seps(self) -> None:
        while self.peek().kind == "SEP":
            self.advance()

    def error(self, span: SourceSpan, code: str, message: str) -> None:
        self.errors.append(ParseError(span, code, message))

    def expect(self, kind: str, what: str) -> Optional[Token]:
        tok = self.peek()
        if tok.kind == kind:
            return self.advance()
        self.error(tok.span, "E_SYNTAX", f"expected {what}, found {tok.text or 'end of input'!r}")
        return None

    def expect_word(self, what: str) -> Optional[Token]:
        return self.expect("WORD", what)

    def sync_statement(self) -> None:
        """Skip to the next statement boundary after an error."""
        while self.peek().kind not in ("SEP", "}", "EOF"):
            self.advance()

    def ident(self, tok: Token, what: str) -> Optional[str]:
        if IDENT_RE.match(tok.text):
            return tok.text
        self.error(tok.span, "E_BAD_NAME", f"{what} must match [a-z0-9-]+: {tok.text!r}")
        return None

    # -- grammar ---------------------------------------------------------

    def parse_scenario(self) -> Optional[Scenario]:
        self.skip_seps()
        kw = self.expect_word("'scenario'")
        if kw is None or kw.text != "scenario":
            if kw is not None:
                self.error(kw.span, "E_SYNTAX", f"expected 'scenario', found {kw.text!r}")
            return None
        name_tok = self.peek()
        if name_tok.kind == "STRING":
            self.advance()
        else:
            self.error(name_tok.span, "E_SYNTAX", "expected quoted scenario name")
            return None
        name = name_tok.text
        if not IDENT_RE.match(name):
            self.error(name_tok.span, "E_BAD_NAME", f"scenario name must match [a-z0-9-]+: {name!r}")
        if self.expect("{", "'{'") is None:
            return None

        networks: list[NetworkSpec] = []
        nodes: list[NodeSpec] = []
        constraints: list[tuple[str, ...]] = []
        while True:
            self.skip_seps()
            tok = self.peek()
            if tok.kind == "}":
                self.advance()
                break
            if tok.kind == "EOF":
                self.error(tok.span, "E_SYNTAX", "unexpected end of input inside scenario block")
                break
            if tok.kind != "WORD":
                self.error(tok.span, "E_SYNTAX", f"expected declaration, found {tok.text!r}")
                self.advance()
                self.sync_statement()
                continue
            if tok.text == "network":
                net = self.parse_network()
                if net is not None:
                    networks.append(net)
            elif tok.text == "node":
                node = self.parse_node()
                if node is not None:
                    nodes.append(node)
            elif tok.text == "constraint":
                members = self.parse_constraint()
                if members is not None:
                    constraints.append(members)
            else:
                self.error(tok.span, "E_SYNTAX", f"unknown declaration {tok.text!r}")
                self.advance()
                self.sync_statement()

        scenario = Scenario(
            name=name,
            networks=tuple(networks),
            nodes=tuple(nodes),
            constraints=tuple(constraints),
        )
        self.check_references(scenario)
        return scenario

    def parse_network(self) -> Optional[NetworkSpec]:
        self.advance()  # 'network'
        tok = self.expect_word("network name")
        if tok is None:
            self.sync_statement()
            return None
        name = self.ident(tok, "network name")
        external = False
        if self.peek().kind == "WORD" and self.peek().text == "external":
            self.advance()
            external = True
        if name is None:
            return None
        return NetworkSpec(name, external=external)

    def parse_constraint(self) -> Optional[tuple[str, ...]]:
        self.advance()  # 'constraint'
        kind = self.expect_word("'separate'")
        if kind is None or kind.text != "separate":
            if kind is not None:
                self.error(kind.span, "E_SYNTAX", f"unknown constraint {kind.text!r}")
            self.sync_statement()
            return None
        if self.expect("(", "'('") is None:
            self.sync_statement()
            return None
        members: list[str] = []
        while True:
            tok = self.expect_word("node name")
            if tok is None:
                self.sync_statement()
                return None
            name = self.ident(tok, "constraint member")
            if name is not None:
                members.append(name)
                self.node_refs.append((tok.span, name))
            nxt = self.peek()
            if nxt.kind == ",":
                self.advance()
                continue
            if nxt.kind == ")":
                self.advance()
                break
            self.error(nxt.span, "E_SYNTAX", f"expected ',' or ')', found {nxt.text!r}")
            self.sync_statement()
            return None
        if len(members) < 2:
            self.error(kind.span, "E_SYNTAX", "separate(...) needs at least two members")
            return None
        return tuple(members)

    def parse_node(self) -> Optional[NodeSpec]:
        self.advance()  # 'node'
        tok = self.expect_word("node name")
        if tok is None:
            self.sync_statement()
            return None
        name = self.ident(tok, "node name") or tok.text
        if self.expect("{", "'{'") is None:
            self.sync_statement()
            return None

        role: Optional[Role] = None
        role_span = tok.span
        os_label = "ubuntu"
        cpu: Optional[int] = None
        ram_mb: Optional[int] = None
        group: Optional[str] = None
        interfaces: list[InterfaceSpec] = []
        services: list[ServiceSpec] = []
        sensor: Optional[SensorSpec] = None
        fw_rules: list[FilterRule] = []

        while True:
            self.skip_seps()
            attr = self.peek()
            if attr.kind == "}":
                self.advance()
                break
            if attr.kind == "EOF":
                self.error(attr.span, "E_SYNTAX", "unexpected end of input inside node block")
                break
            if attr.kind != "WORD":
                self.error(attr.span, "E_SYNTAX", f"expected node attribute, found {attr.text!r}")
                self.advance()
                self.sync_statement()
                continue

            if attr.text == "role":
                value = self.parse_assigned_word("role")
                if value is not None:
                    try:
                        role = Role(value.text)
                        role_span = value.span
                    except ValueError:
                        self.error(value.span, "E_BAD_ROLE", f"unknown role {value.text!r}")
            elif attr.text == "os":
                value = self.parse_assigned_value("os")
                if value is not None:
                    os_label = value.text
            elif attr.text == "cpu":
                cpu = self.parse_assigned_int("cpu", minimum=1)
            elif attr.text == "ram_mb":
                ram_mb = self.parse_assigned_int("ram_mb", minimum=1)
            elif attr.text == "group":
                value = self.parse_assigned_word("group")
                if value is not None:
                    group = self.ident(value, "group name")
            elif attr.text == "iface":
                iface = self.parse_iface()
                if iface is not None:
                    interfaces.append(iface)
            elif attr.text == "service":
                svc = self.parse_service()
                if svc is not None:
                    services.append(svc)
            elif attr.text == "sensor":
                sensor = self.parse_sensor() or sensor
            elif attr.text == "rule":
                rule = self.parse_rule()
                if rule is not None:
                    fw_rules.append(rule)
            else:
                self.error(attr.span, "E_BAD_ATTR", f"unknown node attribute {attr.text!r}")
                self.advance()
                self.sync_statement()

        if role is None:
            self.error(role_span, "E_SYNTAX", f"node {name!r} is missing 'role ='")
            return None
        return NodeSpec(
            name=name,
            role=role,
            os_label=os_label,
            cpu=cpu,
            ram_mb=ram_mb,
            interfaces=tuple(interfaces),
            services=tuple(services),
            sensor=sensor,
            fw_rules=tuple(fw_rules),
            anti_affinity_group=group,
        )

    # -- attribute helpers -------------------------------------------------

    def parse_assigned_value(self, attr: str) -> Optional[Token]:
        self.advance()  # attr keyword
        if self.expect("=", "'='") is None:
            self.sync_statement()
            return None
        tok = self.peek()
        if tok.kind in ("WORD", "STRING"):
            return self.advance()
        self.error(tok.span, "E_SYNTAX", f"expected value for {attr!r}")
        self.sync_statement()
        return None

    def parse_assigned_word(self, attr: str) -> Optional[Token]:
        tok = self.parse_assigned_value(attr)
        if tok is not None and tok.kind != "WORD":
            self.error(tok.span, "E_SYNTAX", f"{attr!r} takes a bare word, not a string")
            return None
        return tok

    def parse_assigned_int(self, attr: str, minimum: int = 0, maximum: int = 2**31) -> Optional[int]:
        tok = self.parse_assigned_word(attr)
        if tok is None:
            return None
        if not tok.text.isdigit():
            self.error(tok.span, "E_BAD_INT", f"{attr!r} must be an integer, found {tok.text!r}")
            return None
        value = int(tok.text)
        if not minimum <= value <= maximum:
            self.error(tok.span, "E_BAD_INT", f"{attr!r} out of range: {value}")
            return None
        return value

    def parse_iface(self) -> Optional[InterfaceSpec]:
        self.advance()  # 'iface'
        name_tok = self.expect_word("interface name")
        if name_tok is None:
            self.sync_statement()
            return None
        name = self.ident(name_tok, "interface name") or name_tok.text
        net_kw = self.expect_word("'net'")
        if net_kw is None or net_kw.text != "net":
            if net_kw is not None:
                self.error(net_kw.span, "E_SYNTAX", f"expected 'net', found {net_kw.text!r}")
            self.sync_statement()
            return None
        if self.expect("=", "'='") is None:
            self.sync_statement()
            return None
        net_tok = self.expect_word("network name")
        if net_tok is None:
            self.sync_statement()
            return None
        self.net_refs.append((net_tok.span, net_tok.text))
        ip: Optional[str] = None
        if self.peek().kind == "WORD" and self.peek().text == "ip":
            self.advance()
            if self.expect("=", "'='") is None:
                self.sync_statement()
                return None
            ip_tok = self.expect_word("IPv4 address")
            if ip_tok is None:
                self.sync_statement()
                return None
            ip = self.parse_ipv4(ip_tok)
            if ip is not None:
                self.ip_pins.append((ip_tok.span, ip))
        return InterfaceSpec(name=name, network=net_tok.text, ip=ip)

    def parse_ipv4(self, tok: Token) -> Optional[str]:
        try:
            return str(ipaddress.IPv4Address(tok.text))
        except ValueError:
            self.error(tok.span, "E_BAD_IP", f"malformed IPv4 address {tok.text!r}")
            return None

    def parse_service(self) -> Optional[ServiceSpec]:
        self.advance()  # 'service'
        kind_tok = self.expect_word("service kind")
        if kind_tok is None:
            self.sync_statement()
            return None
        try:
            kind = ServiceKind(kind_tok.text)
        except ValueError:
            self.error(kind_tok.span, "E_BAD_KIND", f"unknown service kind {kind_tok.text!r}")
            self.sync_statement()
            return None
        port_kw = self.expect_word("'port'")
        if port_kw is None or port_kw.text != "port":
            if port_kw is not None:
                self.error(port_kw.span, "E_SYNTAX", f"expected 'port', found {port_kw.text!r}")
            self.sync_statement()
            return None
        if self.expect("=", "'='") is None:
            self.sync_statement()
            return None
        port_tok = self.expect_word("port number")
        if port_tok is None or not port_tok.text.isdigit():
            if port_tok is not None:
                self.error(port_tok.span, "E_BAD_INT", f"port must be an integer: {port_tok.text!r}")
            self.sync_statement()
            return None
        port = int(port_tok.text)
        if not 1 <= port <= 65535:
            self.error(port_tok.span, "E_BAD_INT", f"port out of range: {port}")
            return None
        return ServiceSpec(kind, port)

    def parse_sensor(self) -> Optional[SensorSpec]:
        self.advance()  # 'sensor'
        kw = self.expect_word("'engine'")
        if kw is None or kw.text != "engine":
            if kw is not None:
                self.error(kw.span, "E_SYNTAX", f"expected 'engine', found {kw.text!r}")
            self.sync_statement()
            return None
        if self.expect("=", "'='") is None:
            self.sync_statement()
            return None
        engine_tok = self.expect_word("engine label")
        if engine_tok is None:
            self.sync_statement()
            return None
        mode_kw = self.expect_word("'mode'")
        if mode_kw is None or mode_kw.text != "mode":
            if mode_kw is not None:
                self.error(mode_kw.span, "E_SYNTAX", f"expected 'mode', found {mode_kw.text!r}")
            self.sync_statement()
            return None
        if self.expect("=", "'='") is None:
            self.sync_statement()
            return None
        mode_tok = self.expect_word("ids or ips")
        if mode_tok is None:
            self.sync_statement()
            return None
        try:
            mode = SensorMode(mode_tok.text)
        except ValueError:
            self.error(mode_tok.span, "E_BAD_MODE", f"sensor mode must be ids or ips: {mode_tok.text!r}")
            self.sync_statement()
            return None
        attach_tok = self.expect_word("'monitor' or 'inline'")
        if attach_tok is None:
            self.sync_statement()
            return None
        if attach_tok.text == "inline":
            return SensorSpec(engine_tok.text, mode, tap_network=None)
        if attach_tok.text == "monitor":
            if self.expect("=", "'='") is None:
                self.sync_statement()
                return None
            net_tok = self.expect_word("network name")
            if net_tok is None:
                self.sync_statement()
                return None
            self.net_refs.append((net_tok.span, net_tok.text))
            return SensorSpec(engine_tok.text, mode, tap_network=net_tok.text)
        self.error(attach_tok.span, "E_SYNTAX", f"expected 'monitor' or 'inline', found {attach_tok.text!r}")
        self.sync_statement()
        return None

    def parse_rule(self) -> Optional[FilterRule]:
        self.advance()  # 'rule'
        action_tok = self.expect_word("allow or deny")
        if action_tok is None:
            self.sync_statement()
            return None
        try:
            action = FilterAction(action_tok.text)
        except ValueError:
            self.error(action_tok.span, "E_BAD_ACTION", f"rule action must be allow or deny: {action_tok.text!r}")
            self.sync_statement()
            return None
        proto_tok = self.expect_word("protocol")
        if proto_tok is None:
            self.sync_statement()
            return None
        try:
            proto = Proto(proto_tok.text)
        except ValueError:
            self.error(proto_tok.span, "E_BAD_PROTO", f"unknown protocol {proto_tok.text!r}")
            self.sync_statement()
            return None
        src_cidr = self.parse_cidr_word()
        src_port = self.parse_port_word()
        if self.expect("ARROW", "'->'") is None:
            self.sync_statement()
            return None
        dst_cidr = self.parse_cidr_word()
        dst_port = self.parse_port_word()
        if src_cidr is None or src_port is None or dst_cidr is None or dst_port is None:
            self.sync_statement()
            return None
        return FilterRule(action, proto, src_cidr, dst_cidr, src_port, dst_port)

    def parse_cidr_word(self) -> Optional[str]:
        tok = self.expect_word("CIDR or 'any'")
        if tok is None:
            return None
        if tok.text == "any":
            return "any"
        try:
            ipaddress.ip_network(tok.text)
            return tok.text
        except ValueError:
            self.error(tok.span, "E_BAD_CIDR", f"malformed address or CIDR {tok.text!r}")
            return None

    def parse_port_word(self) -> Optional[PortMatch]:
        tok = self.expect_word("port, range, or 'any'")
        if tok is None:
            return None
        return self.port_match(tok)

    def port_match(self, tok: Token) -> Optional[PortMatch]:
        if tok.text == "any":
            return PortMatch.any()
        if tok.text.isdigit():
            port = int(tok.text)
            if 0 <= port <= 65535:
                return PortMatch.single(port)
        elif "-" in tok.text:
            lo_text, _, hi_text = tok.text.partition("-")
            if lo_text.isdigit() and hi_text.isdigit():
                lo, hi = int(lo_text), int(hi_text)
                if 0 <= lo <= hi <= 65535:
                    return PortMatch(lo, hi)
        self.error(tok.span, "E_BAD_PORT", f"malformed port spec {tok.text!r}")
        return None

    # -- deferred reference checks ---------------------------------------

    def check_references(self, scenario: Scenario) -> None:
        nets = {net.name for net in scenario.networks}
        nodes = {node.name for node in scenario.nodes}
        for span, name in self.net_refs:
            if name not in nets:
                self.error(span, "E_UNKNOWN_NET", f"undeclared network {name!r}")
        for span, name in self.node_refs:
            if name not in nodes:
                self.error(span, "E_UNKNOWN_NODE", f"constraint names unknown node {name!r}")
        seen: dict[str, SourceSpan] = {}
        for span, ip in self.ip_pins:
            if ip in seen:
                self.error(span, "E_DUP_IP", f"ip {ip} pinned more than once")
            seen.setdefault(ip, span)


def parse(text: str) -> ParseResult:
    """Parse scenario text; collects all errors instead of failing fast."""
    tokens, lex_errors = _lex(text)
    parser = _Parser(tokens, list(lex_errors))
    scenario = parser.parse_scenario()
    parser.skip_seps()
    trailing = parser.peek()
    if scenario is not None and trailing.kind != "EOF":
        parser.error(trailing.span, "E_SYNTAX", f"trailing input after scenario block: {trailing.text!r}")
    errors = tuple(sorted(parser.errors, key=lambda e: (e.span.line, e.span.column)))
    if errors:
        return ParseResult(None, errors)
    return ParseResult(scenario, ())


def parse_scenario(text: str) -> Scenario:
    """Convenience wrapper that raises DslError on any parse problem."""
    result = parse(text)
    if result.scenario is None or result.errors:
        raise DslError(result.errors)
    return result.scenario


# ---------------------------------------------------------------------------
# Serializer
# ---------------------------------------------------------------------------


def serialize(scenario: Scenario) -> str:
    """Canonical text for a scenario; stable and re-parseable."""
    lines: list[str] = [f'scenario "{scenario.name}" {{']
    for net in scenario.networks:
        suffix = " external" if net.external else ""
        lines.append(f"  network {net.name}{suffix}")
    for node in scenario.nodes:
        lines.append("")
        lines.append(f"  node {node.name} {{")
        lines.append(f"    role = {node.role.value}")
        lines.append(f"    os = {node.os_label}")
        if node.cpu is not None:
            lines.append(f"    cpu = {node.cpu}")
        if node.ram_mb is not None:
            lines.append(f"    ram_mb = {node.ram_mb}")
        if node.anti_affinity_group is not None:
            lines.append(f"    group = {node.anti_affinity_group}")
        for iface in node.interfaces:
            pin = f" ip = {iface.ip}" if iface.ip is not None else ""
            lines.append(f"    iface {iface.name} net = {iface.network}{pin}")
        for svc in node.services:
            lines.append(f"    service {svc.kind.value} port = {svc.port}")
        if node.sensor is not None:
            sensor = node.sensor
            attach = "inline" if sensor.inline else f"monitor = {sensor.tap_network}"
            lines.append(
                f"    sensor engine = {sensor.engine_label} mode = {sensor.mode.value} {attach}"
            )
        for rule in node.fw_rules:
            lines.append(f"    rule {rule.render()}")
        lines.append("  }")
    for members in scenario.constraints:
        lines.append(f"  constraint separate({', '.join(members)})")
    lines.append("}")
    return "\n".join(lines) + "\n"
