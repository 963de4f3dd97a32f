"""Built-in scenario templates.

Three ready-made training networks ship with the engine:

* ``scenario-1``: a pfSense firewall runs a Suricata sensor in IDS mode,
  tapping the external switch.  Kali attacks from outside; an Ubuntu server
  (http/dns/ssh) and a Windows server (rdp) sit behind the firewall.
* ``scenario-2``: an OPNsense firewall runs Snort inline in IPS mode.
  Parrot attacks from outside; Metasploitable and an Oracle Linux mail host
  (smtp/imap/ssh) are the targets.
* ``scenario-3``: a routed network: MikroTik CHR forwards between the
  external and internal segments, a Security Onion monitor taps the external
  switch from a separate management network that also holds the operator PC.

Each template's firewall (where present) admits traffic into the internal
/24 so exercise injects actually reach their targets; scenario-3's router
forwards unconditionally.
"""

from __future__ import annotations

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
)


def _allow_into(cidr: str) -> tuple[FilterRule, ...]:
    return tuple(
        FilterRule(FilterAction.ALLOW, proto, "any", cidr, PortMatch.any(), PortMatch.any())
        for proto in (Proto.TCP, Proto.UDP, Proto.ICMP)
    )


def _scenario_1() -> Scenario:
    return Scenario(
        name="scenario-1",
        networks=(
            NetworkSpec("external", external=True),
            NetworkSpec("internal"),
        ),
        nodes=(
            NodeSpec(
                name="pfsense-fw",
                role=Role.FIREWALL,
                os_label="pfsense",
                interfaces=(
                    InterfaceSpec("wan", "external"),
                    InterfaceSpec("lan", "internal"),
                ),
                sensor=SensorSpec("suricata", SensorMode.IDS, tap_network="external"),
                fw_rules=_allow_into("10.10.1.0/24"),
            ),
            NodeSpec(
                name="kali",
                role=Role.ATTACKER,
                os_label="kali",
                interfaces=(InterfaceSpec("eth0", "external"),),
            ),
            NodeSpec(
                name="ubuntu-srv",
                role=Role.TARGET,
                os_label="ubuntu",
                interfaces=(InterfaceSpec("eth0", "internal"),),
                services=(
                    ServiceSpec(ServiceKind.HTTP, 80),
                    ServiceSpec(ServiceKind.DNS, 53),
                    ServiceSpec(ServiceKind.SSH, 22),
                ),
            ),
            NodeSpec(
                name="win-srv",
                role=Role.TARGET,
                os_label="windows-server",
                interfaces=(InterfaceSpec("eth0", "internal"),),
                services=(ServiceSpec(ServiceKind.RDP, 3389),),
            ),
        ),
    )


def _scenario_2() -> Scenario:
    return Scenario(
        name="scenario-2",
        networks=(
            NetworkSpec("external", external=True),
            NetworkSpec("internal"),
        ),
        nodes=(
            NodeSpec(
                name="opnsense-fw",
                role=Role.FIREWALL,
                os_label="opnsense",
                interfaces=(
                    InterfaceSpec("wan", "external"),
                    InterfaceSpec("lan", "internal"),
                ),
                sensor=SensorSpec("snort", SensorMode.IPS),
                fw_rules=_allow_into("10.10.1.0/24"),
            ),
            NodeSpec(
                name="parrot",
                role=Role.ATTACKER,
                os_label="parrot",
                interfaces=(InterfaceSpec("eth0", "external"),),
            ),
            NodeSpec(
                name="metasploitable",
                role=Role.TARGET,
                os_label="metasploitable",
                interfaces=(InterfaceSpec("eth0", "internal"),),
                services=(
                    ServiceSpec(ServiceKind.HTTP, 80),
                    ServiceSpec(ServiceKind.SSH, 22),
                ),
            ),
            NodeSpec(
                name="oracle-srv",
                role=Role.TARGET,
                os_label="oracle-linux",
                interfaces=(InterfaceSpec("eth0", "internal"),),
                services=(
                    ServiceSpec(ServiceKind.SMTP, 25),
                    ServiceSpec(ServiceKind.IMAP, 143),
                    ServiceSpec(ServiceKind.SSH, 22),
                ),
            ),
        ),
    )


def _scenario_3() -> Scenario:
    return Scenario(
        name="scenario-3",
        networks=(
            NetworkSpec("external", external=True),
            NetworkSpec("internal"),
            NetworkSpec("monitor"),
        ),
        nodes=(
            NodeSpec(
                name="chr-router",
                role=Role.ROUTER,
                os_label="mikrotik-chr",
                interfaces=(
                    InterfaceSpec("ether1", "external"),
                    InterfaceSpec("ether2", "internal"),
                ),
            ),
            NodeSpec(
                name="sec-onion",
                role=Role.MONITOR,
                os_label="security-onion",
                interfaces=(InterfaceSpec("mgmt", "monitor"),),
                sensor=SensorSpec("suricata", SensorMode.IDS, tap_network="external"),
            ),
            NodeSpec(
                name="kali",
                role=Role.ATTACKER,
                os_label="kali",
                interfaces=(InterfaceSpec("eth0", "external"),),
            ),
            NodeSpec(
                name="metasploitable",
                role=Role.TARGET,
                os_label="metasploitable",
                interfaces=(InterfaceSpec("eth0", "internal"),),
                services=(
                    ServiceSpec(ServiceKind.HTTP, 80),
                    ServiceSpec(ServiceKind.SSH, 22),
                ),
            ),
            NodeSpec(
                name="freebsd-srv",
                role=Role.TARGET,
                os_label="freebsd",
                interfaces=(InterfaceSpec("em0", "internal"),),
                services=(
                    ServiceSpec(ServiceKind.HTTP, 80),
                    ServiceSpec(ServiceKind.SSH, 22),
                ),
            ),
            NodeSpec(
                name="operator-pc",
                role=Role.OPERATOR,
                os_label="ubuntu",
                interfaces=(InterfaceSpec("eth0", "monitor"),),
            ),
        ),
    )


def builtin_templates() -> list[Scenario]:
    """The three shipped scenarios, in catalog order."""
    return [_scenario_1(), _scenario_2(), _scenario_3()]


def builtin_template(name: str) -> Scenario:
    for scenario in builtin_templates():
        if scenario.name == name:
            return scenario
    raise KeyError(name)
