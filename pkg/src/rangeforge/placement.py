"""VM-to-hypervisor placement under capacity and anti-affinity constraints.

The planner runs first-fit decreasing (by RAM, then CPU, then id) over hosts
in declaration order.  When the heuristic fails on a desk-scale instance
(<= 12 VMs) it falls back to an exact backtracking search before declaring
the instance infeasible, so at that scale "planner says infeasible" really
means "no assignment exists".

``exhaustive_feasible`` is a deliberately separate brute-force decision
procedure used as a test oracle; it shares no code with the planner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

from .model import Scenario

EXACT_SEARCH_LIMIT = 12

CONSTRAINT_CAPACITY = "capacity"
CONSTRAINT_ANTI_AFFINITY = "anti-affinity"


@dataclass(frozen=True)
class HostSpec:
    id: str
    cpu_cores: int
    ram_mb: int


@dataclass(frozen=True)
class VMSpec:
    id: str
    cpu: int
    ram_mb: int
    anti_affinity_group: Optional[str] = None


@dataclass(frozen=True)
class PlacementPlan:
    assignments: tuple[tuple[str, str], ...]  # (vm id, host id)
    residuals: tuple[tuple[str, int, int], ...]  # (host id, cpu left, ram left)

    def host_of(self, vm_id: str) -> str:
        for vm, host in self.assignments:
            if vm == vm_id:
                return host
        raise KeyError(vm_id)

    def to_dict(self) -> dict:
        return {
            "assignments": {vm: host for vm, host in self.assignments},
            "residuals": {
                host: {"cpu": cpu, "ram_mb": ram} for host, cpu, ram in self.residuals
            },
        }


class InfeasibleError(Exception):
    """No assignment satisfies the constraints; carries the binding one."""

    def __init__(self, constraint: str, detail: str):
        self.constraint = constraint
        self.detail = detail
        super().__init__(f"placement infeasible ({constraint}): {detail}")


class ClusterSpecError(ValueError):
    pass


def load_cluster(path: str) -> list[HostSpec]:
    """Read a cluster file: ``{"hosts": [{"id", "cpu_cores", "ram_mb"}, ...]}``."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return cluster_from_dict(data)


def cluster_from_dict(data: dict) -> list[HostSpec]:
    hosts_raw = data.get("hosts")
    if not isinstance(hosts_raw, list) or not hosts_raw:
        raise ClusterSpecError("cluster file needs a non-empty 'hosts' list")
    hosts: list[HostSpec] = []
    seen: set[str] = set()
    for entry in hosts_raw:
        try:
            host = HostSpec(str(entry["id"]), int(entry["cpu_cores"]), int(entry["ram_mb"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ClusterSpecError(f"malformed host entry {entry!r}") from exc
        if host.cpu_cores < 1 or host.ram_mb < 1:
            raise ClusterSpecError(f"host {host.id!r} has non-positive capacity")
        if host.id in seen:
            raise ClusterSpecError(f"duplicate host id {host.id!r}")
        seen.add(host.id)
        hosts.append(host)
    return hosts


DEFAULT_CLUSTER = [
    HostSpec("hv-1", 16, 32768),
    HostSpec("hv-2", 16, 32768),
]


def vm_specs_from_scenario(scenario: Scenario) -> list[VMSpec]:
    """One VM per node, sized by explicit values or the role defaults."""
    return [
        VMSpec(
            id=node.name,
            cpu=node.effective_cpu,
            ram_mb=node.effective_ram_mb,
            anti_affinity_group=scenario.effective_group(node),
        )
        for node in scenario.nodes
    ]


def _ffd_order(vms: Sequence[VMSpec]) -> list[VMSpec]:
    return sorted(vms, key=lambda vm: (-vm.ram_mb, -vm.cpu, vm.id))


def plan(vms: Sequence[VMSpec], cluster: Sequence[HostSpec]) -> PlacementPlan:
    """Place every VM or raise InfeasibleError with the binding constraint."""
    if not cluster and vms:
        raise InfeasibleError(CONSTRAINT_CAPACITY, "empty cluster")
    assignment = _first_fit_decreasing(vms, cluster)
    if assignment is None and len(vms) <= EXACT_SEARCH_LIMIT:
        assignment = _exact_search(vms, cluster)
    if assignment is None:
        raise InfeasibleError(*_diagnose(vms, cluster))
    return _as_plan(assignment, vms, cluster)


def _as_plan(
    assignment: dict[str, str], vms: Sequence[VMSpec], cluster: Sequence[HostSpec]
) -> PlacementPlan:
    cpu_left = {host.id: host.cpu_cores for host in cluster}
    ram_left = {host.id: host.ram_mb for host in cluster}
    for vm in vms:
        host_id = assignment[vm.id]
        cpu_left[host_id] -= vm.cpu
        ram_left[host_id] -= vm.ram_mb
    return PlacementPlan(
        assignments=tuple((vm.id, assignment[vm.id]) for vm in vms),
        residuals=tuple((host.id, cpu_left[host.id], ram_left[host.id]) for host in cluster),
    )


def _first_fit_decreasing(
    vms: Sequence[VMSpec], cluster: Sequence[HostSpec]
) -> Optional[dict[str, str]]:
    cpu_left = {host.id: host.cpu_cores for host in cluster}
    ram_left = {host.id: host.ram_mb for host in cluster}
    groups_on: dict[str, set[str]] = {host.id: set() for host in cluster}
    assignment: dict[str, str] = {}
    for vm in _ffd_order(vms):
        placed = False
        for host in cluster:
            if vm.cpu > cpu_left[host.id] or vm.ram_mb > ram_left[host.id]:
                continue
            if vm.anti_affinity_group is not None and vm.anti_affinity_group in groups_on[host.id]:
                continue
            cpu_left[host.id] -= vm.cpu
            ram_left[host.id] -= vm.ram_mb
            if vm.anti_affinity_group is not None:
                groups_on[host.id].add(vm.anti_affinity_group)
            assignment[vm.id] = host.id
            placed = True
            break
        if not placed:
            return None
    return assignment


def _exact_search(
    vms: Sequence[VMSpec], cluster: Sequence[HostSpec]
) -> Optional[dict[str, str]]:
    """Deterministic backtracking over host choices, big-VMs-first."""
    order = _ffd_order(vms)
    cpu_left = [host.cpu_cores for host in cluster]
    ram_left = [host.ram_mb for host in cluster]
    groups_on: list[set[str]] = [set() for _ in cluster]
    assignment: dict[str, str] = {}
    ram_suffix = [0] * (len(order) + 1)
    for idx in range(len(order) - 1, -1, -1):
        ram_suffix[idx] = ram_suffix[idx + 1] + order[idx].ram_mb

    def place(idx: int) -> bool:
        if idx == len(order):
            return True
        if ram_suffix[idx] > sum(ram_left):
            return False
        vm = order[idx]
        for h, host in enumerate(cluster):
            if vm.cpu > cpu_left[h] or vm.ram_mb > ram_left[h]:
                continue
            if vm.anti_affinity_group is not None and vm.anti_affinity_group in groups_on[h]:
                continue
            cpu_left[h] -= vm.cpu
            ram_left[h] -= vm.ram_mb
            if vm.anti_affinity_group is not None:
                groups_on[h].add(vm.anti_affinity_group)
            assignment[vm.id] = host.id
            if place(idx + 1):
                return True
            cpu_left[h] += vm.cpu
            ram_left[h] += vm.ram_mb
            if vm.anti_affinity_group is not None:
                groups_on[h].discard(vm.anti_affinity_group)
            del assignment[vm.id]
        return False

    return assignment if place(0) else None


def _diagnose(vms: Sequence[VMSpec], cluster: Sequence[HostSpec]) -> tuple[str, str]:
    """Name the constraint that makes the instance infeasible."""
    host_count = len(cluster)
    group_sizes: dict[str, int] = {}
    for vm in vms:
        if vm.anti_affinity_group is not None:
            group_sizes[vm.anti_affinity_group] = group_sizes.get(vm.anti_affinity_group, 0) + 1
    for group, size in group_sizes.items():
        if size > host_count:
            return (
                CONSTRAINT_ANTI_AFFINITY,
                f"group {group!r} has {size} members but only {host_count} hosts",
            )
    relaxed = [VMSpec(vm.id, vm.cpu, vm.ram_mb, None) for vm in vms]
    if len(vms) <= EXACT_SEARCH_LIMIT and _exact_search(relaxed, cluster) is not None:
        return (
            CONSTRAINT_ANTI_AFFINITY,
            "feasible once anti-affinity groups are ignored",
        )
    return (CONSTRAINT_CAPACITY, "demand exceeds host capacities")


def verify_plan(
    placement: PlacementPlan, vms: Sequence[VMSpec], cluster: Sequence[HostSpec]
) -> bool:
    """Pure invariant check: assignment total, capacities, anti-affinity."""
    hosts = {host.id: host for host in cluster}
    assigned = dict(placement.assignments)
    if set(assigned) != {vm.id for vm in vms} or len(placement.assignments) != len(vms):
        return False
    cpu_used: dict[str, int] = {host_id: 0 for host_id in hosts}
    ram_used: dict[str, int] = {host_id: 0 for host_id in hosts}
    groups_on: dict[str, set[str]] = {host_id: set() for host_id in hosts}
    for vm in vms:
        host_id = assigned[vm.id]
        if host_id not in hosts:
            return False
        cpu_used[host_id] += vm.cpu
        ram_used[host_id] += vm.ram_mb
        if vm.anti_affinity_group is not None:
            if vm.anti_affinity_group in groups_on[host_id]:
                return False
            groups_on[host_id].add(vm.anti_affinity_group)
    for host_id, host in hosts.items():
        if cpu_used[host_id] > host.cpu_cores or ram_used[host_id] > host.ram_mb:
            return False
    return True


def exhaustive_feasible(vms: Sequence[VMSpec], cluster: Sequence[HostSpec]) -> bool:
    """Oracle: does any assignment satisfy all constraints?

    Backtracks over every host choice per VM in the order given.  Guarded to
    desk-scale instances; raises ValueError beyond EXACT_SEARCH_LIMIT VMs.
    """
    if len(vms) > EXACT_SEARCH_LIMIT:
        raise ValueError(f"exhaustive_feasible is limited to {EXACT_SEARCH_LIMIT} VMs")
    if not vms:
        return True
    if not cluster:
        return False

    cpu_left = [host.cpu_cores for host in cluster]
    ram_left = [host.ram_mb for host in cluster]
    groups_on: list[set[str]] = [set() for _ in cluster]
    # Sound cut: a partial assignment cannot complete once the RAM still to
    # be placed exceeds the RAM still free across all hosts.
    remaining_ram = [0] * (len(vms) + 1)
    for idx in range(len(vms) - 1, -1, -1):
        remaining_ram[idx] = remaining_ram[idx + 1] + vms[idx].ram_mb

    def attempt(idx: int) -> bool:
        if idx == len(vms):
            return True
        if remaining_ram[idx] > sum(ram_left):
            return False
        vm = vms[idx]
        for h in range(len(cluster)):
            if vm.cpu > cpu_left[h] or vm.ram_mb > ram_left[h]:
                continue
            if vm.anti_affinity_group is not None and vm.anti_affinity_group in groups_on[h]:
                continue
            cpu_left[h] -= vm.cpu
            ram_left[h] -= vm.ram_mb
            if vm.anti_affinity_group is not None:
                groups_on[h].add(vm.anti_affinity_group)
            if attempt(idx + 1):
                return True
            cpu_left[h] += vm.cpu
            ram_left[h] += vm.ram_mb
            if vm.anti_affinity_group is not None:
                groups_on[h].discard(vm.anti_affinity_group)
        return False

    return attempt(0)
