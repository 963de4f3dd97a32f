"""rangeforge: a desk-scale cyber-range scenario orchestrator.

Compiles declarative training scenarios into virtual topologies, places
their VMs on a modeled hypervisor cluster, runs them on a deterministic
virtual clock, injects synthetic attack traffic, and evaluates IDS/IPS
detection, all without a real hypervisor in sight.
"""

from .model import Scenario, validate_scenario
from .templates import builtin_template, builtin_templates
from .topology import compile_topology

__version__ = "0.1.0"

__all__ = [
    "Scenario",
    "builtin_template",
    "builtin_templates",
    "compile_topology",
    "validate_scenario",
    "__version__",
]
