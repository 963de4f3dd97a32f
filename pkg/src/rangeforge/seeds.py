"""Seeded pseudo-random primitives shared by the simulated backend and injects.

Everything that needs reproducible randomness (provisioning jitter, spoofed
DDoS source addresses) draws from a splitmix64 stream keyed by
``instance_seed XOR fnv1a64(name)``.  Both primitives are fixed-width integer
arithmetic with published reference outputs, so any reimplementation on any
platform produces the same streams.
"""

from __future__ import annotations

MASK64 = 0xFFFFFFFFFFFFFFFF

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_SM64_GAMMA = 0x9E3779B97F4A7C15
_SM64_MIX1 = 0xBF58476D1CE4E5B9
_SM64_MIX2 = 0x94D049BB133111EB


def fnv1a64(text: str) -> int:
    """Stable 64-bit FNV-1a hash of the UTF-8 encoding of ``text``."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return h


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 generator once.

    Returns ``(output, next_state)``; both are unsigned 64-bit values.
    """
    state = (state + _SM64_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _SM64_MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _SM64_MIX2) & MASK64
    return (z ^ (z >> 31)) & MASK64, state


def stream_seed(instance_seed: int, name: str) -> int:
    """Initial splitmix64 state for a named sub-stream of an instance seed."""
    return (instance_seed ^ fnv1a64(name)) & MASK64


class Splitmix64Stream:
    """Thin stateful wrapper so call sites can pull consecutive outputs."""

    def __init__(self, state: int):
        self.state = state & MASK64

    def next_u64(self) -> int:
        out, self.state = splitmix64(self.state)
        return out
