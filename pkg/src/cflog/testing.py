"""Attack injection for negative tests. Not part of the production surface.

Modes:

``hijack-edge``
    insert one destination that is not a CFG node in the middle of the trace
``code-tamper``
    flip one bit of program memory; only possible while PMEM is unlocked,
    i.e. before a session starts
``log-tamper``
    flip one bit of the report's CF_Log on the wire
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .model import ADDRESS_MAX
from .prover import PmemLocked, ProverDevice
from .protocol import MSG_REPORT, parse_report

MODES = ("hijack-edge", "code-tamper", "log-tamper")


@dataclass
class Attack:
    mode: str
    seed: int
    rng: random.Random = field(init=False)
    applied: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown attack mode {self.mode!r}")
        self.rng = random.Random(self.seed)

    def rewrite_trace(self, device: ProverDevice, dests: list[int]) -> list[int]:
        if self.mode != "hijack-edge":
            return dests
        nodes = device.cfg.nodes if device.cfg is not None else frozenset(dests)
        rogue = self.rng.randrange(ADDRESS_MAX + 1)
        while rogue in nodes:
            rogue = self.rng.randrange(ADDRESS_MAX + 1)
        index = self.rng.randrange(1, len(dests)) if len(dests) > 1 else len(dests)
        self.applied = {"index": index, "address": rogue}
        return dests[:index] + [rogue] + dests[index:]

    def rewrite_report(self, device: ProverDevice, wire: bytes) -> bytes:
        if self.mode != "log-tamper":
            return wire
        rep = parse_report(wire)
        if not rep.cflog:
            raise ValueError("log-tamper needs a non-empty CF_Log")
        # cflog starts after header(6) chal(8) bit_len(4) len(4)
        start = 6 + 8 + 4 + 4
        bit = self.rng.randrange(len(rep.cflog) * 8)
        out = bytearray(wire)
        out[start + bit // 8] ^= 0x80 >> (bit % 8)
        self.applied = {"wire_bit": (start * 8) + bit}
        assert out[5] == MSG_REPORT
        return bytes(out)


def inject_attack(device: ProverDevice, mode: str, seed: int = 0) -> Attack:
    """Arm ``device`` with an attack; ``code-tamper`` takes effect immediately."""
    attack = Attack(mode, seed)
    if mode == "code-tamper":
        if device.pmem.locked:
            raise PmemLocked("cannot modify program memory during a session")
        if not len(device.pmem):
            raise ValueError("code-tamper needs a non-empty program memory")
        offset = attack.rng.randrange(len(device.pmem))
        old = device.pmem.data[offset]
        flipped = old ^ (1 << attack.rng.randrange(8))
        device.pmem.write(offset, bytes([flipped]))
        attack.applied = {"offset": offset, "old": old, "new": flipped}
    device._attack = attack
    return attack


def clear_attack(device: ProverDevice) -> None:
    device._attack = None
