"""Verifier side: speculation generation, report checking and log decoding."""

from __future__ import annotations

import json
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .huffman import HuffmanTable, build_table, byte_frequencies
from .model import Addr, CfgModel, CheckResult, Trace, cfg_check_trace, parse_cfg
from .pipeline import SessionConfig, decode_log, pre_huffman_bytes
from .prefix import MarkerCollision, choose_markers, prefix_encode
from .protocol import (
    AttestKey,
    Rejected,
    Speculation,
    build_request,
    speculation_from_json,
    speculation_to_json,
    verify_report,
)
from .subpath import SubPathSpec, compile_specs

MAX_SUBPATHS = 8


def gen_huffman_speculation(prior_streams: Iterable[bytes]) -> HuffmanTable:
    """Table over the pooled byte counts of pre-Huffman streams."""
    return build_table(byte_frequencies(prior_streams))


def prefix_sizes(addresses: Sequence[int]) -> dict[int, int | None]:
    """Prefix-stage output size for every prefix length (None if markers cannot fit)."""
    sizes: dict[int, int | None] = {}
    tokens = [Addr(a) for a in addresses]
    for p in range(4):
        try:
            cfg = choose_markers(p, addresses)
            sizes[p] = len(prefix_encode(cfg, tokens))
        except (MarkerCollision, ValueError):
            sizes[p] = None
    return sizes


def select_prefix_len(prior_addresses: Sequence[int]) -> int:
    """Prefix length with the smallest prefix-stage output; ties go to the shorter."""
    sizes = prefix_sizes(list(prior_addresses))
    feasible = [(size, p) for p, size in sizes.items() if size is not None]
    return min(feasible)[1]


def mine_subpaths(
    prior_traces: Iterable[Sequence[int]],
    k: int = MAX_SUBPATHS,
    min_len: int = 2,
    max_len: int = 16,
) -> list[SubPathSpec]:
    """Greedily pick up to ``k`` repeated address sequences worth replacing.

    A candidate scores ``occurrences * (len - 1) * 4`` bytes saved, counting
    leftmost non-overlapping occurrences in what is left after replacing the
    patterns already picked. Candidates must occur at least twice and must
    not be a prefix of (or have as prefix) a picked pattern.
    """
    if not 0 <= k <= MAX_SUBPATHS:
        raise ValueError(f"k must be in 0..{MAX_SUBPATHS}")
    traces = [list(t) for t in prior_traces]
    chosen: list[SubPathSpec] = []
    while len(chosen) < k:
        if chosen:
            matcher = compile_specs(chosen)
            residual = [
                [t.value if isinstance(t, Addr) else None for t in matcher.encode(tr)]
                for tr in traces
            ]
        else:
            residual = traces
        best = _best_candidate(residual, chosen, min_len, max_len)
        if best is None:
            break
        chosen.append(SubPathSpec(len(chosen) + 1, best))
    return chosen


def _best_candidate(streams, chosen, min_len, max_len):
    counts: dict[tuple, int] = defaultdict(int)
    last_end: dict[tuple, tuple[int, int]] = {}
    for sidx, s in enumerate(streams):
        n = len(s)
        for i in range(n):
            if s[i] is None:
                continue
            for length in range(min_len, max_len + 1):
                if i + length > n or s[i + length - 1] is None:
                    break
                gram = tuple(s[i : i + length])
                prev = last_end.get(gram)
                if prev is None or prev[0] != sidx or prev[1] <= i:
                    counts[gram] += 1
                    last_end[gram] = (sidx, i + length)
    picked = [c.pattern for c in chosen]
    best = None
    best_key = None
    for gram, occ in counts.items():
        if occ < 2:
            continue
        if any(p[: len(gram)] == gram or gram[: len(p)] == p for p in picked):
            continue
        key = (-occ * (len(gram) - 1) * 4, -len(gram), gram)
        if best_key is None or key < best_key:
            best, best_key = gram, key
    return best


def plan_speculation(
    prior_traces: Sequence[Sequence[int]],
    stages: Iterable[str],
    *,
    n_subpaths: int = MAX_SUBPATHS,
    prefix_len: int | None = None,
    reserved_addresses: Iterable[int] = (),
    specs: Sequence[SubPathSpec] | None = None,
) -> SessionConfig:
    """Full speculation for the chosen stages from earlier traces.

    ``reserved_addresses`` (normally the CFG nodes) are kept clear of the
    markers in addition to every address seen in the traces.
    """
    stages = set(stages)
    known = [a for t in prior_traces for a in t]
    everything = set(known) | set(reserved_addresses)
    if "subpath" in stages and specs is None:
        specs = mine_subpaths(prior_traces, n_subpaths)
    specs = tuple(specs or ()) if "subpath" in stages else ()
    if "subpath" in stages and not specs:
        stages.discard("subpath")
    p = 0
    if "prefix" in stages:
        p = select_prefix_len(known) if prefix_len is None else prefix_len
    prefix = choose_markers(p, everything, subpaths="subpath" in stages)
    config = SessionConfig(
        prefix=prefix,
        specs=specs,
        use_subpath="subpath" in stages,
        use_prefix="prefix" in stages,
    )
    if "huffman" not in stages:
        return config
    streams = [pre_huffman_bytes(config, t) for t in prior_traces]
    return SessionConfig(
        prefix=prefix,
        table=gen_huffman_speculation(streams),
        specs=specs,
        use_subpath=config.use_subpath,
        use_prefix=config.use_prefix,
        use_huffman=True,
    )


# --- verification -----------------------------------------------------------


@dataclass(frozen=True)
class SessionContext:
    key: AttestKey
    chal: int
    expected_pmem: bytes
    config: SessionConfig
    cfg: CfgModel | None = None


@dataclass(frozen=True)
class Verdict:
    authentic: bool
    reason: str | None = None
    path: tuple[int, ...] | None = None
    cfg_result: CheckResult | None = None

    @property
    def ok(self) -> bool:
        return self.authentic and self.cfg_result is not None and self.cfg_result.valid


def verify_and_decode(ctx: SessionContext, report_wire: bytes) -> Verdict:
    """Authenticate, decode and path-check a report. Nothing is decoded unless authentic."""
    try:
        rep = verify_report(ctx.key, ctx.chal, ctx.expected_pmem, report_wire)
    except Rejected as exc:
        return Verdict(False, exc.reason.value)
    try:
        path = tuple(decode_log(ctx.config, rep.cflog, rep.bit_len))
    except ValueError as exc:
        return Verdict(True, f"DecodeError: {exc}")
    result = cfg_check_trace(ctx.cfg, Trace(path)) if ctx.cfg is not None else None
    return Verdict(True, None, path, result)


@dataclass
class DeviceRecord:
    key: AttestKey
    expected_pmem: bytes
    cfg: CfgModel | None = None
    chal_prev: int = 0
    speculation: Speculation = field(default_factory=Speculation)
    pending: dict[int, SessionConfig] = field(default_factory=dict)
    history: list[tuple[int, ...]] = field(default_factory=list)
    # where the PMEM image and CFG live, for state files
    pmem_path: str | None = None
    cfg_path: str | None = None


class Verifier:
    """Tracks devices and their challenge counters; safe to share across threads."""

    def __init__(self) -> None:
        self.devices: dict[str, DeviceRecord] = {}
        self._locks: dict[str, threading.Lock] = {}

    def register(self, device_id: str, record: DeviceRecord) -> None:
        self._locks.setdefault(device_id, threading.Lock())
        self.devices[device_id] = record

    def make_request(self, device_id: str, speculation: Speculation | None = None) -> bytes:
        with self._locks[device_id]:
            rec = self.devices[device_id]
            req, chal = build_request(rec.key, rec.chal_prev, speculation)
            rec.speculation = req.speculation.merged_into(rec.speculation)
            rec.pending[chal] = rec.speculation.session_config()
            rec.chal_prev = chal
            return req.wire

    def verify(self, device_id: str, report_wire: bytes, chal: int | None = None) -> Verdict:
        with self._locks[device_id]:
            rec = self.devices[device_id]
            if chal is None:
                chal = rec.chal_prev
            config = rec.pending.get(chal)
            if config is None:
                return Verdict(False, "NoPendingChallenge")
            ctx = SessionContext(rec.key, chal, rec.expected_pmem, config, rec.cfg)
            verdict = verify_and_decode(ctx, report_wire)
            if verdict.authentic:
                del rec.pending[chal]
                if verdict.path is not None:
                    rec.history.append(verdict.path)
            return verdict

    # --- persistence ----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write every device to a JSON state file (PMEM and CFG by path)."""
        devices = {}
        for dev_id, rec in sorted(self.devices.items()):
            if rec.pmem_path is None:
                raise ValueError(f"device {dev_id!r} has no PMEM path to record")
            devices[dev_id] = {
                "key": rec.key.key.hex(),
                "pmem": rec.pmem_path,
                "cfg": rec.cfg_path,
                "chal_prev": rec.chal_prev,
                "speculation": speculation_to_json(rec.speculation),
                "pending": {
                    str(c): speculation_to_json(Speculation.from_config(cfg))
                    for c, cfg in sorted(rec.pending.items())
                },
            }
        Path(path).write_text(json.dumps({"devices": devices}, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> Verifier:
        path = Path(path)
        state = json.loads(path.read_text())
        base = path.parent
        ver = cls()
        for dev_id, d in state.get("devices", {}).items():
            cfg = parse_cfg((base / d["cfg"]).read_text()) if d.get("cfg") else None
            ver.register(
                dev_id,
                DeviceRecord(
                    key=AttestKey.from_hex(d["key"]),
                    expected_pmem=(base / d["pmem"]).read_bytes(),
                    cfg=cfg,
                    chal_prev=int(d.get("chal_prev", 0)),
                    speculation=speculation_from_json(d.get("speculation") or {}),
                    pending={
                        int(c): speculation_from_json(sj).session_config()
                        for c, sj in (d.get("pending") or {}).items()
                    },
                    pmem_path=d["pmem"],
                    cfg_path=d.get("cfg"),
                ),
            )
        return ver
