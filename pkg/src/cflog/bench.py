"""Compression benchmark over the bundled workloads and the stage/config matrix.

Speculation is trained on run 0 of an app and measured on run 1 of the same
app, so the Huffman table and sub-paths are never fitted to the trace they
compress.
"""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields
from typing import Iterable, Sequence

from .huffman import table_blob_size
from .pipeline import decode_log, encode_trace, verbatim_size
from .verifier import MAX_SUBPATHS, mine_subpaths, plan_speculation, select_prefix_len
from .workloads import WORKLOADS, get_workload

DEFAULT_WORKLOADS = ("sensor-loop", "multi-function", "single-prefix", "uniform-random")


@dataclass(frozen=True)
class BenchConfig:
    name: str
    stages: frozenset[str]
    n_subpaths: int = 0


def _config_matrix() -> tuple[BenchConfig, ...]:
    base = [
        BenchConfig("baseline", frozenset()),
        BenchConfig("prefix", frozenset({"prefix"})),
        BenchConfig("huffman", frozenset({"huffman"})),
        BenchConfig("prefix+huffman", frozenset({"prefix", "huffman"})),
    ]
    for k in range(1, MAX_SUBPATHS + 1):
        for extra in ((), ("prefix",), ("huffman",), ("prefix", "huffman")):
            name = "+".join((f"subpath{k}",) + extra)
            base.append(BenchConfig(name, frozenset({"subpath", *extra}), k))
    return tuple(base)


CONFIGS = _config_matrix()
CONFIGS_BY_NAME = {c.name: c for c in CONFIGS}


@dataclass(frozen=True)
class BenchRow:
    workload: str
    config: str
    entries: int
    verbatim_bytes: int
    encoded_bytes: int
    reduction_pct: float
    table_bytes: int


CSV_COLUMNS = tuple(f.name for f in fields(BenchRow))


def resolve_configs(names: Iterable[str] | None) -> tuple[BenchConfig, ...]:
    if names is None:
        return CONFIGS
    out = []
    for n in names:
        if n not in CONFIGS_BY_NAME:
            raise KeyError(f"unknown config {n!r}")
        out.append(CONFIGS_BY_NAME[n])
    return tuple(out)


def bench_workload(
    name: str,
    configs: Sequence[BenchConfig] = CONFIGS,
    seed: int = 0,
    check: bool = True,
) -> list[BenchRow]:
    if name not in WORKLOADS:
        raise KeyError(f"unknown workload {name!r}; choose from {sorted(WORKLOADS)}")
    train = get_workload(name, seed, run=0).trace.destinations
    target = get_workload(name, seed, run=1)
    trace = target.trace.destinations
    verbatim = verbatim_size(len(trace))
    prefix_len = select_prefix_len(train)
    need_k = max((c.n_subpaths for c in configs), default=0)
    mined = mine_subpaths([train], need_k) if need_k else []

    rows = []
    for c in configs:
        config = plan_speculation(
            [train],
            c.stages,
            prefix_len=prefix_len,
            reserved_addresses=target.cfg.nodes,
            specs=mined[: c.n_subpaths] if "subpath" in c.stages else None,
        )
        data, bit_len = encode_trace(config, trace)
        if check and decode_log(config, data, bit_len) != list(trace):
            raise AssertionError(f"round trip failed for {name}/{c.name}")
        encoded = len(data)
        rows.append(
            BenchRow(
                workload=name,
                config=c.name,
                entries=len(trace),
                verbatim_bytes=verbatim,
                encoded_bytes=encoded,
                reduction_pct=round(100.0 * (verbatim - encoded) / verbatim, 3) if verbatim else 0.0,
                table_bytes=table_blob_size(config.table) if config.use_huffman else 0,
            )
        )
    return rows


def bench_run(
    workloads: Iterable[str] = DEFAULT_WORKLOADS,
    configs: Sequence[BenchConfig] = CONFIGS,
    seed: int = 0,
) -> list[BenchRow]:
    rows: list[BenchRow] = []
    for name in workloads:
        rows.extend(bench_workload(name, configs, seed))
    return rows


def to_csv(rows: Iterable[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(astuple(r))
    return buf.getvalue()


def to_text(rows: Iterable[BenchRow]) -> str:
    table = [CSV_COLUMNS] + [
        tuple(f"{v:.2f}" if isinstance(v, float) else str(v) for v in astuple(r)) for r in rows
    ]
    widths = [max(len(row[i]) for row in table) for i in range(len(CSV_COLUMNS))]
    lines = []
    for j, row in enumerate(table):
        cells = [
            cell.ljust(widths[i]) if i < 2 else cell.rjust(widths[i]) for i, cell in enumerate(row)
        ]
        lines.append("  ".join(cells).rstrip())
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
