"""Synthetic applications: CFGs plus branch-destination traces.

Every generator takes ``seed``, which fixes the application (its CFG), and
``run``, which fixes one execution of it. Different runs of the same app share
the CFG, so speculation learned from one run applies to the next.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

from .model import ADDRESS_MAX, CfgModel, Trace

FLASH_BASE = 0x0800_0000


@dataclass(frozen=True)
class Workload:
    name: str
    cfg: CfgModel
    trace: Trace


def random_walk(cfg: CfgModel, rng: random.Random, length: int, weights=None) -> Trace:
    """Walk ``length`` destinations from the entry; ``weights(src, dst)`` biases edges."""
    if length <= 0:
        return Trace(())
    node = cfg.entry
    out = [node]
    for _ in range(length - 1):
        succ = sorted(cfg.successors(node))
        if not succ:
            break
        if weights is None:
            node = rng.choice(succ)
        else:
            node = rng.choices(succ, [weights(node, s) for s in succ])[0]
        out.append(node)
    return Trace(tuple(out))


def random_cfg(
    rng: random.Random,
    n_nodes: int,
    n_regions: int = 1,
    region_span: int = 0x1_0000,
    base: int = FLASH_BASE,
    extra_edges: int = 2,
) -> CfgModel:
    """Connected CFG whose nodes sit in ``n_regions`` address regions.

    Every node has at least one successor so walks never get stuck.
    """
    nodes: set[int] = set()
    while len(nodes) < n_nodes:
        region = rng.randrange(n_regions)
        nodes.add(base + region * region_span + rng.randrange(region_span // 2) * 2)
    order = sorted(nodes)
    rng.shuffle(order)
    edges = {(order[i], order[i + 1]) for i in range(len(order) - 1)}
    edges.add((order[-1], order[0]))
    for src in order:
        for _ in range(rng.randrange(extra_edges + 1)):
            edges.add((src, rng.choice(order)))
    return CfgModel.build(order, edges, order[0])


# --- bundled workloads ---------------------------------------------------------

LOOP_BODY = (0x0800_1000, 0x0800_1024, 0x0800_104A, 0x0800_1070, 0x0800_1098, 0x0800_10C2)
LOOP_INIT = (0x0800_0200, 0x0800_0240, 0x0800_0284, 0x0800_02C0)
LOOP_IO = (0x0801_7400, 0x0801_7436, 0x0801_7470)
LOOP_EXIT = (0x0800_2000, 0x0800_2010)


def _run_rng(seed: int, run: int) -> random.Random:
    return random.Random(f"{seed}:{run}")


def sensor_loop(seed: int = 0, run: int = 0, iterations: int = 500, io_rate: float = 0.02) -> Workload:
    """Sensing app: short init, a dominant 6-block loop, rare I/O calls, exit.

    The I/O helper lives in a different 64 KiB region, so each call changes
    the active 2-byte prefix twice.
    """
    rng = _run_rng(seed, run)
    body = LOOP_BODY
    edges = {(LOOP_INIT[i], LOOP_INIT[i + 1]) for i in range(len(LOOP_INIT) - 1)}
    edges.add((LOOP_INIT[-1], body[0]))
    edges |= {(body[i], body[(i + 1) % 6]) for i in range(6)}
    edges |= {(body[3], LOOP_IO[0]), (LOOP_IO[0], LOOP_IO[1]), (LOOP_IO[1], LOOP_IO[2])}
    edges.add((LOOP_IO[2], body[4]))
    edges |= {(body[5], LOOP_EXIT[0]), (LOOP_EXIT[0], LOOP_EXIT[1])}
    nodes = set(LOOP_INIT) | set(body) | set(LOOP_IO) | set(LOOP_EXIT)
    cfg = CfgModel.build(nodes, edges, LOOP_INIT[0])

    dests = list(LOOP_INIT)
    for _ in range(iterations):
        dests += body[:4]
        if rng.random() < io_rate:
            dests += LOOP_IO
        dests += body[4:]
    dests += LOOP_EXIT
    return Workload("sensor-loop", cfg, Trace(tuple(dests)))


def multi_function(
    seed: int = 0, run: int = 0, n: int = 2000, functions: int = 6, blocks: int = 8
) -> Workload:
    """Several functions in separate 64 KiB regions calling each other."""
    rng = random.Random(seed)
    funcs = []
    for f in range(functions):
        base = FLASH_BASE + f * 0x1_0000 + rng.randrange(0x10) * 0x100
        offs = sorted(rng.sample(range(0x0, 0x2000, 2), blocks))
        funcs.append([base + o for o in offs])
    edges = set()
    for f, blk in enumerate(funcs):
        for i in range(blocks - 1):
            edges.add((blk[i], blk[i + 1]))
        for _ in range(2):
            j = rng.randrange(1, blocks)
            edges.add((blk[j], blk[rng.randrange(j)]))
        callee = funcs[(f + 1 + rng.randrange(functions - 1)) % functions]
        edges.add((blk[rng.randrange(blocks - 1)], callee[0]))
        edges.add((blk[-1], funcs[rng.randrange(functions)][0]))
    nodes = [a for blk in funcs for a in blk]
    cfg = CfgModel.build(nodes, edges, funcs[0][0])

    def weight(src: int, dst: int) -> float:
        return 8.0 if (src >> 16) == (dst >> 16) else 1.0

    return Workload("multi-function", cfg, random_walk(cfg, _run_rng(seed, run), n, weight))


def single_prefix(seed: int = 0, run: int = 0, n: int = 1000, n_nodes: int = 64) -> Workload:
    """Random control flow confined to one 64 KiB region."""
    cfg = random_cfg(random.Random(seed), n_nodes, n_regions=1)
    return Workload("single-prefix", cfg, random_walk(cfg, _run_rng(seed, run), n))


def uniform_random(seed: int = 0, run: int = 0, n: int = 1000) -> Workload:
    """Destinations drawn uniformly from the 32-bit space (stress case).

    There is no structure to learn, so each run is a fresh random graph.
    """
    rng = _run_rng(seed, run)
    dests = tuple(rng.randrange(ADDRESS_MAX + 1) for _ in range(n))
    edges = set(zip(dests, dests[1:]))
    cfg = CfgModel.build(set(dests), edges, dests[0])
    return Workload("uniform-random", cfg, Trace(dests))


WORKLOADS: dict[str, Callable[..., Workload]] = {
    "sensor-loop": sensor_loop,
    "multi-function": multi_function,
    "single-prefix": single_prefix,
    "uniform-random": uniform_random,
}


def get_workload(name: str, seed: int = 0, run: int = 0, **kwargs) -> Workload:
    try:
        gen = WORKLOADS[name]
    except KeyError:
        raise KeyError(f"unknown workload {name!r}; choose from {sorted(WORKLOADS)}") from None
    return gen(seed, run, **kwargs)
