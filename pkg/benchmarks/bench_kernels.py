"""Throughput of the compiled bit kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--mib 2] [--repeat 5]

Encodes and decodes the pre-Huffman byte stream of the sensor-loop workload
(tiled up to the requested size) with a table trained on it.
"""

from __future__ import annotations

import argparse
import time

from cflog import _kernels_py
from cflog.huffman import build_table, byte_frequencies
from cflog.pipeline import SessionConfig, pre_huffman_bytes
from cflog.workloads import sensor_loop

try:
    from cflog import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _payload(mib: float) -> bytes:
    trace = sensor_loop(0).trace.destinations
    raw = pre_huffman_bytes(SessionConfig.build(stages=["prefix"], prefix_len=2), trace)
    reps = max(1, int(mib * (1 << 20)) // len(raw))
    return raw * reps


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(mib: float, repeat: int) -> list[tuple[str, str, float]]:
    data = _payload(mib)
    table = build_table(byte_frequencies([data]))
    codes, lengths = table._encode_arrays
    first, counts, offsets, symbols = table._decode_arrays
    results = []
    ref = None
    for mod in (_kernels_py, _kernels_c):
        if mod is None:
            continue

        def encode(mod=mod):
            w = mod.BitWriter()
            w.write_coded(data, codes, lengths)
            return w.getvalue()

        enc, bit_len = encode()
        dec, used = mod.decode_canonical(enc, bit_len, first, counts, offsets, symbols)
        assert dec == data and used == bit_len
        if ref is None:
            ref = enc
        assert enc == ref, "kernels disagree"
        t_enc = _best(encode, repeat)
        t_dec = _best(
            lambda mod=mod: mod.decode_canonical(enc, bit_len, first, counts, offsets, symbols),
            repeat,
        )
        mb = len(data) / 1e6
        results.append((mod.IMPLEMENTATION, "encode", mb / t_enc))
        results.append((mod.IMPLEMENTATION, "decode", mb / t_dec))
    return results


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mib", type=float, default=2.0)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    res = run(args.mib, args.repeat)
    print(f"{'kernel':8}  {'op':6}  {'MB/s':>9}")
    for impl, op, rate in res:
        print(f"{impl:8}  {op:6}  {rate:9.2f}")
    by = {(i, o): r for i, o, r in res}
    for op in ("encode", "decode"):
        if ("cython", op) in by:
            print(f"speedup {op}: {by['cython', op] / by['python', op]:.1f}x")


if __name__ == "__main__":
    main()
