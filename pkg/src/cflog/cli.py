"""Command-line interface: ``cflog <verb> ...``.

File formats
------------
trace      one hex address per line (``#`` comments allowed)
cfg        ``entry <hex>`` / ``node <hex>`` / ``edge <hex> <hex>`` lines
bundle     speculation JSON (``table`` hex blob, ``prefix``, ``subpaths``)
.cflog     ``u32 LE bit_len`` followed by the log bytes
state      JSON for the verifier (all devices) or one prover device
"""

from __future__ import annotations

import argparse
import json
import logging
import struct
import sys
from pathlib import Path

from . import __version__
from .bench import DEFAULT_WORKLOADS, bench_run, resolve_configs, to_csv, to_text
from .huffman import table_blob_size
from .model import parse_cfg, parse_trace, write_cfg, write_trace
from .pipeline import decode_log, encode_trace, pre_huffman_bytes
from .prefix import choose_markers
from .protocol import (
    AttestKey,
    Rejected,
    Speculation,
    speculation_from_json,
    speculation_to_json,
)
from .prover import ProverDevice
from .subpath import write_subpaths
from .verifier import (
    DeviceRecord,
    Verifier,
    gen_huffman_speculation,
    mine_subpaths,
    prefix_sizes,
    select_prefix_len,
)
from .workloads import WORKLOADS, get_workload

log = logging.getLogger("cflog")


class CliError(Exception):
    pass


# --- file helpers ----------------------------------------------------------------


def write_cflog(path: str | Path, data: bytes, bit_len: int) -> None:
    Path(path).write_bytes(struct.pack("<I", bit_len) + data)


def read_cflog(path: str | Path) -> tuple[bytes, int]:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise CliError(f"{path}: too short for a .cflog file")
    (bit_len,) = struct.unpack_from("<I", raw)
    data = raw[4:]
    if (bit_len + 7) // 8 != len(data):
        raise CliError(f"{path}: bit length {bit_len} does not match {len(data)} data bytes")
    return data, bit_len


def load_bundle(path: str | None) -> Speculation:
    if not path:
        return Speculation()
    return speculation_from_json(json.loads(Path(path).read_text()))


def save_bundle(path: str, spec: Speculation) -> None:
    Path(path).write_text(json.dumps(speculation_to_json(spec), indent=2) + "\n")


def load_traces(paths: list[str]) -> list[tuple[int, ...]]:
    return [parse_trace(Path(p).read_text()).destinations for p in paths]


def _cfg_nodes(path: str | None) -> frozenset[int]:
    return parse_cfg(Path(path).read_text()).nodes if path else frozenset()


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2))


# --- speculation generation --------------------------------------------------------


def cmd_mine_subpaths(args) -> int:
    traces = load_traces(args.trace)
    specs = mine_subpaths(traces, args.k, args.min_len, args.max_len)
    bundle = load_bundle(args.bundle)
    save_bundle(args.output, Speculation(bundle.table, bundle.prefix, tuple(specs)))
    sys.stdout.write(write_subpaths(specs))
    return 0


def cmd_pick_prefix(args) -> int:
    traces = load_traces(args.trace)
    known = [a for t in traces for a in t]
    bundle = load_bundle(args.bundle)
    sizes = prefix_sizes(known)
    p = select_prefix_len(known) if args.prefix_len is None else args.prefix_len
    reserved = set(known) | _cfg_nodes(args.cfg)
    prefix = choose_markers(p, reserved, subpaths=bool(bundle.specs))
    save_bundle(args.output, Speculation(bundle.table, prefix, bundle.specs))
    for plen, size in sizes.items():
        mark = "*" if plen == p else " "
        print(f"{mark} prefix_len={plen}  bytes={'-' if size is None else size}")
    return 0


def cmd_gen_table(args) -> int:
    traces = load_traces(args.trace)
    bundle = load_bundle(args.bundle)
    base = Speculation(None, bundle.prefix, bundle.specs).session_config()
    table = gen_huffman_speculation(pre_huffman_bytes(base, t) for t in traces)
    save_bundle(args.output, Speculation(table, bundle.prefix, bundle.specs))
    print(f"table: {table_blob_size(table)} bytes, max code length {max(table.lengths)}")
    return 0


# --- log encode/decode ------------------------------------------------------------


def cmd_encode(args) -> int:
    config = load_bundle(args.bundle).session_config()
    trace = parse_trace(Path(args.trace).read_text())
    data, bit_len = encode_trace(config, trace)
    write_cflog(args.output, data, bit_len)
    n = len(trace)
    pct = 100.0 * (1 - len(data) / (4 * n)) if n else 0.0
    print(f"{n} entries, stages={'+'.join(config.stages) or 'none'}: "
          f"{4 * n} -> {len(data)} bytes ({pct:.2f}% reduction)")
    return 0


def cmd_decode(args) -> int:
    config = load_bundle(args.bundle).session_config()
    data, bit_len = read_cflog(args.log)
    text = write_trace(decode_log(config, data, bit_len))
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# --- protocol ---------------------------------------------------------------------


def cmd_provision(args) -> int:
    key = AttestKey.from_hex(args.key) if args.key else AttestKey.generate()
    vpath = Path(args.verifier_state)
    ver = Verifier.load(vpath) if vpath.exists() else Verifier()
    rel = lambda p: str(Path(p).resolve().relative_to(vpath.resolve().parent)) if p else None  # noqa: E731
    ver.register(
        args.device,
        DeviceRecord(
            key=key,
            expected_pmem=Path(args.pmem).read_bytes(),
            cfg=parse_cfg(Path(args.cfg).read_text()) if args.cfg else None,
            pmem_path=rel(args.pmem),
            cfg_path=rel(args.cfg),
        ),
    )
    ver.save(vpath)
    if args.device_state:
        dpath = Path(args.device_state)
        drel = lambda p: str(Path(p).resolve().relative_to(dpath.resolve().parent)) if p else None  # noqa: E731
        dev = ProverDevice(key, Path(args.pmem).read_bytes())
        dev.save_state(dpath, drel(args.pmem), drel(args.cfg))
    print(f"provisioned {args.device}")
    return 0


def cmd_request(args) -> int:
    ver = Verifier.load(args.state)
    if args.device not in ver.devices:
        raise CliError(f"unknown device {args.device!r}")
    wire = ver.make_request(args.device, load_bundle(args.bundle) if args.bundle else None)
    Path(args.output).write_bytes(wire)
    ver.save(args.state)
    print(f"request chal={ver.devices[args.device].chal_prev} ({len(wire)} bytes)")
    return 0


def _arm_attack(device: ProverDevice, args) -> None:
    if args.attack:
        from .testing import inject_attack

        attack = inject_attack(device, args.attack, args.seed)
        if attack.applied:
            log.warning("attack %s applied: %s", args.attack, attack.applied)


def _device_paths(state_path: Path) -> tuple[str, str | None]:
    state = json.loads(state_path.read_text())
    return state["pmem"], state.get("cfg")


def cmd_attest(args) -> int:
    spath = Path(args.device_state)
    device = ProverDevice.load_state(spath)
    pmem_rel, cfg_rel = _device_paths(spath)
    trace = parse_trace(Path(args.trace).read_text())
    _arm_attack(device, args)
    try:
        if args.connect:
            from .transport import TcpChannel, device_session

            host, _, port = args.connect.rpartition(":")
            with TcpChannel.connect(host or "127.0.0.1", int(port)) as chan:
                result = device_session(chan, args.device, device, trace)
            _print_json(result)
            rc = 0 if result.get("ok") else 1
        else:
            report = device.attest(Path(args.request).read_bytes(), trace)
            Path(args.output).write_bytes(report)
            print(f"report ({len(report)} bytes) for chal={device.chal_prev}")
            rc = 0
    except Rejected as exc:
        print(f"request rejected: {exc}", file=sys.stderr)
        return 1
    # a code-tamper attack only touches the in-memory image, never the file
    device.save_state(spath, pmem_rel, cfg_rel)
    return rc


def cmd_verify(args) -> int:
    ver = Verifier.load(args.state)
    if args.device not in ver.devices:
        raise CliError(f"unknown device {args.device!r}")
    from .transport import verdict_json

    verdict = ver.verify(args.device, Path(args.report).read_bytes(), args.chal)
    ver.save(args.state)
    out = verdict_json(verdict)
    if args.path_out and verdict.path is not None:
        Path(args.path_out).write_text(write_trace(verdict.path))
    _print_json(out)
    return 0 if verdict.ok else 1


def cmd_serve_verifier(args) -> int:
    from .transport import VerifierServer

    ver = Verifier.load(args.state)
    server = VerifierServer((args.host, args.port), ver, args.max_sessions)
    base_hook = server.on_session

    def persist() -> None:
        ver.save(args.state)
        base_hook()

    server.on_session = persist
    host, port = server.server_address[:2]
    print(f"verifier listening on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        ver.save(args.state)
    return 0


# --- workloads and bench -------------------------------------------------------------


def cmd_gen_workload(args) -> int:
    wl = get_workload(args.name, args.seed, args.run)
    Path(args.trace_out).write_text(write_trace(wl.trace))
    if args.cfg_out:
        Path(args.cfg_out).write_text(write_cfg(wl.cfg))
    print(f"{wl.name}: {len(wl.trace)} entries, {len(wl.cfg.nodes)} nodes")
    return 0


def cmd_bench(args) -> int:
    rows = bench_run(args.workload or DEFAULT_WORKLOADS, resolve_configs(args.config), args.seed)
    sys.stdout.write(to_text(rows))
    if args.csv:
        Path(args.csv).write_text(to_csv(rows))
    return 0


# --- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cflog", description="Compressed control-flow logs and attestation.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        return p

    p = add("mine-subpaths", cmd_mine_subpaths, "mine repeated sub-paths from prior traces")
    p.add_argument("--trace", nargs="+", required=True)
    p.add_argument("-k", type=int, default=8)
    p.add_argument("--min-len", type=int, default=2)
    p.add_argument("--max-len", type=int, default=16)
    p.add_argument("--bundle", help="existing bundle to extend")
    p.add_argument("-o", "--output", required=True)

    p = add("pick-prefix", cmd_pick_prefix, "choose prefix length and markers")
    p.add_argument("--trace", nargs="+", required=True)
    p.add_argument("--cfg", help="CFG whose nodes the markers must avoid")
    p.add_argument("--prefix-len", type=int, choices=range(4))
    p.add_argument("--bundle")
    p.add_argument("-o", "--output", required=True)

    p = add("gen-table", cmd_gen_table, "train a Huffman table on prior traces")
    p.add_argument("--trace", nargs="+", required=True)
    p.add_argument("--bundle", help="prefix/sub-path speculation the table sits behind")
    p.add_argument("-o", "--output", required=True)

    p = add("encode", cmd_encode, "encode a trace into a .cflog file")
    p.add_argument("--bundle")
    p.add_argument("--trace", required=True)
    p.add_argument("-o", "--output", required=True)

    p = add("decode", cmd_decode, "decode a .cflog file back into a trace")
    p.add_argument("--bundle")
    p.add_argument("--log", required=True)
    p.add_argument("-o", "--output")

    p = add("provision", cmd_provision, "register a device with the verifier")
    p.add_argument("--device", required=True)
    p.add_argument("--pmem", required=True)
    p.add_argument("--cfg")
    p.add_argument("--key", help="hex key (default: random)")
    p.add_argument("--verifier-state", required=True)
    p.add_argument("--device-state")

    p = add("request", cmd_request, "issue an attestation request")
    p.add_argument("--state", required=True)
    p.add_argument("--device", required=True)
    p.add_argument("--bundle", help="speculation to ship with the request")
    p.add_argument("-o", "--output", required=True)

    p = add("attest", cmd_attest, "run the prover on a request (file or TCP)")
    p.add_argument("--device-state", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--request")
    p.add_argument("-o", "--output")
    p.add_argument("--connect", metavar="HOST:PORT")
    p.add_argument("--device", default="device", help="device id sent over TCP")
    p.add_argument("--attack", choices=("hijack-edge", "code-tamper", "log-tamper"))
    p.add_argument("--seed", type=int, default=0)

    p = add("verify", cmd_verify, "check a report and decode its log")
    p.add_argument("--state", required=True)
    p.add_argument("--device", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--chal", type=int)
    p.add_argument("--path-out", help="write the decoded path here")

    p = add("serve-verifier", cmd_serve_verifier, "run the verifier over TCP")
    p.add_argument("--state", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7878)
    p.add_argument("--max-sessions", type=int)

    p = add("gen-workload", cmd_gen_workload, "write a bundled synthetic workload")
    p.add_argument("--name", choices=sorted(WORKLOADS), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--run", type=int, default=0)
    p.add_argument("--trace-out", required=True)
    p.add_argument("--cfg-out")

    p = add("bench", cmd_bench, "compression benchmark over workloads and configs")
    p.add_argument("--workload", nargs="+", choices=sorted(WORKLOADS))
    p.add_argument("--config", nargs="+")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.verb == "attest" and not args.connect and not (args.request and args.output):
        print("attest: need --request and --output, or --connect", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (CliError, KeyError, ValueError, OSError) as exc:
        print(f"cflog {args.verb}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
