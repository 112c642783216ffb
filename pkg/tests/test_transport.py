import json
import socket
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cflog.protocol import AttestKey
from cflog.prover import ProverDevice
from cflog.transport import (
    MAX_MESSAGE,
    ConnectionLost,
    FramingError,
    InMemoryChannel,
    OversizeMessage,
    TcpChannel,
    VerifierServer,
    device_session,
    frame,
    recv_frame,
    send_frame,
    serve_session,
    unframe,
)
from cflog.verifier import DeviceRecord, Verifier
from cflog.workloads import sensor_loop

KEY = AttestKey(b"t" * 32)
PMEM = b"\x22" * 64


@given(st.binary(max_size=4096))
def test_frame_roundtrip(msg):
    assert unframe(frame(msg)) == msg


@given(st.lists(st.binary(max_size=512), max_size=10))
@settings(max_examples=50)
def test_in_memory_loopback(msgs):
    a, b = InMemoryChannel.pair(timeout=1)
    for m in msgs:
        a.send(m)
    assert [b.recv() for _ in msgs] == msgs


def test_empty_payload_delivered():
    a, b = InMemoryChannel.pair(timeout=1)
    a.send(b"")
    assert b.recv() == b""


def test_truncated_frame_surfaces():
    a, b = InMemoryChannel.pair(timeout=1)
    a.send_raw(frame(b"hello")[:-1])
    with pytest.raises(FramingError):
        b.recv()
    a.send_raw(b"\x01\x00")
    with pytest.raises(FramingError):
        b.recv()


def test_oversize():
    with pytest.raises(OversizeMessage):
        frame(b"\x00" * (MAX_MESSAGE + 1))
    with pytest.raises(OversizeMessage):
        unframe((MAX_MESSAGE + 1).to_bytes(4, "little"))


def test_closed_channel():
    a, b = InMemoryChannel.pair(timeout=0.2)
    a.close()
    with pytest.raises(ConnectionLost):
        b.recv()
    with pytest.raises(ConnectionLost):
        a.send(b"x")
    c, d = InMemoryChannel.pair(timeout=0.05)
    with pytest.raises(ConnectionLost):
        d.recv()


def _socket_pair():
    s1, s2 = socket.socketpair()
    s1.settimeout(2)
    s2.settimeout(2)
    return s1, s2


@given(st.lists(st.binary(max_size=70_000), max_size=4))
@settings(max_examples=20, deadline=None)
def test_tcp_framing_transparent(msgs):
    s1, s2 = _socket_pair()
    try:
        t = threading.Thread(target=lambda: [send_frame(s1, m) for m in msgs])
        t.start()
        got = [recv_frame(s2) for _ in msgs]
        t.join()
        assert got == msgs
    finally:
        s1.close()
        s2.close()


def test_tcp_truncation_and_close():
    s1, s2 = _socket_pair()
    s1.sendall(frame(b"abcdef")[:-2])
    s1.close()
    with pytest.raises(FramingError):
        recv_frame(s2)
    s2.close()
    s3, s4 = _socket_pair()
    s3.close()
    with pytest.raises(ConnectionLost):
        recv_frame(s4)
    s4.close()


def _verifier():
    wl = sensor_loop(0)
    ver = Verifier()
    ver.register("dev", DeviceRecord(KEY, PMEM, wl.cfg))
    return ver, wl


def test_session_over_in_memory_channel():
    ver, wl = _verifier()
    a, b = InMemoryChannel.pair(timeout=5)
    out = {}
    t = threading.Thread(target=lambda: out.setdefault("v", serve_session(b, ver)))
    t.start()
    result = device_session(a, "dev", ProverDevice(KEY, PMEM, wl.cfg), wl.trace)
    t.join()
    assert result["ok"] and out["v"] == result


def test_unknown_device():
    ver, _ = _verifier()
    a, b = InMemoryChannel.pair(timeout=5)
    a.send(b"ghost")
    serve_session(b, ver)
    assert json.loads(a.recv())["reason"] == "UnknownDevice"


def test_tcp_server_concurrent_devices():
    wl = sensor_loop(0)
    ver = Verifier()
    for i in range(4):
        ver.register(f"d{i}", DeviceRecord(KEY, PMEM, wl.cfg))
    server = VerifierServer(("127.0.0.1", 0), ver, max_sessions=8)
    port = server.server_address[1]
    st_thread = threading.Thread(target=server.serve_forever)
    st_thread.start()
    results = []
    lock = threading.Lock()

    def device(i):
        dev = ProverDevice(KEY, PMEM, wl.cfg)
        for _ in range(2):
            with TcpChannel.connect("127.0.0.1", port) as ch:
                r = device_session(ch, f"d{i % 4}", dev, wl.trace)
            with lock:
                results.append(r)

    threads = [threading.Thread(target=device, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    st_thread.join(timeout=10)
    server.server_close()
    assert len(results) == 8 and all(r["ok"] for r in results)
    assert all(ver.devices[f"d{i}"].chal_prev == 2 for i in range(4))
