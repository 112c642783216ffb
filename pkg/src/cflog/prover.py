"""Software stand-in for the attested device's secure world.

"Execution" is trace replay: each destination of the trace goes through the
session encoder exactly as an instrumented branch would hand it over.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .model import CfgModel, Trace, parse_cfg
from .pipeline import ConfigError, Encoder
from .prefix import MarkerCollision, check_marker_collision
from .protocol import (
    AttestKey,
    Rejected,
    RejectReason,
    Speculation,
    build_report,
    speculation_from_json,
    speculation_to_json,
    verify_request,
)
from .subpath import SubPathError

log = logging.getLogger(__name__)


class PmemLocked(PermissionError):
    pass


class NoLiveSession(RuntimeError):
    pass


class PmemImage:
    """Program memory of the attested app; writes are refused while locked."""

    def __init__(self, data: bytes) -> None:
        self._data = bytearray(data)
        self.locked = False

    @property
    def data(self) -> bytes:
        return bytes(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def write(self, offset: int, data: bytes) -> None:
        if self.locked:
            raise PmemLocked("program memory is immutable during an attestation session")
        if offset < 0 or offset + len(data) > len(self._data):
            raise IndexError("write outside program memory")
        self._data[offset : offset + len(data)] = data


@dataclass
class _Session:
    chal: int
    encoder: Encoder
    cflog: bytes | None = None
    bit_len: int = 0


class ProverDevice:
    def __init__(
        self,
        key: AttestKey,
        pmem: PmemImage | bytes,
        cfg: CfgModel | None = None,
        chal_prev: int = 0,
        speculation: Speculation | None = None,
    ) -> None:
        self._key = key
        self.pmem = pmem if isinstance(pmem, PmemImage) else PmemImage(pmem)
        self.cfg = cfg
        self.chal_prev = chal_prev
        self.speculation = speculation or Speculation()
        self._session: _Session | None = None
        self._attack = None  # set only through cflog.testing

    @property
    def live(self) -> bool:
        return self._session is not None

    def handle_request(self, wire: bytes) -> int:
        """Authenticate a request and open a session; returns the accepted Chal.

        A rejected request leaves the device state untouched.
        """
        floor = max(self.chal_prev, self._session.chal if self._session else 0)
        req = verify_request(self._key, floor, wire)
        merged = req.speculation.merged_into(self.speculation)
        try:
            config = merged.session_config()
        except (ConfigError, SubPathError) as exc:
            raise Rejected(RejectReason.CONFIG_UNUSABLE, str(exc)) from None
        if self.cfg is not None:
            clash = check_marker_collision(config.prefix_stage, self.cfg)
            if clash:
                raise Rejected(
                    RejectReason.CONFIG_UNUSABLE,
                    f"{len(clash)} CFG node(s) collide with a marker, first {clash[0]:#010x}",
                )
        self.speculation = merged
        self.pmem.locked = True
        self._session = _Session(req.chal, Encoder(config))
        log.debug("session open chal=%d stages=%s", req.chal, config.stages)
        return req.chal

    def log_branch(self, dest: int) -> None:
        if self._session is None or self._session.cflog is not None:
            raise NoLiveSession("no running session")
        self._session.encoder.log_branch(dest)

    def run_trace(self, trace: Trace | Iterable[int]) -> tuple[bytes, int]:
        """Replay a trace in the live session and finalize the log."""
        if self._session is None or self._session.cflog is not None:
            raise NoLiveSession("no running session")
        dests = list(trace)
        if self._attack is not None:
            dests = self._attack.rewrite_trace(self, dests)
        enc = self._session.encoder
        try:
            for d in dests:
                enc.log_branch(d)
        except MarkerCollision:
            self.abort()
            raise
        self._session.cflog, self._session.bit_len = enc.finalize()
        return self._session.cflog, self._session.bit_len

    def abort(self) -> None:
        """Drop the live session without reporting; Chal stays unused."""
        self._session = None
        self.pmem.locked = False

    def build_report(self) -> bytes:
        """MAC Chal, PMEM and the log; closes the session and unlocks PMEM."""
        s = self._session
        if s is None:
            raise NoLiveSession("no session to report on")
        if s.cflog is None:
            s.cflog, s.bit_len = s.encoder.finalize()
        report = build_report(self._key, s.chal, self.pmem.data, s.cflog, s.bit_len)
        self.chal_prev = s.chal
        self._session = None
        self.pmem.locked = False
        wire = report.wire
        if self._attack is not None:
            wire = self._attack.rewrite_report(self, wire)
        return wire

    def attest(self, request_wire: bytes, trace: Trace | Iterable[int]) -> bytes:
        self.handle_request(request_wire)
        self.run_trace(trace)
        return self.build_report()

    # --- persistence ----------------------------------------------------------

    def save_state(self, path: str | Path, pmem_path: str, cfg_path: str | None) -> None:
        state = {
            "key": self._key.key.hex(),
            "chal_prev": self.chal_prev,
            "pmem": pmem_path,
            "cfg": cfg_path,
            "speculation": speculation_to_json(self.speculation),
        }
        Path(path).write_text(json.dumps(state, indent=2) + "\n")

    @classmethod
    def load_state(cls, path: str | Path) -> ProverDevice:
        path = Path(path)
        state = json.loads(path.read_text())
        base = path.parent
        pmem = (base / state["pmem"]).read_bytes()
        cfg = parse_cfg((base / state["cfg"]).read_text()) if state.get("cfg") else None
        return cls(
            AttestKey.from_hex(state["key"]),
            pmem,
            cfg,
            int(state.get("chal_prev", 0)),
            speculation_from_json(state.get("speculation") or {}),
        )
