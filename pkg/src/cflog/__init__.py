"""Compressed control-flow logs for control-flow attestation.

The log pipeline (sub-path symbols, address-prefix elision, canonical
Huffman coding) plus an HMAC-authenticated challenge/report protocol, a
prover simulator and a verifier.
"""

from ._accel import IMPLEMENTATION
from .huffman import HuffmanTable, build_table, deserialize_table, serialize_table
from .model import Addr, BitStream, CfgModel, PrefixMark, SubPath, Trace, cfg_check_trace
from .pipeline import SessionConfig, decode_log, encode_trace, finalize, log_branch, session_init
from .prefix import MarkerCollision, PrefixConfig
from .protocol import AttestKey, Rejected, RejectReason, Speculation
from .prover import PmemImage, ProverDevice
from .subpath import SubPathSpec
from .verifier import Verifier, plan_speculation, verify_and_decode

__version__ = "0.1.0"

__all__ = [
    "IMPLEMENTATION",
    "Addr",
    "AttestKey",
    "BitStream",
    "CfgModel",
    "HuffmanTable",
    "MarkerCollision",
    "PmemImage",
    "PrefixConfig",
    "PrefixMark",
    "ProverDevice",
    "Rejected",
    "RejectReason",
    "SessionConfig",
    "Speculation",
    "SubPath",
    "SubPathSpec",
    "Trace",
    "Verifier",
    "build_table",
    "cfg_check_trace",
    "decode_log",
    "deserialize_table",
    "encode_trace",
    "finalize",
    "log_branch",
    "plan_speculation",
    "serialize_table",
    "session_init",
    "verify_and_decode",
]
