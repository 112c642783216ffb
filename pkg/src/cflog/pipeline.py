"""Per-branch log encoder (sub-path -> prefix -> Huffman) and its inverse."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from ._accel import BitWriter
from .huffman import HuffmanTable, huffman_decode
from .model import ADDRESS_BYTES, Addr, BitStream, SubPath
from .prefix import DEFAULT_SUBPATH_FILL, PrefixConfig, PrefixState, prefix_decode, prefix_encode_step
from .subpath import Matcher, SubPathSpec, compile_specs, subpath_decode

STAGES = ("subpath", "prefix", "huffman")


class ConfigError(ValueError):
    pass


class SessionSealed(RuntimeError):
    pass


@dataclass(frozen=True)
class SessionConfig:
    """Speculation metadata held by the Prover for one attestation session.

    A disabled prefix stage means ``prefix.prefix_len == 0``: every address is
    logged as four suffix bytes.
    """

    prefix: PrefixConfig = field(default_factory=PrefixConfig)
    table: HuffmanTable | None = None
    specs: tuple[SubPathSpec, ...] = ()
    use_subpath: bool = False
    use_prefix: bool = False
    use_huffman: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "specs", tuple(self.specs))
        if self.use_subpath:
            if not self.specs:
                raise ConfigError("sub-path stage enabled without sub-path specs")
            if self.prefix.subpath_marker is None:
                raise ConfigError("sub-path stage enabled without a sub-path marker")
            self.matcher  # validates the spec set
        if not self.use_prefix and self.prefix.prefix_len:
            raise ConfigError("prefix stage disabled but prefix_len is non-zero")
        if self.use_huffman and self.table is None:
            raise ConfigError("Huffman stage enabled without a table")

    @classmethod
    def build(
        cls,
        *,
        stages: Iterable[str] = (),
        prefix_len: int = 0,
        table: HuffmanTable | None = None,
        specs: Sequence[SubPathSpec] = (),
        prefix: PrefixConfig | None = None,
    ) -> SessionConfig:
        """Convenience constructor with default markers for the chosen stages."""
        stages = set(stages)
        unknown = stages - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stage(s): {sorted(unknown)}")
        use_prefix = "prefix" in stages
        if prefix is None:
            prefix = PrefixConfig.with_defaults(
                prefix_len if use_prefix else 0, subpaths="subpath" in stages
            )
        return cls(
            prefix=prefix,
            table=table,
            specs=tuple(specs),
            use_subpath="subpath" in stages,
            use_prefix=use_prefix,
            use_huffman="huffman" in stages,
        )

    @property
    def stages(self) -> tuple[str, ...]:
        flags = (self.use_subpath, self.use_prefix, self.use_huffman)
        return tuple(s for s, on in zip(STAGES, flags) if on)

    @cached_property
    def matcher(self) -> Matcher:
        return compile_specs(self.specs)

    @cached_property
    def prefix_stage(self) -> PrefixConfig:
        """The prefix framing actually applied (sub-path marker dropped when unused)."""
        if self.use_subpath or self.prefix.subpath_marker is None:
            return self.prefix
        return PrefixConfig(self.prefix.prefix_len, self.prefix.prefix_marker, None)


class Encoder:
    """Streaming CF_Log builder for one session; see :func:`session_init`."""

    def __init__(self, config: SessionConfig) -> None:
        self.config = config
        self._match = config.matcher.session() if config.use_subpath else None
        self._prefix = config.prefix_stage
        self._state = PrefixState()
        self._writer = BitWriter()
        if config.use_huffman:
            self._codes, self._lengths = config.table._encode_arrays
        self.entries = 0
        self.sealed = False

    @property
    def prefix_act(self) -> bytes | None:
        return self._state.prefix_act

    @property
    def bit_len(self) -> int:
        return self._writer.bit_len

    def log_branch(self, dest: int) -> None:
        if self.sealed:
            raise SessionSealed("session already finalized")
        tokens = self._match.push(dest) if self._match else (Addr(dest),)
        for tok in tokens:
            self._emit(prefix_encode_step(self._prefix, self._state, tok))
        self.entries += 1

    def _emit(self, data: bytes) -> None:
        if self.config.use_huffman:
            self._writer.write_coded(data, self._codes, self._lengths)
        else:
            self._writer.write_bytes(data)

    def finalize(self) -> tuple[bytes, int]:
        if not self.sealed:
            if self._match:
                for tok in self._match.flush():
                    self._emit(prefix_encode_step(self._prefix, self._state, tok))
            self.sealed = True
        return self._writer.getvalue()


def session_init(config: SessionConfig) -> Encoder:
    return Encoder(config)


def log_branch(state: Encoder, dest: int) -> Encoder:
    state.log_branch(dest)
    return state


def finalize(state: Encoder) -> tuple[bytes, int]:
    return state.finalize()


def encode_trace(config: SessionConfig, destinations: Iterable[int]) -> tuple[bytes, int]:
    enc = Encoder(config)
    for d in destinations:
        enc.log_branch(d)
    return enc.finalize()


def pre_huffman_bytes(config: SessionConfig, destinations: Iterable[int]) -> bytes:
    """The byte stream the Huffman stage would see for this trace."""
    state = PrefixState()
    pcfg = config.prefix_stage
    tokens = (
        config.matcher.encode(destinations)
        if config.use_subpath
        else (Addr(d) for d in destinations)
    )
    return b"".join(prefix_encode_step(pcfg, state, t) for t in tokens)


def decode_log(config: SessionConfig, data: bytes, bit_len: int) -> list[int]:
    """Rebuild the verbatim destination list; stages are undone in reverse."""
    if config.use_huffman:
        raw = huffman_decode(config.table, BitStream(bytes(data), bit_len))
    else:
        if bit_len != 8 * len(data):
            raise ConfigError("unencoded log must be whole bytes")
        raw = bytes(data)
    tokens = prefix_decode(config.prefix_stage, raw)
    if config.use_subpath:
        return [t.value for t in subpath_decode(config.matcher, tokens)]
    if any(isinstance(t, SubPath) for t in tokens):
        raise ConfigError("sub-path symbol in a log without sub-path stage")
    return [t.value for t in tokens]


def verbatim_size(n_entries: int) -> int:
    return ADDRESS_BYTES * n_entries
