"""Secret-key material and all keyed pseudo-randomness.

The construction is fixed so independent implementations interoperate
bit-exactly:

* A ``SecretKey`` is 32 bytes, written in config as 64 hex characters.
* ``digest = BLAKE2b(key=secret, digest_size=16)`` over a domain tag, a 0x00
  separator, then each integer argument as an 8-byte big-endian word.
* The 128-bit digest becomes, verbatim, the internal state of a PCG64
  generator whose increment is fixed to ``0x9E3779B97F4A7C15`` (forced odd).
  All keyed uniforms, permutations, and the Inverse key matrix are read from
  that stream in the documented order, using the standard 53-bit
  double conversion.

Prefix windows shorter than H at the start of a sequence are left-padded
with the sentinel id ``PAD_ID``. The Unigram-style constant context uses the
distinct sentinel ``CONST_ID`` so it can never collide with a padded window.

Key material is never logged or embedded in reports.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass

import numpy as np

# Sentinel ids feed only the hash; they are outside every real vocabulary.
PAD_ID = 2**64 - 1
CONST_ID = 2**64 - 2

_PCG_INC = 0x9E3779B97F4A7C15 | 1

_scratch = threading.local()


@dataclass(frozen=True)
class SecretKey:
    key: bytes

    def __post_init__(self):
        if len(self.key) != 32:
            raise ValueError("secret key must be exactly 32 bytes")

    @classmethod
    def from_hex(cls, hex_str: str) -> "SecretKey":
        if len(hex_str) != 64:
            raise ValueError("secret key must be 64 hex characters")
        return cls(bytes.fromhex(hex_str))

    @classmethod
    def from_int(cls, n: int) -> "SecretKey":
        return cls(n.to_bytes(32, "big"))

    def __repr__(self):  # keep key bytes out of logs and tracebacks
        return "SecretKey(<hidden>)"


@dataclass(frozen=True)
class PrefixContext:
    """The last H token ids, sentinel-padded at sequence start."""

    window: tuple

    @classmethod
    def from_ids(cls, ids, h: int) -> "PrefixContext":
        if h < 1:
            raise ValueError("prefix length H must be >= 1")
        ids = tuple(ids)
        tail = ids[-h:] if len(ids) >= h else (PAD_ID,) * (h - len(ids)) + ids
        return cls(tail)

    @classmethod
    def constant(cls, h: int = 1) -> "PrefixContext":
        return cls((CONST_ID,) * h)


def _digest(key: SecretKey, domain: str, parts) -> bytes:
    h = hashlib.blake2b(digest_size=16, key=key.key)
    h.update(domain.encode("ascii"))
    h.update(b"\x00")
    for p in parts:
        h.update(int(p).to_bytes(8, "big"))
    return h.digest()


def _rng_from_digest(digest: bytes) -> np.random.Generator:
    """Reusable per-thread Generator, state reset to the digest."""
    slot = getattr(_scratch, "rng", None)
    if slot is None:
        bitgen = np.random.PCG64()
        slot = (bitgen, np.random.Generator(bitgen), bitgen.state)
        _scratch.rng = slot
    bitgen, gen, state = slot
    st = state["state"]
    st["state"] = int.from_bytes(digest, "big")
    st["inc"] = _PCG_INC
    state["has_uint32"] = 0
    state["uinteger"] = 0
    bitgen.state = state
    return gen


def keyed_rng(key: SecretKey, domain: str, parts=()) -> np.random.Generator:
    return _rng_from_digest(_digest(key, domain, parts))


def uniform_vector(key: SecretKey, ctx: PrefixContext, n: int) -> np.ndarray:
    """The first n keyed uniforms for this context; entry i is r_i."""
    return keyed_rng(key, "prefix", ctx.window).random(n)


def prefix_uniform(key: SecretKey, ctx: PrefixContext, index: int) -> float:
    """r_index in [0, 1): deterministic in (key, window, index)."""
    return float(keyed_rng(key, "prefix", ctx.window).random(index + 1)[index])


def keyed_permutation(key: SecretKey, ctx: PrefixContext, n: int) -> np.ndarray:
    """Keyed permutation of range(n): argsort of the context's uniforms."""
    u = keyed_rng(key, "green", ctx.window).random(n)
    return np.argsort(u, kind="stable")


def green_partition(key: SecretKey, ctx: PrefixContext, gamma: float, vocab_size: int) -> np.ndarray:
    """The first round(gamma * |V|) ids of the keyed permutation."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie strictly between 0 and 1")
    size = round(gamma * vocab_size)
    u = keyed_rng(key, "green", ctx.window).random(vocab_size)
    return np.argpartition(u, size)[:size] if 0 < size < vocab_size else np.arange(size)


def green_mask(key: SecretKey, ctx: PrefixContext, gamma: float, vocab_size: int) -> np.ndarray:
    """Boolean green-list membership mask; same partition as green_partition."""
    mask = np.zeros(vocab_size, dtype=bool)
    mask[green_partition(key, ctx, gamma, vocab_size)] = True
    return mask


@dataclass(frozen=True)
class KeySequence:
    """The Inverse scheme's key matrix: m rows of |V| uniforms."""

    xi: np.ndarray

    @property
    def m(self) -> int:
        return self.xi.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.xi.shape[1]


def sample_key_sequence(key: SecretKey, m: int, vocab_size: int) -> KeySequence:
    """m x |V| keyed uniforms, reproducible from the key alone."""
    if m < 1:
        raise ValueError("key sequence length m must be >= 1")
    xi = keyed_rng(key, "xi").random((m, vocab_size))
    return KeySequence(xi)


def keyed_bits(key: SecretKey, domain: str, n: int) -> np.ndarray:
    """n keyed {0,1} values (used for token -> bit assignments)."""
    return (keyed_rng(key, domain).random(n) < 0.5).astype(np.int8)


def word_bit(key: SecretKey, word: str) -> int:
    """Keyed parity bit of a (lowercased) word string."""
    h = hashlib.blake2b(digest_size=16, key=key.key)
    h.update(b"wordbit\x00")
    h.update(word.lower().encode("utf-8"))
    return h.digest()[-1] & 1


def derive_seed(*parts) -> int:
    """Unkeyed 64-bit seed derivation for harness plumbing.

    Accepts ints and strings; used to give every (prompt, stage) its own
    reproducible RNG stream.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(b"wmlab-seed\x00")
    for p in parts:
        if isinstance(p, int):
            h.update(b"i")
            h.update(p.to_bytes(16, "big", signed=True))
        else:
            h.update(b"s")
            h.update(str(p).encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "big")
