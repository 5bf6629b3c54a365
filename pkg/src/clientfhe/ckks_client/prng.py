"""Seeded sample streams: AES-128 in counter mode keyed by the 128-bit seed.

Each role (secret key, public mask, per-limb uniform, encryption mask and
errors) gets its own stream tag; the counter-mode nonce is derived from the
tag, so streams are independent and position-addressable.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from ..errors import ParameterError

SEED_BYTES = 16


def parse_seed(seed) -> bytes:
    """Accept 16 raw bytes, a 32-digit hex string or a non-negative int < 2^128."""
    if isinstance(seed, (bytes, bytearray)):
        b = bytes(seed)
    elif isinstance(seed, str):
        s = seed[2:] if seed.lower().startswith("0x") else seed
        if len(s) > 32:
            raise ParameterError("seed must be at most 128 bits")
        try:
            b = bytes.fromhex(s.rjust(32, "0"))
        except ValueError as exc:
            raise ParameterError(f"bad hex seed {seed!r}") from exc
    elif isinstance(seed, (int, np.integer)):
        if not 0 <= int(seed) < 1 << 128:
            raise ParameterError("seed must be a 128-bit value")
        b = int(seed).to_bytes(SEED_BYTES, "big")
    else:
        raise ParameterError(f"unsupported seed type {type(seed).__name__}")
    if len(b) != SEED_BYTES:
        raise ParameterError("seed must be exactly 16 bytes")
    return b


class ByteStream:
    def __init__(self, seed, tag: bytes):
        nonce = hashlib.sha256(b"clientfhe/prng/" + bytes(tag)).digest()[:16]
        self._enc = Cipher(algorithms.AES(parse_seed(seed)), modes.CTR(nonce)).encryptor()

    def read(self, n: int) -> bytes:
        return self._enc.update(bytes(n))

    def words(self, n: int) -> np.ndarray:
        return np.frombuffer(self.read(8 * n), dtype="<u8").astype(np.uint64)


@dataclass(frozen=True)
class Uniform:
    q: int


@dataclass(frozen=True)
class Ternary:
    pass


@dataclass(frozen=True)
class Gaussian:
    sigma: float = 3.2
    tail: float = 6.0


@lru_cache(maxsize=16)
def gaussian_table(sigma: float, tail: float = 6.0) -> tuple:
    """Cumulative distribution over [-B, B] scaled to 2^63, B = floor(tail*sigma)."""
    if sigma <= 0:
        raise ParameterError("sigma must be positive")
    bound = int(math.floor(tail * sigma))
    xs = np.arange(-bound, bound + 1)
    p = np.exp(-(xs.astype(np.float64) ** 2) / (2 * sigma * sigma))
    cdf = np.cumsum(p) / p.sum()
    thresh = np.minimum(np.round(cdf * 2.0 ** 63), 2.0 ** 63).astype(np.uint64)
    thresh[-1] = np.uint64(1 << 63)
    thresh.flags.writeable = False
    return bound, thresh


def _uniform(bs: ByteStream, q: int, count: int) -> np.ndarray:
    if q < 2 or q >= 1 << 63:
        raise ParameterError("uniform modulus must lie in [2, 2^63)")
    mask = np.uint64((1 << q.bit_length()) - 1)
    out = np.empty(count, dtype=np.uint64)
    got = 0
    while got < count:
        need = count - got
        w = bs.words(need + need // 4 + 8) & mask
        w = w[w < np.uint64(q)][:need]
        out[got:got + w.size] = w
        got += w.size
    return out


def _ternary(bs: ByteStream, count: int) -> np.ndarray:
    out = np.empty(count, dtype=np.int64)
    got = 0
    while got < count:
        need = count - got
        b = np.frombuffer(bs.read(need + need // 64 + 8), dtype=np.uint8)
        b = b[b < 255][:need]
        out[got:got + b.size] = b.astype(np.int64) % 3 - 1
        got += b.size
    return out


def _gaussian(bs: ByteStream, g: Gaussian, count: int) -> np.ndarray:
    bound, thresh = gaussian_table(float(g.sigma), float(g.tail))
    u = bs.words(count) >> np.uint64(1)
    idx = np.searchsorted(thresh, u, side="right")
    return np.minimum(idx, 2 * bound).astype(np.int64) - bound


def prng_expand(seed, stream_tag: bytes, count: int, dist) -> np.ndarray:
    """Deterministic samples for (seed, stream_tag).

    Uniform(q) -> uint64 in [0, q) by rejection; Ternary -> int64 in {-1, 0, 1};
    Gaussian(sigma) -> int64 discrete Gaussian, cut at tail*sigma.
    """
    if count < 0:
        raise ParameterError("count must be non-negative")
    if isinstance(stream_tag, str):
        stream_tag = stream_tag.encode()
    bs = ByteStream(seed, stream_tag)
    if isinstance(dist, Uniform):
        return _uniform(bs, int(dist.q), count) if count else np.empty(0, np.uint64)
    if isinstance(dist, Ternary):
        return _ternary(bs, count) if count else np.empty(0, np.int64)
    if isinstance(dist, Gaussian):
        return _gaussian(bs, dist, count) if count else np.empty(0, np.int64)
    raise ParameterError(f"unknown distribution {dist!r}")


def prng_unit_floats(seed, stream_tag: bytes, count: int) -> np.ndarray:
    """count doubles in [0, 1) with 53 random bits each."""
    bs = ByteStream(seed, stream_tag if isinstance(stream_tag, bytes) else stream_tag.encode())
    return (bs.words(count) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
