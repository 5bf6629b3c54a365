"""CKKS client operations: keygen, encode, encrypt, decrypt, decode.

Polynomials are kept in the NTT domain in bit-reversed order (the native
output order of the merged forward transform) between operations.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import ParameterError
from ..fourier import (BITREV, NTT, RnsPolynomial, negacyclic_ntt,
                       pointwise_mul, poly_add, poly_neg)
from ..modarith import (RnsBasis, crt_reconstruct_float, enumerate_ntt_friendly_primes,
                        rns_from_int64)
from ..redfloat import FP55, RedFloatFormat
from .encoding import coeffs_to_slots, slots_to_coeffs
from .prng import Gaussian, Ternary, Uniform, parse_seed, prng_expand, prng_unit_floats


@dataclass(frozen=True)
class CkksParams:
    log_n: int = 16
    prime_bits: int = 36
    levels: int = 24
    scale: float = 2.0 ** 36
    sigma: float = 3.2
    decrypt_levels: int = 2

    def __post_init__(self):
        if not 4 <= self.log_n <= 17:
            raise ParameterError("log_n must lie in [4, 17]")
        if not 20 <= self.prime_bits <= 61:
            raise ParameterError("prime_bits must lie in [20, 61]")
        if self.levels < 1:
            raise ParameterError("levels must be positive")
        if not 0 < self.scale <= 2.0 ** self.prime_bits:
            raise ParameterError("scale must lie in (0, 2^prime_bits]")
        if self.sigma <= 0:
            raise ParameterError("sigma must be positive")
        if not 1 <= self.decrypt_levels <= self.levels:
            raise ParameterError("decrypt_levels must lie in [1, levels]")

    @property
    def N(self) -> int:
        return 1 << self.log_n

    @property
    def slots(self) -> int:
        return self.N // 2

    @property
    def basis(self) -> RnsBasis:
        return _basis(self.log_n, self.prime_bits, self.levels)


@lru_cache(maxsize=16)
def _basis(log_n: int, prime_bits: int, levels: int) -> RnsBasis:
    """The `levels` largest sparse primes of exactly prime_bits bits, q = 1 mod 2N."""
    cands = enumerate_ntt_friendly_primes(prime_bits - 1, prime_bits, log_n)
    if len(cands) < levels:
        raise ParameterError(f"only {len(cands)} {prime_bits}-bit primes for N=2^{log_n}, "
                             f"{levels} levels requested")
    return RnsBasis(tuple(reversed(cands[-levels:])))


@dataclass
class KeyMaterial:
    seed: bytes
    sk_coeffs: np.ndarray
    sk: RnsPolynomial
    pk0: RnsPolynomial
    pk1: RnsPolynomial
    sigma: float = 3.2

    @property
    def level(self) -> int:
        return len(self.pk0.basis)

    @property
    def hamming_weight(self) -> int:
        return int(np.count_nonzero(self.sk_coeffs))

    def at_level(self, level: int) -> "KeyMaterial":
        """The same keys restricted to the first `level` limbs."""
        return KeyMaterial(self.seed, self.sk_coeffs, truncate(self.sk, level),
                           truncate(self.pk0, level), truncate(self.pk1, level), self.sigma)


@dataclass
class Plaintext:
    poly: RnsPolynomial
    scale: float
    level: int


@dataclass
class Ciphertext:
    c0: RnsPolynomial
    c1: RnsPolynomial
    scale: float
    level: int

    def __post_init__(self):
        if self.c0.basis.moduli != self.c1.basis.moduli:
            raise ParameterError("ciphertext components differ in basis")


def small_to_ntt(x: np.ndarray, basis: RnsBasis) -> RnsPolynomial:
    return negacyclic_ntt(rns_from_int64(x, basis), "forward", BITREV)


def truncate(poly: RnsPolynomial, level: int) -> RnsPolynomial:
    if not 1 <= level <= len(poly.basis):
        raise ParameterError(f"cannot drop to level {level} from {len(poly.basis)}")
    return RnsPolynomial(poly.basis.prefix(level), poly.limbs[:level], poly.domain, poly.ordering)


def keygen(params: CkksParams, seed) -> KeyMaterial:
    seed = parse_seed(seed)
    basis, N = params.basis, params.N
    s = prng_expand(seed, b"key/sk", N, Ternary())
    e = prng_expand(seed, b"key/e", N, Gaussian(params.sigma))
    a = RnsPolynomial(basis, [prng_expand(seed, b"key/a/%d" % i, N, Uniform(q))
                              for i, q in enumerate(basis.moduli)], NTT, BITREV)
    sk = small_to_ntt(s, basis)
    pk0 = poly_add(poly_neg(pointwise_mul(a, sk)), small_to_ntt(e, basis))
    return KeyMaterial(seed, s.astype(np.int8), sk, pk0, a, params.sigma)


def encode(slots, params: CkksParams, fmt: RedFloatFormat = FP55,
           level: int | None = None) -> Plaintext:
    level = params.levels if level is None else level
    z = np.asarray(slots, dtype=np.complex128)
    if z.shape != (params.slots,):
        raise ParameterError(f"expected {params.slots} slots, got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ParameterError("slots must be finite")
    c = slots_to_coeffs(z, params.N, fmt, params.scale)
    basis = params.basis.prefix(level)
    bound = min(float(basis.big_modulus) / 2, 2.0 ** 62)
    if not np.all(np.isfinite(c)) or np.abs(c).max(initial=0) >= bound:
        raise ParameterError("encoded magnitude exceeds the modulus headroom")
    ints = np.rint(c).astype(np.int64)
    return Plaintext(small_to_ntt(ints, basis), params.scale, level)


def decode(pt: Plaintext, fmt: RedFloatFormat = FP55) -> np.ndarray:
    coeff = negacyclic_ntt(pt.poly, "inverse") if pt.poly.domain == NTT else pt.poly
    c = crt_reconstruct_float(coeff, coeff.basis)
    return coeffs_to_slots(c, fmt, 1.0 / pt.scale)


def encrypt(pt: Plaintext, km: KeyMaterial, enc_seed, noiseless: bool = False) -> Ciphertext:
    """c0 = v*pk0 + e0 + m, c1 = v*pk1 + e1.  noiseless sets v = e0 = e1 = 0."""
    if pt.level != km.level:
        raise ParameterError(f"plaintext level {pt.level} != key level {km.level}")
    basis = km.pk0.basis
    N = pt.poly.degree
    if noiseless:
        zero = RnsPolynomial(basis, [np.zeros(N, np.uint64) for _ in basis.moduli], NTT, BITREV)
        return Ciphertext(pt.poly.to_bitrev(), zero, pt.scale, pt.level)
    enc_seed = parse_seed(enc_seed)
    sigma = km.sigma
    v = small_to_ntt(prng_expand(enc_seed, b"enc/v", N, Ternary()), basis)
    e0 = small_to_ntt(prng_expand(enc_seed, b"enc/e0", N, Gaussian(sigma)), basis)
    e1 = small_to_ntt(prng_expand(enc_seed, b"enc/e1", N, Gaussian(sigma)), basis)
    c0 = poly_add(poly_add(pointwise_mul(v, km.pk0), e0), pt.poly)
    c1 = poly_add(pointwise_mul(v, km.pk1), e1)
    return Ciphertext(c0, c1, pt.scale, pt.level)


def decrypt(ct: Ciphertext, km: KeyMaterial, level: int | None = None) -> Plaintext:
    level = ct.level if level is None else level
    if level > ct.level:
        raise ParameterError("cannot decrypt above the ciphertext level")
    c0, c1 = truncate(ct.c0, level), truncate(ct.c1, level)
    if km.sk.basis.moduli[:level] != c0.basis.moduli:
        raise ParameterError("ciphertext basis is not a prefix of the key basis")
    sk = truncate(km.sk, level)
    return Plaintext(poly_add(c0, pointwise_mul(c1, sk)), ct.scale, level)


def server_return(ct: Ciphertext, params: CkksParams) -> Ciphertext:
    """Model a ciphertext coming back from the server at decrypt_levels limbs."""
    L = params.decrypt_levels
    return Ciphertext(truncate(ct.c0, L), truncate(ct.c1, L), ct.scale, L)


def ct_add(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    if a.level != b.level or a.scale != b.scale:
        raise ParameterError("operands differ in level or scale")
    return Ciphertext(poly_add(a.c0, b.c0), poly_add(a.c1, b.c1), a.scale, a.level)


def noise_bound(params: CkksParams, hamming_weight: int | None = None,
                fmt: RedFloatFormat = FP55) -> float:
    """High-probability bound on the decoded slot error of a fresh roundtrip.

    Encryption noise v*e + e0 + e1*s in the canonical embedding norm is below
    8*sqrt(2)*sigma*N + 6*sigma*sqrt(N) + 16*sigma*sqrt(h*N); integer rounding
    at encode adds at most N/2.  Both divide by the scale.  The two
    reduced-precision transforms add a first-order 4*(log2 N + 1)*2^-m*N.
    """
    N = params.N
    h = 2 * N / 3 if hamming_weight is None else hamming_weight
    s = params.sigma
    enc = 8 * math.sqrt(2) * s * N + 6 * s * math.sqrt(N) + 16 * s * math.sqrt(h * N)
    fp = 4 * (params.log_n + 1) * 2.0 ** -fmt.mantissa_bits * N
    return (enc + N / 2) / params.scale + fp


def random_message(params: CkksParams, seed, tag: bytes = b"msg") -> np.ndarray:
    """Deterministic slots uniform in the unit disc."""
    u = prng_unit_floats(seed, b"msg/r/" + tag, params.slots)
    t = prng_unit_floats(seed, b"msg/t/" + tag, params.slots)
    return np.sqrt(u) * np.exp(2j * np.pi * t)


def roundtrip_error(z, params: CkksParams, km: KeyMaterial, enc_seed,
                    fmt: RedFloatFormat = FP55, noiseless: bool = False,
                    level: int | None = None) -> float:
    """Max slot error of decode(decrypt(server_return(encrypt(encode(z))))).

    level < params.levels encrypts on the limb prefix only; limbs are
    independent, so the returned ciphertext is the same as when encrypting
    at full level and dropping limbs.
    """
    level = params.levels if level is None else level
    if level < params.decrypt_levels:
        raise ParameterError("level below the decrypt level")
    if level != km.level:
        km = km.at_level(level)
    pt = encode(z, params, fmt, level)
    ct = server_return(encrypt(pt, km, enc_seed, noiseless), params)
    out = decode(decrypt(ct, km), fmt)
    return float(np.abs(out - z).max())


def roundtrip_precision_sweep(params: CkksParams, mantissa_range, seed=0,
                              n_messages: int = 32,
                              level: int | None = None) -> list[tuple[int, float, float]]:
    """(m, precision_bits, noiseless_bits) per mantissa width m.

    precision_bits = -log2 of the max slot error over n_messages full
    roundtrips; noiseless_bits repeats them with zero mask and errors, which
    isolates encode rounding plus the reduced-precision transforms.  Messages,
    keys and encryption seeds are shared across m.
    """
    ms = list(mantissa_range)
    if any(not 20 <= m <= 52 for m in ms):
        raise ParameterError("mantissa range must lie within [20, 52]")
    seed = parse_seed(seed)
    km = keygen(params, seed)
    msgs = [random_message(params, seed, b"%d" % i) for i in range(n_messages)]
    rows = []
    for m in ms:
        fmt = RedFloatFormat(m)
        worst = [0.0, 0.0]
        for i, z in enumerate(msgs):
            for j, quiet in enumerate((False, True)):
                err = roundtrip_error(z, params, km, _enc_seed(seed, i), fmt, quiet, level)
                worst[j] = max(worst[j], err)
        rows.append((m, *(-math.log2(w) if w > 0 else float("inf") for w in worst)))
    return rows


def sweep_to_csv(rows, manifest: str | None = None) -> str:
    head = f"# manifest {manifest}\n" if manifest else ""
    body = "".join(f"{m},{a:.6f},{b:.6f}\n" for m, a, b in rows)
    return head + "mantissa_bits,precision_bits,noiseless_bits\n" + body


def _enc_seed(seed: bytes, i: int) -> bytes:
    return hashlib.sha256(seed + b"enc-seed" + i.to_bytes(8, "little")).digest()[:16]
