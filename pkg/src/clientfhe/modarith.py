"""NTT-friendly primes, shift-and-add Montgomery multiplication, RNS/CRT.

A supported prime has the sparse form

    q = 2^p_bw + k * 2^(n+1) + 1,   k = s_a 2^a + s_b 2^b + s_c 2^c

so that both q and its inverse modulo R = 2^r_exp are short signed sums of
powers of two.  For such q the inverse has the closed form
QInv = 2 - q = 1 - 2^p_bw - k 2^(n+1)  (mod R), valid whenever
(q - 1)^2 vanishes mod R, i.e. 2 * v2(q - 1) >= r_exp.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .errors import ConsistencyError, ParameterError

# deterministic Miller-Rabin bases for n < 3.3e24
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def two_adicity(x: int) -> int:
    return (x & -x).bit_length() - 1


def naf(k: int) -> list[tuple[int, int]]:
    """Non-adjacent form of k as (exponent, sign) pairs, lowest first."""
    out = []
    e = 0
    while k != 0:
        if k & 1:
            z = 2 - (k % 4)
            out.append((e, z))
            k -= z
        k >>= 1
        e += 1
    return out


def three_term_witness(k: int):
    """Express k as exactly three signed powers of two with distinct exponents.

    Returns ((sign, exp), ...) sorted by descending exponent, or None.  Any
    sum of three signed powers has NAF weight <= 3, and weight 1 or 2 values
    are padded with 2^(a+1) = 2^(a+2) - 2^(a+1) style splits.
    """
    if k == 0:
        return None
    terms = naf(k)
    if len(terms) > 3:
        return None
    terms = sorted(terms, reverse=True)
    if len(terms) == 1:
        e, s = terms[0]
        terms = [(e + 2, s), (e + 1, -s), (e, -s)]
    elif len(terms) == 2:
        (e1, s1), (e2, s2) = terms
        terms = [(e1 + 1, s1), (e1, -s1), (e2, s2)]
    return tuple((s, e) for e, s in terms)


@dataclass(frozen=True)
class NttFriendlyPrime:
    q: int
    p_bw: int
    n: int
    k_terms: tuple  # ((sign, exp), (sign, exp), (sign, exp))

    @property
    def k(self) -> int:
        return sum(s << e for s, e in self.k_terms)

    @property
    def two_adicity(self) -> int:
        return two_adicity(self.q - 1)

    @property
    def bits(self) -> int:
        return self.q.bit_length()

    def reconstruct(self) -> int:
        return (1 << self.p_bw) + self.k * (1 << (self.n + 1)) + 1

    def to_record(self) -> str:
        exps = " ".join(f"{'+' if s > 0 else '-'}{e}" for s, e in self.k_terms)
        return f"{self.q} {self.p_bw} {self.n} {exps}"

    @classmethod
    def from_record(cls, line: str) -> "NttFriendlyPrime":
        f = line.split()
        if len(f) != 6:
            raise ParameterError(f"bad prime record: {line!r}")
        terms = tuple((1 if t[0] == "+" else -1, int(t[1:])) for t in f[3:])
        p = cls(int(f[0]), int(f[1]), int(f[2]), terms)
        validate_prime(p)
        return p


def validate_prime(p: NttFriendlyPrime) -> None:
    if p.reconstruct() != p.q:
        raise ParameterError(f"witness does not reconstruct q={p.q}")
    if not is_prime(p.q):
        raise ParameterError(f"{p.q} is not prime")
    if p.two_adicity < p.n + 1:
        raise ParameterError(f"q={p.q} lacks a 2^{p.n + 1}-th root of unity")


def r_exponent(p: NttFriendlyPrime) -> int:
    """Smallest R = 2^r with R > q: p_bw + 1 for positive k, p_bw otherwise."""
    return p.p_bw + (1 if p.k > 0 else 0)


def closed_form_valid(p: NttFriendlyPrime) -> bool:
    return 2 * p.two_adicity >= r_exponent(p)


def witness_for(q: int, n: int):
    """Find (p_bw, k_terms) for q, or None.  Prefers p_bw = bitlen(q) - 1."""
    if q < 3 or (q - 1) % (1 << (n + 1)):
        return None
    b = q.bit_length()
    for p_bw in (b - 1, b):
        d = q - 1 - (1 << p_bw)
        if d % (1 << (n + 1)):
            continue
        k = d >> (n + 1)
        w = three_term_witness(k)
        if w is not None:
            return p_bw, w
    return None


RULES = ("closed_form", "magnitude", "none")


def _admissible(p: NttFriendlyPrime, rule: str) -> bool:
    if rule == "closed_form":
        return closed_form_valid(p)
    if rule == "magnitude":
        return abs(p.k) >= 2 ** ((p.p_bw + 1) // 2 - 1 - (p.n + 1))
    return True


def enumerate_ntt_friendly_primes(bit_lo: int, bit_hi: int, n: int,
                                  rule: str = "closed_form") -> list[NttFriendlyPrime]:
    """All primes in [2^bit_lo, 2^bit_hi) of the sparse form, ascending.

    `rule` selects the extra admissibility filter: "closed_form" keeps primes
    whose inverse mod R is given by the closed form (the default, so every
    result supports the shift-add reduction), "magnitude" applies a lower
    bound on |k| instead, "none" keeps the bare form.
    """
    if not (8 <= bit_lo <= bit_hi <= 62) or n < 2:
        raise ParameterError(f"invalid range bits=[{bit_lo}, {bit_hi}) n={n}")
    if rule not in RULES:
        raise ParameterError(f"unknown rule {rule!r}")
    lo, hi = 1 << bit_lo, 1 << bit_hi
    step = 1 << (n + 1)
    top = max(bit_hi - n - 1, 1) + 2
    # every k with NAF weight <= 3 that can land in range
    ks = set()
    for a in range(top + 1):
        for sa in (1, -1):
            ka = sa << a
            ks.add(ka)
            for b in range(a):
                for sb in (1, -1):
                    kb = ka + (sb << b)
                    ks.add(kb)
                    for c in range(b):
                        ks.add(kb + (1 << c))
                        ks.add(kb - (1 << c))
    ks.discard(0)
    found = {}
    for p_bw in range(bit_lo - 1, bit_hi + 1):
        base = (1 << p_bw) + 1
        for k in ks:
            q = base + k * step
            if q < lo or q >= hi or q in found:
                continue
            if not is_prime(q):
                continue
            w = witness_for(q, n)
            if w is None:
                continue
            p = NttFriendlyPrime(q, w[0], n, w[1])
            if _admissible(p, rule):
                found[q] = p
    return [found[q] for q in sorted(found)]


# ---------------------------------------------------------------- Montgomery

def _egcd_inverse(a: int, m: int) -> int:
    r0, r1, s0, s1 = m, a % m, 0, 1
    while r1:
        qt = r0 // r1
        r0, r1 = r1, r0 - qt * r1
        s0, s1 = s1, s0 - qt * s1
    if r0 != 1:
        raise ParameterError("not invertible")
    return s0 % m


@dataclass(frozen=True)
class MontgomeryContext:
    prime: NttFriendlyPrime
    r_exp: int
    q_inv: int
    r2: int
    shift_add_plan: tuple        # (shift, sign): x * QInv mod R
    q_plan: tuple                # (shift, sign): x * q
    kernel: np.ndarray = field(repr=False, compare=False)

    @property
    def q(self) -> int:
        return self.prime.q

    @property
    def R(self) -> int:
        return 1 << self.r_exp


def _sparse_plan(coeffs: Iterable[tuple[int, int]], r_exp: int | None) -> tuple:
    acc: dict[int, int] = {}
    for shift, sign in coeffs:
        if r_exp is not None and shift >= r_exp:
            continue
        acc[shift] = acc.get(shift, 0) + sign
    return tuple((s, c) for s, c in sorted(acc.items()) if c != 0)


def apply_plan(plan: Sequence[tuple[int, int]], x: int, r_exp: int | None = None) -> int:
    v = 0
    for shift, sign in plan:
        v += sign * (x << shift)
    return v if r_exp is None else v & ((1 << r_exp) - 1)


def make_montgomery_context(p: NttFriendlyPrime) -> MontgomeryContext:
    validate_prime(p)
    r = r_exponent(p)
    if r > 62:
        raise ParameterError("primes above 62 bits are not supported")
    R = 1 << r
    euclid = _egcd_inverse(p.q, R)
    closed = (1 - (1 << p.p_bw) - p.k * (1 << (p.n + 1))) % R
    if closed != euclid:
        raise ConsistencyError(
            f"closed-form QInv disagrees with Euclid for q={p.q} "
            f"(2*v2(q-1)={2 * p.two_adicity} < r_exp={r})")
    plan = _sparse_plan([(0, 1), (p.p_bw, -1)] +
                        [(e + p.n + 1, -s) for s, e in p.k_terms], r)
    if apply_plan(plan, 1, r) != euclid:
        raise ConsistencyError("shift-add plan does not reproduce QInv")
    if sum(1 for s, _ in plan if s) > 4:
        raise ConsistencyError("shift-add plan exceeds four shift terms")
    q_plan = _sparse_plan([(0, 1), (p.p_bw, 1)] +
                          [(e + p.n + 1, s) for s, e in p.k_terms], None)
    kp = np.zeros(K.MP_LEN, dtype=np.uint64)
    kp[0], kp[1], kp[2], kp[3] = p.q, r, 64 - r, R - 1
    for i, (shift, sign) in enumerate(plan):
        kp[4 + i] = shift
        kp[9 + i] = sign % (1 << 64)
    return MontgomeryContext(p, r, euclid, R * R % p.q, plan, q_plan, kp)


def mont_mul(ctx: MontgomeryContext, a: int, b: int) -> int:
    """a * b * R^-1 mod q with the m-step and m*q as shift-add sums."""
    q = ctx.q
    if not (0 <= a < q and 0 <= b < q):
        raise ParameterError("operands must lie in [0, q)")
    T = a * b
    m = apply_plan(ctx.shift_add_plan, T & (ctx.R - 1), ctx.r_exp)
    t = (T - apply_plan(ctx.q_plan, m)) >> ctx.r_exp
    if t < 0:
        t += q
    return t


def to_mont(ctx: MontgomeryContext, a: int) -> int:
    return mont_mul(ctx, a % ctx.q, ctx.r2)


def from_mont(ctx: MontgomeryContext, a: int) -> int:
    return mont_mul(ctx, a, 1)


def to_mont_array(ctx: MontgomeryContext, a: np.ndarray) -> np.ndarray:
    return K.mont_mul_const(np.ascontiguousarray(a, dtype=np.uint64),
                            np.uint64(ctx.r2), ctx.kernel)


def from_mont_array(ctx: MontgomeryContext, a: np.ndarray) -> np.ndarray:
    return K.mont_mul_const(np.ascontiguousarray(a, dtype=np.uint64),
                            np.uint64(1), ctx.kernel)


def mont_mul_array(ctx: MontgomeryContext, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return K.mont_mul_vec(np.ascontiguousarray(a, dtype=np.uint64),
                          np.ascontiguousarray(b, dtype=np.uint64), ctx.kernel)


def mul_mod_array(ctx: MontgomeryContext, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Plain a * b mod q for arrays in the normal domain."""
    return mont_mul_array(ctx, mont_mul_array(ctx, a, b), np.full(len(a), ctx.r2, np.uint64))


# ---------------------------------------------------------------- RNS / CRT

@dataclass(frozen=True)
class RnsBasis:
    primes: tuple

    def __post_init__(self):
        qs = [p.q for p in self.primes]
        if len(set(qs)) != len(qs):
            raise ParameterError("basis primes must be distinct")
        if not qs:
            raise ParameterError("empty basis")

    @property
    def moduli(self) -> list[int]:
        return [p.q for p in self.primes]

    @property
    def big_modulus(self) -> int:
        Q = 1
        for q in self.moduli:
            Q *= q
        return Q

    def __len__(self):
        return len(self.primes)

    def prefix(self, level: int) -> "RnsBasis":
        if not 1 <= level <= len(self.primes):
            raise ParameterError(f"level {level} outside 1..{len(self.primes)}")
        return RnsBasis(self.primes[:level])


def rns_decompose(coeffs, basis: RnsBasis):
    """Residues of (possibly negative, arbitrary precision) integers per limb."""
    from .fourier import RnsPolynomial
    vals = [int(c) for c in coeffs]
    limbs = []
    for q in basis.moduli:
        limbs.append(np.array([v % q for v in vals], dtype=np.uint64))
    return RnsPolynomial(basis, limbs)


def rns_from_int64(coeffs: np.ndarray, basis: RnsBasis):
    """Fast path for coefficients that fit int64."""
    from .fourier import RnsPolynomial
    c = np.asarray(coeffs, dtype=np.int64)
    limbs = []
    for q in basis.moduli:
        r = c % np.int64(q)
        limbs.append(r.astype(np.uint64))
    return RnsPolynomial(basis, limbs)


@dataclass
class _CrtTables:
    mps: np.ndarray
    cinv: np.ndarray
    qs: np.ndarray
    qs_f: np.ndarray
    half: np.ndarray
    weights: list


_crt_cache: dict = {}


def _crt_tables(basis: RnsBasis) -> _CrtTables:
    key = tuple(basis.moduli)
    t = _crt_cache.get(key)
    if t is not None:
        return t
    ctxs = [make_montgomery_context(p) for p in basis.primes]
    L = len(ctxs)
    mps = np.stack([c.kernel for c in ctxs])
    cinv = np.zeros((L, L), dtype=np.uint64)
    for i in range(L):
        qi = ctxs[i].q
        for j in range(i):
            cinv[i, j] = pow(basis.moduli[j], -1, qi) * ctxs[i].R % qi
    half = basis.big_modulus // 2
    digits = []
    for q in basis.moduli:
        digits.append(half % q)
        half //= q
    weights = [1]
    for q in basis.moduli[:-1]:
        weights.append(weights[-1] * q)
    t = _CrtTables(mps, cinv, np.array(basis.moduli, dtype=np.uint64),
                   np.array(basis.moduli, dtype=np.float64),
                   np.array(digits, dtype=np.uint64), weights)
    _crt_cache[key] = t
    return t


def _check_basis(poly, basis: RnsBasis):
    if tuple(poly.basis.moduli) != tuple(basis.moduli):
        raise ParameterError("polynomial limbs do not match the basis")


def mixed_radix_digits(poly, basis: RnsBasis) -> np.ndarray:
    _check_basis(poly, basis)
    t = _crt_tables(basis)
    res = np.ascontiguousarray(np.stack(poly.limbs))
    return K.garner_digits(res, t.mps, t.cinv)


def crt_reconstruct(poly, basis: RnsBasis) -> list[int]:
    """Centered lifts in (-Q/2, Q/2], as Python ints."""
    v = mixed_radix_digits(poly, basis)
    t = _crt_tables(basis)
    Q = basis.big_modulus
    half = Q // 2
    out = []
    cols = v.T.tolist()
    for col in cols:
        x = 0
        for d, w in zip(col, t.weights):
            x += d * w
        out.append(x - Q if x > half else x)
    return out


def crt_reconstruct_float(poly, basis: RnsBasis) -> np.ndarray:
    """Centered lifts as float64, exact up to float rounding of the result."""
    v = mixed_radix_digits(poly, basis)
    t = _crt_tables(basis)
    return K.centered_float(v, t.qs_f, t.qs, t.half)
