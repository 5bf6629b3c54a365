"""Negacyclic NTT with merged twiddles, direct oracles, OTF twiddle streams
and an MDC streaming model.

Forward transform: A[k] = sum_n a[n] psi^((2k+1) n) mod q, with psi a
primitive 2N-th root (psi^2 = W_N).  The fast path folds the psi^n pre-twist
into the butterfly twiddles (Cooley-Tukey, natural in, bit-reversed out);
the inverse folds psi^-k into Gentleman-Sande twiddles and applies N^-1 in
a final pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np
from numba import njit

from . import _kernels as K
from .errors import ParameterError
from .modarith import (MontgomeryContext, NttFriendlyPrime, RnsBasis,
                       make_montgomery_context)

COEFF, NTT = "coeff", "ntt"
NATURAL, BITREV = "natural", "bitrev"


def bit_reverse(x: int, bits: int) -> int:
    r = 0
    for _ in range(bits):
        r = (r << 1) | (x & 1)
        x >>= 1
    return r


@lru_cache(maxsize=None)
def brv_perm(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    r = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        r |= ((idx >> b) & 1) << (bits - 1 - b)
    r.flags.writeable = False
    return r


def _log2(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise ParameterError(f"{n} is not a power of two")
    return n.bit_length() - 1


@dataclass
class RnsPolynomial:
    basis: RnsBasis
    limbs: list
    domain: str = COEFF
    ordering: str = NATURAL

    def __post_init__(self):
        if len(self.limbs) != len(self.basis):
            raise ParameterError("limb count does not match basis")
        n = len(self.limbs[0])
        for limb, q in zip(self.limbs, self.basis.moduli):
            if len(limb) != n:
                raise ParameterError("limb lengths differ")
        _log2(n)

    @property
    def degree(self) -> int:
        return len(self.limbs[0])

    def copy(self) -> "RnsPolynomial":
        return RnsPolynomial(self.basis, [l.copy() for l in self.limbs],
                             self.domain, self.ordering)

    def check_reduced(self) -> None:
        for limb, q in zip(self.limbs, self.basis.moduli):
            if limb.size and int(limb.max()) >= q:
                raise ParameterError("coefficient not reduced")

    def same_as(self, other: "RnsPolynomial") -> bool:
        return (self.basis.moduli == other.basis.moduli and self.domain == other.domain
                and self.ordering == other.ordering
                and all(np.array_equal(a, b) for a, b in zip(self.limbs, other.limbs)))

    def to_natural(self) -> "RnsPolynomial":
        if self.ordering == NATURAL:
            return self
        perm = brv_perm(self.degree)
        return RnsPolynomial(self.basis, [np.ascontiguousarray(l[perm]) for l in self.limbs],
                             self.domain, NATURAL)

    def to_bitrev(self) -> "RnsPolynomial":
        if self.ordering == BITREV:
            return self
        perm = brv_perm(self.degree)
        return RnsPolynomial(self.basis, [np.ascontiguousarray(l[perm]) for l in self.limbs],
                             self.domain, BITREV)


# ---------------------------------------------------------------- roots, seeds

def find_psi(q: int, N: int) -> int:
    """Primitive 2N-th root of unity: first x^((q-1)/2N) with psi^N = -1."""
    if (q - 1) % (2 * N):
        raise ParameterError(f"q={q} has no primitive {2 * N}-th root")
    e = (q - 1) // (2 * N)
    for x in range(2, q):
        g = pow(x, e, q)
        if pow(g, N, q) == q - 1:
            return g
    raise ParameterError("no root found")


@dataclass(frozen=True)
class LevelSeed:
    """Geometric twiddle stream for one level and one lane: the exponent at
    cycle c is base + step * ((c // hold) % period)  (units of psi)."""
    base: int
    step: int
    hold: int
    period: int


@dataclass(frozen=True)
class TwiddleSeed:
    q: int
    N: int
    psi: int
    psi_inv: int
    n_inv: int

    def power(self, e: int) -> int:
        return pow(self.psi, e % (2 * self.N), self.q)


def twiddle_seed(prime, N: int) -> TwiddleSeed:
    q = prime.q if isinstance(prime, NttFriendlyPrime) else int(prime)
    psi = find_psi(q, N)
    return TwiddleSeed(q, N, psi, pow(psi, -1, q), pow(N, -1, q))


@dataclass
class _NttTables:
    ctx: MontgomeryContext
    seed: TwiddleSeed
    w: np.ndarray
    winv: np.ndarray
    ninv: np.uint64


_table_cache: dict = {}


def ntt_tables(prime: NttFriendlyPrime, N: int) -> _NttTables:
    key = (prime.q, N)
    t = _table_cache.get(key)
    if t is not None:
        return t
    ctx = make_montgomery_context(prime)
    seed = twiddle_seed(prime, N)
    q, R = prime.q, ctx.R
    _log2(N)
    # psi^j for j < N, then gather into bit-reversed order, Montgomery form
    pw = np.empty(N, dtype=object)
    pwi = np.empty(N, dtype=object)
    x = xi = R % q
    for j in range(N):
        pw[j], pwi[j] = x, xi
        x = x * seed.psi % q
        xi = xi * seed.psi_inv % q
    perm = brv_perm(N)
    w = np.array(pw[perm].tolist(), dtype=np.uint64)
    winv = np.array(pwi[perm].tolist(), dtype=np.uint64)
    t = _NttTables(ctx, seed, w, winv, np.uint64(seed.n_inv * R % q))
    _table_cache[key] = t
    return t


# ---------------------------------------------------------------- oracles

@njit(cache=True)
def _direct(a, pw, mp, sign_inv):
    n = a.shape[0]
    out = np.zeros(n, dtype=np.uint64)
    q = mp[0]
    two_n = 2 * n
    for k in range(n):
        acc = np.uint64(0)
        for j in range(n):
            if sign_inv:
                e = ((2 * j + 1) * k) % two_n
            else:
                e = ((2 * k + 1) * j) % two_n
            v = K.mont(a[j], pw[e], mp)
            acc = acc + v
            if acc >= q:
                acc -= q
        out[k] = acc
    return out


def reference_transform(limb, prime, direction: str = "forward") -> np.ndarray:
    """Direct O(N^2) evaluation with explicit pre-/post-twist (oracle only).

    forward: A[k] = sum_n a[n] psi^n W^(kn)
    inverse: a[n] = N^-1 psi^-n sum_k A[k] W^(-kn)
    """
    a = np.ascontiguousarray(limb, dtype=np.uint64)
    N = len(a)
    if N > 4096:
        raise ParameterError("reference transform is limited to N <= 4096")
    ctx = make_montgomery_context(prime)
    seed = twiddle_seed(prime, N)
    q, R = prime.q, ctx.R
    base = seed.psi if direction == "forward" else seed.psi_inv
    pw = np.array([pow(base, e, q) * R % q for e in range(2 * N)], dtype=np.uint64)
    out = _direct(a, pw, ctx.kernel, direction != "forward")
    if direction != "forward":
        out = K.mont_mul_const(out, np.uint64(seed.n_inv * R % q), ctx.kernel)
    return out


def schoolbook_negacyclic(a, b, q: int) -> np.ndarray:
    """O(N^2) product in Z_q[x]/(x^N + 1) with Python integers."""
    a = [int(v) for v in a]
    b = [int(v) for v in b]
    N = len(a)
    out = [0] * N
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            k = i + j
            if k < N:
                out[k] += ai * bj
            else:
                out[k - N] -= ai * bj
    return np.array([v % q for v in out], dtype=np.uint64)


# ---------------------------------------------------------------- fast path

def ntt_limb(a: np.ndarray, prime: NttFriendlyPrime, direction: str = "forward") -> np.ndarray:
    """One limb.  forward: natural -> bit-reversed; inverse: bit-reversed -> natural."""
    t = ntt_tables(prime, len(a))
    out = np.array(a, dtype=np.uint64, copy=True)
    if direction == "forward":
        K.ntt_ct_inplace(out, t.w, t.ctx.kernel)
    else:
        K.ntt_gs_inplace(out, t.winv, t.ctx.kernel, t.ninv)
    return out


def negacyclic_ntt(poly: RnsPolynomial, direction: str = "forward",
                   ordering: str = NATURAL) -> RnsPolynomial:
    """Merged-twiddle transform on every limb.

    The forward result is returned in `ordering`; the inverse accepts either
    ordering (per the flag) and always returns natural coefficients.
    """
    if direction == "forward":
        if poly.domain != COEFF:
            raise ParameterError("forward transform needs a coefficient-domain input")
        src = poly.to_natural()
        limbs = [ntt_limb(l, p, "forward") for l, p in zip(src.limbs, src.basis.primes)]
        out = RnsPolynomial(poly.basis, limbs, NTT, BITREV)
        return out.to_natural() if ordering == NATURAL else out
    if direction == "inverse":
        if poly.domain != NTT:
            raise ParameterError("inverse transform needs an NTT-domain input")
        src = poly.to_bitrev()
        limbs = [ntt_limb(l, p, "inverse") for l, p in zip(src.limbs, src.basis.primes)]
        return RnsPolynomial(poly.basis, limbs, COEFF, NATURAL)
    raise ParameterError(f"unknown direction {direction!r}")


def pointwise_mul(a: RnsPolynomial, b: RnsPolynomial) -> RnsPolynomial:
    if a.basis.moduli != b.basis.moduli or a.domain != NTT or b.domain != NTT:
        raise ParameterError("pointwise product needs NTT-domain operands on one basis")
    b = b.to_bitrev() if a.ordering == BITREV else b.to_natural()
    limbs = []
    for x, y, p in zip(a.limbs, b.limbs, a.basis.primes):
        ctx = ntt_tables(p, a.degree).ctx
        limbs.append(K.mont_mul_const(K.mont_mul_vec(x, y, ctx.kernel),
                                      np.uint64(ctx.r2), ctx.kernel))
    return RnsPolynomial(a.basis, limbs, NTT, a.ordering)


def poly_add(a: RnsPolynomial, b: RnsPolynomial) -> RnsPolynomial:
    if a.basis.moduli != b.basis.moduli or a.domain != b.domain:
        raise ParameterError("operands differ in basis or domain")
    b = b.to_bitrev() if a.ordering == BITREV else b.to_natural()
    limbs = [K.add_mod(x, y, np.uint64(q)) for x, y, q in zip(a.limbs, b.limbs, a.basis.moduli)]
    return RnsPolynomial(a.basis, limbs, a.domain, a.ordering)


def poly_neg(a: RnsPolynomial) -> RnsPolynomial:
    limbs = [K.sub_mod(np.zeros_like(x), x, np.uint64(q)) for x, q in zip(a.limbs, a.basis.moduli)]
    return RnsPolynomial(a.basis, limbs, a.domain, a.ordering)


def negacyclic_polymul(a: RnsPolynomial, b: RnsPolynomial) -> RnsPolynomial:
    if a.basis.moduli != b.basis.moduli:
        raise ParameterError("basis mismatch")
    if a.domain != COEFF or b.domain != COEFF:
        raise ParameterError("polymul expects coefficient-domain operands")
    A = negacyclic_ntt(a, "forward", BITREV)
    B = negacyclic_ntt(b, "forward", BITREV)
    return negacyclic_ntt(pointwise_mul(A, B), "inverse")


# ---------------------------------------------------------------- MDC schedule

@dataclass(frozen=True)
class LevelLayout:
    """Where each index bit lives at one butterfly level.

    lanes[i] is the index bit carried by lane bit i (lanes[-1] is the pair
    bit); cycle[j] is the index bit carried by cycle-counter bit j.
    """
    lanes: tuple
    cycle: tuple

    def place(self, x: np.ndarray):
        c = np.zeros_like(x)
        ln = np.zeros_like(x)
        for j, b in enumerate(self.cycle):
            c |= ((x >> b) & 1) << j
        for i, b in enumerate(self.lanes):
            ln |= ((x >> b) & 1) << i
        return c, ln


def _layouts(P: int, N: int) -> list[LevelLayout]:
    n, p = _log2(N), _log2(P)
    lanes = list(range(p - 1)) + [n - 1]
    cyc = [n - 2 - j for j in range(n - p)]
    out = []
    for s in range(1, n + 1):
        out.append(LevelLayout(tuple(lanes), tuple(cyc)))
        nxt = n - s - 1
        if nxt < 0:
            break
        top = lanes[-1]
        if nxt in cyc:
            # delay-switch-delay commutator: old pair bit trades places with nxt
            cyc[cyc.index(nxt)] = top
        else:
            lanes[lanes.index(nxt)] = top
        lanes[-1] = nxt
    return out


def radix_plans(n: int, max_log: int = 4) -> list[tuple]:
    """Every ordered radix plan (stage radices 2..2^max_log) covering 2^n."""
    out = []

    def rec(left, acc):
        if left == 0:
            out.append(tuple(acc))
            return
        for m in range(1, min(max_log, left) + 1):
            rec(left - m, acc + [1 << m])
    rec(n, [])
    return out


def _plan_groups(plan: Sequence[int]) -> list[tuple[int, int]]:
    """(first level, m) for each stage, levels counted from 1."""
    out, lvl = [], 1
    for r in plan:
        m = _log2(r)
        if m < 1:
            raise ParameterError("stage radix must be at least 2")
        out.append((lvl, m))
        lvl += m
    return out


def merged_exponents(N: int) -> list[np.ndarray]:
    """Per level, psi-exponent multiplying the lower butterfly input (CT form)."""
    n = _log2(N)
    x = np.arange(N)
    rev = brv_perm(N)
    out = []
    for s in range(1, n + 1):
        pair = n - s
        e = rev[(1 << (s - 1)) + (x >> (pair + 1))]
        out.append(np.where((x >> pair) & 1, e, 0).astype(np.int64))
    return out


def dif_group_exponents(N: int, first: int, m: int) -> list[np.ndarray]:
    """Output-side psi-exponents for the m levels of one radix-2^m DIF stage.

    The stage works on blocks of size B = N / 2^(first-1).  It applies
    small-order internal factors after its first m-1 levels and the general
    factor W_B^(n2 k1) once after its last level.
    """
    x = np.arange(N)
    B = N >> (first - 1)
    r = 1 << m
    loc = x % B
    top = loc // (B // r)          # brv_m(k1) once the stage is done
    n2 = loc % (B // r)
    out = []
    for l in range(1, m):
        b = r >> (l - 1)           # sub-DFT size at this level
        t = top % b
        j = t - b // 2
        # W_b^j = psi^(2 N j / b)
        out.append(np.where(t >= b // 2, (2 * N // b) * j, 0).astype(np.int64))
    k1 = brv_perm(r)[top]
    out.append(((2 * (N // B) * n2 * k1) % (2 * N)).astype(np.int64))
    return out


def dif_exponents(N: int, plan: Sequence[int]) -> list[np.ndarray]:
    out = []
    for first, m in _plan_groups(plan):
        out.extend(dif_group_exponents(N, first, m))
    return out


def merge_fold_check(N: int, plan) -> bool:
    """Try to push the psi^x pre-twist into the plan's twiddle points.

    Pending factors travel with the data.  A butterfly can absorb a ratio
    between its two inputs only if the plan has an input-side multiplier at
    that level (CT form); an output-side (DIF) level needs the two pending
    factors to be equal so the common factor commutes with the add/sub.
    Returns True when no standalone pre-twist pass is left.
    """
    n = _log2(N)
    if tuple(plan) == ("merged",):
        return True
    pend = np.arange(N) % (2 * N)
    for s in range(1, n + 1):
        d = 1 << (n - s)
        up = np.arange(N)[(np.arange(N) >> (n - s)) & 1 == 0]
        if not np.array_equal(pend[up], pend[up + d]):
            return False
    return True


@dataclass
class DataflowSchedule:
    P: int
    N: int
    plan: tuple
    merged: bool
    layouts: list
    delays: list           # commutator delay in cycles between level s and s+1
    fifo_words: list       # declared high-water words per commutator
    exponents: list        # per level psi-exponents (see twiddle_side)
    twiddle_side: str      # "input" (CT, merged) or "output" (DIF + pre-twist)
    latency: int = 4       # cycles per level: 3-cycle multiplier + 1 add/sub

    @property
    def levels(self) -> int:
        return len(self.layouts)

    @property
    def cycles(self) -> int:
        return self.N // self.P

    @property
    def stage_levels(self) -> list[tuple[int, int]]:
        if self.merged:
            return [(1, self.levels)]
        return _plan_groups(self.plan)

    @property
    def pipeline_depth(self) -> int:
        return self.levels * self.latency + sum(self.delays) + (0 if self.merged else self.latency)

    def dump(self) -> str:
        rows = ["stage,radix,levels,fifo_words,twiddle_order"]
        lvl_fifo = self.fifo_words + [0]
        for k, (first, m) in enumerate(self.stage_levels):
            words = sum(lvl_fifo[first - 1:first - 1 + m])
            order = ";".join(
                " ".join(str(v) for v in self.lane_exponents(s)[: min(4, self.cycles)].ravel()[:8])
                for s in range(first - 1, first - 1 + m))
            radix = self.N if self.merged else self.plan[k]
            rows.append(f"{k},{radix},{m},{words},{order}")
        return "\n".join(rows) + "\n"

    def lane_exponents(self, level: int) -> np.ndarray:
        """Twiddle exponents in consumption order, shape (cycles, P)."""
        lay = self.layouts[level]
        x = np.arange(self.N)
        c, ln = lay.place(x)
        grid = np.zeros((self.cycles, self.P), dtype=np.int64)
        grid[c, ln] = self.exponents[level]
        return grid


def build_dataflow_schedule(P: int, N: int, radix_plan="merged") -> DataflowSchedule:
    """MDC schedule for a radix plan, or the merged radix-2^n design.

    radix_plan is a tuple of stage radices (DIF stages with a separate
    pre-twist pass) or "merged" for the single consistent-pattern design
    whose every level carries one merged twiddle.
    """
    if P not in (2, 4, 8, 16):
        raise ParameterError("P must be 2, 4, 8 or 16")
    _log2(N)
    if N % P:
        raise ParameterError("P must divide N")
    merged = radix_plan == "merged" or radix_plan == ("merged",)
    if merged:
        plan = (N,)
        exps = merged_exponents(N)
    else:
        plan = tuple(int(r) for r in radix_plan)
        prod = 1
        for r in plan:
            prod *= r
        if prod != N or any(r < 2 or r & (r - 1) for r in plan):
            raise ParameterError(f"radix plan {plan} does not factor N={N}")
        exps = dif_exponents(N, plan)
    lays = _layouts(P, N)
    x = np.arange(N)
    delays, words = [], []
    for s in range(len(lays) - 1):
        ca, _ = lays[s].place(x)
        cb, _ = lays[s + 1].place(x)
        D = int(max(0, (ca - cb).max()))
        delays.append(D)
        # tokens wait from their producing cycle to consuming cycle + D
        a, b = ca, cb + D
        ev = np.zeros(N // P + D + 2, dtype=np.int64)
        np.add.at(ev, a, 1)
        np.add.at(ev, b, -1)
        words.append(int(np.cumsum(ev).max()))
    return DataflowSchedule(P, N, plan, merged, lays, delays, words, exps,
                            "input" if merged else "output")


# ---------------------------------------------------------------- OTF twiddles

def fit_level_seeds(sched: DataflowSchedule, level: int) -> list:
    """Per lane, geometric (base, step, hold, period) fit of the twiddle stream.

    Exponents are additive over the cycle-counter bits that carry twiddle
    information; the stream is geometric when those bits are contiguous and
    their contributions double.  Returns None for a lane that does not fit.
    """
    grid = sched.lane_exponents(level)
    C = sched.cycles
    two_n = 2 * sched.N
    out = []
    cbits = max(C.bit_length() - 1, 0)
    for lane in range(sched.P):
        col = grid[:, lane] % two_n
        base = int(col[0])
        deltas = [int((col[1 << j] - base) % two_n) for j in range(cbits)]
        active = [j for j, d in enumerate(deltas) if d]
        if not active:
            seed = LevelSeed(base, 0, 1, 1)
        else:
            j0, w = active[0], len(active)
            ok = active == list(range(j0, j0 + w)) and all(
                deltas[j0 + i] == (deltas[j0] << i) % two_n for i in range(w))
            seed = LevelSeed(base, deltas[j0], 1 << j0, 1 << w) if ok else None
        if seed is not None:
            c = np.arange(C)
            pred = (seed.base + seed.step * ((c // seed.hold) % seed.period)) % two_n
            if not np.array_equal(pred, col):
                seed = None
        out.append(seed)
    return out


class OtfGenerator:
    """Iterated-multiplication twiddle source: live state is (current, step)."""

    def __init__(self, seed: TwiddleSeed, ls: LevelSeed):
        self.q = seed.q
        self.base = seed.power(ls.base)
        self.step = seed.power(ls.step)
        self.hold, self.period = ls.hold, ls.period
        self.cur = self.base
        self.t = 0
        self.live_peak = 2

    def next(self) -> int:
        v = self.cur
        self.t += 1
        if self.t % self.hold == 0:
            if (self.t // self.hold) % self.period == 0:
                self.cur = self.base
            else:
                self.cur = self.cur * self.step % self.q
        return v


def otf_twiddle_stream(seeds: TwiddleSeed, schedule: DataflowSchedule,
                       stage: int) -> Iterator[int]:
    """Twiddles of one butterfly level in consumption order (cycle-major, lane-minor).

    Each lane's factor comes from its own (current, step) generator; lanes
    whose exponent is zero throughout emit 1 without a generator.
    """
    if not 0 <= stage < schedule.levels:
        raise ParameterError("stage out of range")
    lane_seeds = fit_level_seeds(schedule, stage)
    if any(s is None for s in lane_seeds):
        raise ParameterError(f"level {stage} twiddles are not a geometric stream")
    gens = [OtfGenerator(seeds, s) for s in lane_seeds]
    for _ in range(schedule.cycles):
        for g in gens:
            yield g.next()


def twiddle_table(seeds: TwiddleSeed, schedule: DataflowSchedule, stage: int) -> np.ndarray:
    """Direct-exponentiation oracle for otf_twiddle_stream."""
    grid = schedule.lane_exponents(stage)
    return np.array([seeds.power(int(e)) for e in grid.ravel()], dtype=object)


# ---------------------------------------------------------------- streaming

@dataclass
class StreamResult:
    output: np.ndarray         # transform in bit-reversed order
    fifo_high_water: list      # observed per commutator
    cycles: int                # first input to last output
    depth: int


def _mulmod(a: np.ndarray, b: np.ndarray, ctx: MontgomeryContext) -> np.ndarray:
    t = K.mont_mul_vec(np.ascontiguousarray(a, np.uint64), np.ascontiguousarray(b, np.uint64), ctx.kernel)
    return K.mont_mul_const(t, np.uint64(ctx.r2), ctx.kernel)


def stream_transform(limb, prime: NttFriendlyPrime, schedule: DataflowSchedule) -> StreamResult:
    """Token-flow simulation of one forward transform through the MDC.

    Every level consumes P tokens per cycle in its layout's order.  A token
    leaving level s becomes visible to level s+1 `latency` cycles later and
    sits in the commutator FIFO until its consuming cycle; consuming a token
    that has not arrived raises.  Twiddles are drawn from the OTF generators
    in consumption order.  Data are reordered only through the commutators.
    """
    P, N, C = schedule.P, schedule.N, schedule.cycles
    q = prime.q
    ctx = make_montgomery_context(prime)
    seeds = twiddle_seed(prime, N)
    n = schedule.levels
    x = np.arange(N)
    lat = schedule.latency
    # frame[c, lane] = token value; tag[c, lane] = index it represents
    c0, l0 = schedule.layouts[0].place(x)
    val = np.zeros((C, P), dtype=np.uint64)
    tag = np.zeros((C, P), dtype=np.int64)
    a = np.asarray(limb, dtype=np.uint64)
    val[c0, l0] = a
    tag[c0, l0] = x
    t_start = 0
    if not schedule.merged:
        # standalone pre-twist column: psi^x on every lane
        tw = np.array([seeds.power(int(v)) for v in tag.ravel()], dtype=np.uint64).reshape(C, P)
        val = _mulmod(val.ravel(), tw.ravel(), ctx).reshape(C, P)
        t_start = lat
    starts = [t_start]
    high = []
    for s in range(n):
        lay = schedule.layouts[s]
        pair = lay.lanes[-1]
        half = P // 2
        # lane index with pair bit clear/set (pair bit is the top lane bit)
        lo_l, hi_l = np.arange(half), np.arange(half) + half
        if not np.all((tag[:, hi_l] - tag[:, lo_l]) == (1 << pair)):
            raise RuntimeError(f"level {s}: lanes are not butterfly partners")
        if all(ls is not None for ls in fit_level_seeds(schedule, s)):
            gen = otf_twiddle_stream(seeds, schedule, s)
            tw = np.fromiter(gen, dtype=np.uint64, count=C * P).reshape(C, P)
        else:
            # no geometric pattern in this layout: read a stored table
            tw = twiddle_table(seeds, schedule, s).astype(np.uint64).reshape(C, P)
        u, v = val[:, lo_l].ravel(), val[:, hi_l].ravel()
        if schedule.twiddle_side == "input":
            v = _mulmod(v, tw[:, hi_l].ravel(), ctx)
        su = (u + v) % np.uint64(q)
        di = (u + np.uint64(q) - v) % np.uint64(q)
        out = np.empty_like(val)
        out[:, lo_l] = su.reshape(C, half)
        out[:, hi_l] = di.reshape(C, half)
        if schedule.twiddle_side == "output":
            out = _mulmod(out.ravel(), tw.ravel(), ctx).reshape(C, P)
        val = out
        if s == n - 1:
            break
        # commutator: route tokens into the next layout and check arrival
        nxt = schedule.layouts[s + 1]
        cn, ln = nxt.place(tag.ravel())
        ready = starts[-1] + lat + np.repeat(np.arange(C), P)
        t_next = starts[-1] + lat + schedule.delays[s]
        need = t_next + cn
        if np.any(need < ready):
            raise RuntimeError(f"commutator {s}: token consumed before it arrives")
        ev = np.zeros(int(need.max()) + 2, dtype=np.int64)
        np.add.at(ev, ready, 1)
        np.add.at(ev, need, -1)
        high.append(int(np.cumsum(ev).max()) if len(ev) else 0)
        nv = np.zeros_like(val)
        nt = np.zeros_like(tag)
        nv[cn, ln] = val.ravel()
        nt[cn, ln] = tag.ravel()
        val, tag = nv, nt
        starts.append(t_next)
    res = np.zeros(N, dtype=np.uint64)
    res[tag.ravel()] = val.ravel()
    end = starts[-1] + lat + C
    return StreamResult(res, high, end, end - C)
