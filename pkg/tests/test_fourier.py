import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clientfhe.ckks_client.prng import Uniform, prng_expand
from clientfhe.errors import ParameterError
from clientfhe.fourier import (BITREV, COEFF, NATURAL, NTT, LevelSeed, OtfGenerator, RnsPolynomial,
                               brv_perm, build_dataflow_schedule, fit_level_seeds, negacyclic_ntt,
                               negacyclic_polymul, ntt_limb, ntt_tables, otf_twiddle_stream,
                               radix_plans, reference_transform, stream_transform, twiddle_seed,
                               twiddle_table)
from clientfhe.modarith import RnsBasis, enumerate_ntt_friendly_primes

PRIMES = enumerate_ntt_friendly_primes(30, 36, 12)[:4]
SEED = bytes(16)


def rand(N, q, tag=b"x"):
    return prng_expand(SEED, b"fourier/" + tag + b"/%d" % N, N, Uniform(q))


def poly(N, primes, tag=b"p"):
    b = RnsBasis(tuple(primes))
    return RnsPolynomial(b, [rand(N, p.q, tag + b"%d" % i) for i, p in enumerate(primes)])


def test_reference_delta_and_zero():
    p = PRIMES[0]
    d = np.zeros(16, dtype=np.uint64)
    d[0] = 1
    assert reference_transform(d, p).tolist() == [1] * 16
    assert not reference_transform(np.zeros(16, dtype=np.uint64), p).any()
    a = rand(16, p.q)
    assert np.array_equal(reference_transform(reference_transform(a, p), p, "inverse"), a)


@pytest.mark.parametrize("log_n", range(4, 13))
def test_ntt_matches_reference_all_sizes(log_n):
    N = 1 << log_n
    p = PRIMES[log_n % len(PRIMES)]
    a = rand(N, p.q)
    assert np.array_equal(ntt_limb(a, p)[np.argsort(brv_perm(N))], reference_transform(a, p))


def test_roundtrip_all_orderings():
    a = poly(256, PRIMES[:2])
    for order in (NATURAL, BITREV):
        A = negacyclic_ntt(a, "forward", order)
        assert A.domain == NTT and A.ordering == order
        assert negacyclic_ntt(A, "inverse").same_as(a)
        # inverse then forward on an NTT-domain polynomial
        back = negacyclic_ntt(negacyclic_ntt(A, "inverse"), "forward", order)
        assert back.same_as(A)
    with pytest.raises(ParameterError):
        negacyclic_ntt(a, "inverse")
    with pytest.raises(ParameterError):
        negacyclic_ntt(negacyclic_ntt(a), "forward")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**36), st.integers(0, 1000))
def test_linearity(alpha, tag):
    p = PRIMES[1]
    a, b = rand(64, p.q, b"a%d" % tag), rand(64, p.q, b"b%d" % tag)
    alpha %= p.q
    lhs = ntt_limb(np.array([(alpha * int(x) + int(y)) % p.q for x, y in zip(a, b)],
                            dtype=np.uint64), p)
    A, B = ntt_limb(a, p), ntt_limb(b, p)
    rhs = np.array([(alpha * int(x) + int(y)) % p.q for x, y in zip(A, B)], dtype=np.uint64)
    assert np.array_equal(lhs, rhs)


def test_polymul_identity_and_wraparound():
    N = 64
    b = RnsBasis(tuple(PRIMES[:2]))
    a = poly(N, PRIMES[:2])
    one = RnsPolynomial(b, [np.eye(1, N, 0, dtype=np.uint64)[0] for _ in range(2)])
    assert negacyclic_polymul(a, one).same_as(a)
    xn1 = RnsPolynomial(b, [np.eye(1, N, N - 1, dtype=np.uint64)[0] for _ in range(2)])
    x = RnsPolynomial(b, [np.eye(1, N, 1, dtype=np.uint64)[0] for _ in range(2)])
    c = negacyclic_polymul(xn1, x)
    for limb, q in zip(c.limbs, b.moduli):
        assert limb[0] == q - 1 and not limb[1:].any()


def test_polynomial_invariants():
    b = RnsBasis(tuple(PRIMES[:2]))
    with pytest.raises(ParameterError):
        RnsPolynomial(b, [np.zeros(8, np.uint64)])
    with pytest.raises(ParameterError):
        RnsPolynomial(b, [np.zeros(8, np.uint64), np.zeros(16, np.uint64)])
    bad = RnsPolynomial(b, [np.full(8, PRIMES[0].q, np.uint64), np.zeros(8, np.uint64)])
    with pytest.raises(ParameterError):
        bad.check_reduced()
    a = poly(16, PRIMES[:2])
    assert a.to_bitrev().to_natural().same_as(a)
    assert a.domain == COEFF


def test_psi_and_table_regeneration():
    for p in PRIMES:
        N = 1 << 10
        s = twiddle_seed(p, N)
        assert pow(s.psi, 2 * N, p.q) == 1
        assert pow(s.psi, N, p.q) == p.q - 1
        w = pow(s.psi, 2, p.q)
        assert pow(w, N, p.q) == 1 and pow(w, N // 2, p.q) != 1
        t = ntt_tables(p, N)
        R = t.ctx.R
        direct = [pow(s.psi, int(j), p.q) * R % p.q for j in brv_perm(N)]
        assert t.w.tolist() == direct


def test_otf_first_stage_matches_table():
    p = PRIMES[0]
    sched = build_dataflow_schedule(2, 8)
    seeds = twiddle_seed(p, 8)
    got = list(otf_twiddle_stream(seeds, sched, 0))
    assert got == twiddle_table(seeds, sched, 0).tolist()


def test_otf_full_stream_matches_table():
    p = PRIMES[0]
    for P, N in ((2, 8), (4, 64), (8, 1024)):
        sched = build_dataflow_schedule(P, N)
        seeds = twiddle_seed(p, N)
        for s in range(sched.levels):
            if all(ls is not None for ls in fit_level_seeds(sched, s)):
                assert list(otf_twiddle_stream(seeds, sched, s)) == \
                    twiddle_table(seeds, sched, s).tolist()


def test_otf_constant_and_state_bound():
    seeds = twiddle_seed(PRIMES[0], 16)
    g = OtfGenerator(seeds, LevelSeed(base=5, step=0, hold=1, period=8))
    vals = [g.next() for _ in range(32)]
    assert set(vals) == {seeds.power(5)}
    assert g.live_peak <= 2
    g = OtfGenerator(seeds, LevelSeed(base=1, step=2, hold=2, period=4))
    exps = [(1 + 2 * ((c // 2) % 4)) for c in range(16)]
    assert [g.next() for _ in range(16)] == [seeds.power(e) for e in exps]


def test_schedule_shapes():
    s = build_dataflow_schedule(8, 1 << 16)
    assert s.levels == 16
    assert s.fifo_words == [8 << i for i in range(13)] + [0, 0]
    assert s.P // 2 * s.levels == 64
    small = build_dataflow_schedule(2, 4, (2, 2))
    assert small.levels == 2
    p = PRIMES[0]
    a = rand(4, p.q)
    res = stream_transform(a, p, small)
    ref = reference_transform(a, p)
    assert np.array_equal(res.output, ref[brv_perm(4)])
    assert "stage,radix,levels,fifo_words,twiddle_order" in s.dump()
    with pytest.raises(ParameterError):
        build_dataflow_schedule(3, 16)
    with pytest.raises(ParameterError):
        build_dataflow_schedule(2, 16, (2, 4))


def test_fifo_words_match_occupancy_p2_n8():
    p = PRIMES[0]
    for plan in ["merged"] + radix_plans(3, 3):
        sched = build_dataflow_schedule(2, 8, plan)
        res = stream_transform(rand(8, p.q), p, sched)
        assert sum(res.fifo_high_water) == sum(sched.fifo_words)
        assert res.fifo_high_water == sched.fifo_words


def test_single_cycle_schedule_has_no_fifo():
    for P in (2, 4, 8, 16):
        s = build_dataflow_schedule(P, P)
        assert not any(s.fifo_words)
