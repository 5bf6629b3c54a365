"""Oracle-equivalence checks small enough to run anywhere (N <= 2^10)."""
from __future__ import annotations

import numpy as np

from .ckks_client.prng import Uniform, parse_seed, prng_expand
from .ckks_client.scheme import CkksParams, keygen, random_message, roundtrip_error
from .fourier import (RnsPolynomial, brv_perm, build_dataflow_schedule, negacyclic_polymul, ntt_limb, reference_transform, schoolbook_negacyclic,
                      stream_transform)
from .modarith import (RnsBasis, closed_form_valid, enumerate_ntt_friendly_primes,
                       make_montgomery_context, mont_mul_array, to_mont_array, from_mont_array)
from .redfloat import FP64, red_mul


def _check(name, fn, lines):
    try:
        ok = bool(fn())
        msg = ""
    except Exception as exc:  # report and keep going
        ok, msg = False, f" ({type(exc).__name__}: {exc})"
    lines.append(f"{'PASS' if ok else 'FAIL'} {name}{msg}")
    return ok


def run_selftest(seed=0) -> tuple[bool, list[str]]:
    seed = parse_seed(seed)
    lines: list[str] = []
    primes = enumerate_ntt_friendly_primes(30, 36, 10)[:3]

    def ntt_vs_oracle():
        for N in (16, 64, 256, 1024):
            for i, p in enumerate(primes):
                a = prng_expand(seed, b"st/ntt/%d/%d" % (N, i), N, Uniform(p.q))
                ref = reference_transform(a, p, "forward")
                fwd = ntt_limb(a, p, "forward")
                if not np.array_equal(fwd, ref[brv_perm(N)]):
                    return False
                if not np.array_equal(ntt_limb(fwd, p, "inverse"), a):
                    return False
        return True

    def polymul_vs_schoolbook():
        N = 64
        basis = RnsBasis(tuple(primes))
        a = RnsPolynomial(basis, [prng_expand(seed, b"st/a/%d" % i, N, Uniform(p.q))
                                  for i, p in enumerate(primes)])
        b = RnsPolynomial(basis, [prng_expand(seed, b"st/b/%d" % i, N, Uniform(p.q))
                                  for i, p in enumerate(primes)])
        c = negacyclic_polymul(a, b)
        return all(np.array_equal(c.limbs[i], schoolbook_negacyclic(a.limbs[i], b.limbs[i], p.q))
                   for i, p in enumerate(primes))

    def montgomery_vs_bigint():
        for i, p in enumerate(primes):
            ctx = make_montgomery_context(p)
            x = prng_expand(seed, b"st/mx/%d" % i, 4096, Uniform(p.q))
            y = prng_expand(seed, b"st/my/%d" % i, 4096, Uniform(p.q))
            got = from_mont_array(ctx, mont_mul_array(ctx, to_mont_array(ctx, x), to_mont_array(ctx, y)))
            want = np.array([int(a) * int(b) % p.q for a, b in zip(x, y)], dtype=np.uint64)
            if not np.array_equal(got, want) or not closed_form_valid(p):
                return False
        return True

    def streaming_vs_batch():
        p = primes[0]
        for P, N in ((2, 8), (4, 64), (8, 256), (16, 1024)):
            a = prng_expand(seed, b"st/s/%d" % N, N, Uniform(p.q))
            r = stream_transform(a, p, build_dataflow_schedule(P, N))
            if not np.array_equal(r.output, ntt_limb(a, p, "forward")):
                return False
        return True

    def ckks_roundtrip():
        params = CkksParams(log_n=10, levels=4)
        km = keygen(params, seed)
        z = random_message(params, seed)
        from .ckks_client.scheme import noise_bound
        return roundtrip_error(z, params, km, seed) <= noise_bound(params, km.hamming_weight)

    def redfloat_identity():
        rng = np.random.default_rng(int.from_bytes(seed[:8], "little"))
        a, b = rng.normal(size=4096), rng.normal(size=4096)
        return np.array_equal(red_mul(a, b, FP64), a * b)

    ok = True
    for name, fn in (("ntt equals direct transform, inverse restores input", ntt_vs_oracle),
                     ("negacyclic product equals schoolbook", polymul_vs_schoolbook),
                     ("shift-add Montgomery equals big-int product", montgomery_vs_bigint),
                     ("MDC streaming equals batch transform", streaming_vs_batch),
                     ("ckks roundtrip within the noise bound", ckks_roundtrip),
                     ("52-bit mantissa matches native doubles", redfloat_identity)):
        ok &= _check(name, fn, lines)
    return ok, lines
