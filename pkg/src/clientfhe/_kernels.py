"""numba kernels for the hot paths: Montgomery products, butterflies, Garner CRT.

All residues are uint64 in [0, q) with q < 2^62.  A Montgomery context is
flattened into a uint64 parameter vector `mp` laid out as

    mp[0] q, mp[1] r, mp[2] 64 - r, mp[3] R - 1,
    mp[4:9] shift amounts, mp[9:14] signed coefficients (1, 2^64-1 or 0)

so the low-half product m = T * QInv mod R is a sum of shifted copies of T.
"""
import numpy as np
from numba import njit, uint64, int64

M32 = np.uint64(0xFFFFFFFF)
U32 = np.uint64(32)
MP_LEN = 14

_opts = dict(fastmath=True, error_model="numpy", boundscheck=False, cache=True)


@njit(inline="always", **_opts)
def mul_wide(x, y):
    """128-bit product of two uint64 as (hi, lo)."""
    a0 = x & M32
    a1 = x >> U32
    b0 = y & M32
    b1 = y >> U32
    p00 = a0 * b0
    p01 = a0 * b1
    p10 = a1 * b0
    p11 = a1 * b1
    mid = (p00 >> U32) + (p01 & M32) + (p10 & M32)
    lo = (p00 & M32) | (mid << U32)
    hi = p11 + (p01 >> U32) + (p10 >> U32) + (mid >> U32)
    return hi, lo


@njit(inline="always", **_opts)
def mont_reduce(thi, tlo, mp):
    q = mp[0]
    tl = tlo & mp[3]
    m = (mp[9] * (tl << mp[4]) + mp[10] * (tl << mp[5]) + mp[11] * (tl << mp[6])
         + mp[12] * (tl << mp[7]) + mp[13] * (tl << mp[8])) & mp[3]
    lhi, llo = mul_wide(m, q)
    borrow = uint64(1) if tlo < llo else uint64(0)
    dl = tlo - llo
    dh = thi - lhi - borrow
    t = int64((dh << mp[2]) | (dl >> mp[1]))
    t += int64(q) & (t >> 63)
    return uint64(t)


@njit(inline="always", **_opts)
def mont(x, y, mp):
    hi, lo = mul_wide(x, y)
    return mont_reduce(hi, lo, mp)


@njit(**_opts)
def mont_mul_vec(a, b, mp):
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        out[i] = mont(a[i], b[i], mp)
    return out


@njit(**_opts)
def mont_mul_const(a, c, mp):
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        out[i] = mont(a[i], c, mp)
    return out


@njit(**_opts)
def add_mod(a, b, q):
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        x = a[i] + b[i] - q
        out[i] = x + (q & uint64(int64(x) >> 63))
    return out


@njit(**_opts)
def sub_mod(a, b, q):
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        x = a[i] - b[i]
        out[i] = x + (q & uint64(int64(x) >> 63))
    return out


@njit(inline="always", **_opts)
def _ct_bfly(lo, hi, w, mp):
    q = mp[0]
    for j in range(lo.shape[0]):
        u = lo[j]
        v = mont(hi[j], w, mp)
        x = u + v - q
        lo[j] = x + (q & uint64(int64(x) >> 63))
        y = u - v
        hi[j] = y + (q & uint64(int64(y) >> 63))


@njit(inline="always", **_opts)
def _gs_bfly(lo, hi, w, mp):
    q = mp[0]
    for j in range(lo.shape[0]):
        u = lo[j]
        v = hi[j]
        x = u + v - q
        lo[j] = x + (q & uint64(int64(x) >> 63))
        y = u - v
        y = y + (q & uint64(int64(y) >> 63))
        hi[j] = mont(y, w, mp)


@njit(**_opts)
def ntt_ct_inplace(a, w, mp):
    """Merged forward NTT, natural in, bit-reversed out.

    w[m + i] holds psi^brv(m + i) in Montgomery form, so every butterfly
    multiplies by a single merged factor and there is no pre-twist pass.
    """
    n = a.shape[0]
    m = 1
    t = n
    while m < n:
        t >>= 1
        for i in range(m):
            j1 = 2 * i * t
            _ct_bfly(a[j1:j1 + t], a[j1 + t:j1 + 2 * t], w[m + i], mp)
        m <<= 1


@njit(**_opts)
def ntt_gs_inplace(a, winv, mp, ninv):
    """Merged inverse NTT, bit-reversed in, natural out, N^-1 applied last."""
    n = a.shape[0]
    t = 1
    m = n
    while m > 1:
        h = m >> 1
        for i in range(h):
            j1 = 2 * i * t
            _gs_bfly(a[j1:j1 + t], a[j1 + t:j1 + 2 * t], winv[h + i], mp)
        t <<= 1
        m = h
    for j in range(n):
        a[j] = mont(a[j], ninv, mp)


@njit(**_opts)
def garner_digits(res, mps, cinv):
    """Mixed-radix digits of the CRT lift.

    res: (L, n) residues; mps: (L, MP_LEN) contexts; cinv[i, j] (j < i) is
    q_j^-1 mod q_i in Montgomery form.  Returns digits v (L, n) with
    x = v_0 + v_1 q_0 + v_2 q_0 q_1 + ...
    """
    L, n = res.shape
    v = np.empty_like(res)
    for c in range(n):
        for i in range(L):
            qi = mps[i, 0]
            x = res[i, c] % qi
            for j in range(i):
                d = v[j, c] % qi
                x = x - d
                x = x + (qi & uint64(int64(x) >> 63))
                x = mont(x, cinv[i, j], mps[i])
            v[i, c] = x
    return v


@njit(**_opts)
def centered_float(v, qs_f, qs, half_digits):
    """Centered real value of each mixed-radix number.

    Compares digits against floor(Q/2) from the top.  Values above it are
    complemented digit-wise (Q - 1 - x, then + 1) so the float sum never
    subtracts two large magnitudes.
    """
    L, n = v.shape
    out = np.empty(n, dtype=np.float64)
    for c in range(n):
        neg = False
        for i in range(L - 1, -1, -1):
            if v[i, c] != half_digits[i]:
                neg = v[i, c] > half_digits[i]
                break
        acc = 0.0
        if neg:
            carry = uint64(1)
            comp = np.empty(L, dtype=np.uint64)
            for i in range(L):
                d = qs[i] - uint64(1) - v[i, c] + carry
                if d == qs[i]:
                    d = uint64(0)
                    carry = uint64(1)
                else:
                    carry = uint64(0)
                comp[i] = d
            # Horner from the most significant digit down
            for i in range(L - 1, -1, -1):
                acc = acc * qs_f[i] + float(comp[i])
            out[c] = -acc
        else:
            for i in range(L - 1, -1, -1):
                acc = acc * qs_f[i] + float(v[i, c])
            out[c] = acc
    return out
