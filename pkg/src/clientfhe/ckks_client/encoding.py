"""Canonical embedding in reduced-precision arithmetic.

Slot j holds m(zeta^(5^j)) with zeta = exp(i*pi/N).  Evaluating a real
polynomial at all odd powers of zeta is a negacyclic complex transform, so
the same merged-twiddle structure as the NTT applies: Cooley-Tukey with
zeta^brv twiddles for evaluation (decode) and Gentleman-Sande with their
conjugates for interpolation (encode).  Every real operation goes through
redfloat, so the mantissa width of the datapath is a parameter.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import ParameterError
from ..fourier import _log2, brv_perm
from ..redfloat import (OpCounter, RedFloatFormat, red_add, red_mul, red_sub,
                        round_to_format)


@lru_cache(maxsize=32)
def slot_index(N: int) -> tuple:
    """Bit-reversed positions of the slots and of their conjugates."""
    _log2(N)
    if N < 4:
        raise ParameterError("N must be at least 4")
    half = N // 2
    g = np.empty(half, dtype=np.int64)
    g[0] = 1
    for j in range(1, half):
        g[j] = g[j - 1] * 5 % (2 * N)
    brv = brv_perm(N)
    pos = brv[(g - 1) // 2]
    conj = brv[(2 * N - g - 1) // 2]
    for a in (pos, conj):
        a.flags.writeable = False
    return pos, conj


@lru_cache(maxsize=64)
def _roots(N: int, mbits: int) -> tuple:
    """zeta^brv(k) for k < N, real and imaginary parts rounded to the format."""
    fmt = RedFloatFormat(mbits)
    k = brv_perm(N).astype(np.float64)
    ang = np.pi * k / N
    re = round_to_format(np.cos(ang), fmt)
    im = round_to_format(np.sin(ang), fmt)
    re.flags.writeable = False
    im.flags.writeable = False
    return re, im


def _cmul(ar, ai, br, bi, fmt, c):
    ac = red_mul(ar, br, fmt, c)
    bd = red_mul(ai, bi, fmt, c)
    ad = red_mul(ar, bi, fmt, c)
    bc = red_mul(ai, br, fmt, c)
    return red_sub(ac, bd, fmt, c), red_add(ad, bc, fmt, c)


def embed_forward(re, im, fmt: RedFloatFormat, counter: OpCounter | None = None):
    """Evaluate at zeta^(2 brv(t) + 1): natural coefficients in, bit-reversed values out."""
    xr = np.array(re, dtype=np.float64)
    xi = np.array(im, dtype=np.float64)
    N = xr.size
    wr, wi = _roots(N, fmt.mantissa_bits)
    m, t = 1, N
    while m < N:
        t >>= 1
        ar, ai = xr.reshape(m, 2, t), xi.reshape(m, 2, t)
        w_r, w_i = wr[m:2 * m, None], wi[m:2 * m, None]
        vr, vi = _cmul(ar[:, 1], ai[:, 1], w_r, w_i, fmt, counter)
        ur, ui = ar[:, 0].copy(), ai[:, 0].copy()
        ar[:, 0] = red_add(ur, vr, fmt, counter)
        ai[:, 0] = red_add(ui, vi, fmt, counter)
        ar[:, 1] = red_sub(ur, vr, fmt, counter)
        ai[:, 1] = red_sub(ui, vi, fmt, counter)
        m <<= 1
    return xr, xi


def embed_inverse(re, im, fmt: RedFloatFormat, counter: OpCounter | None = None):
    """Interpolate from bit-reversed values; returns N times the coefficients."""
    xr = np.array(re, dtype=np.float64)
    xi = np.array(im, dtype=np.float64)
    N = xr.size
    wr, wi = _roots(N, fmt.mantissa_bits)
    m, t = N, 1
    while m > 1:
        h = m >> 1
        ar, ai = xr.reshape(h, 2, t), xi.reshape(h, 2, t)
        w_r, w_i = wr[h:2 * h, None], -wi[h:2 * h, None]
        ur, ui = ar[:, 0].copy(), ai[:, 0].copy()
        vr, vi = ar[:, 1].copy(), ai[:, 1].copy()
        ar[:, 0] = red_add(ur, vr, fmt, counter)
        ai[:, 0] = red_add(ui, vi, fmt, counter)
        dr = red_sub(ur, vr, fmt, counter)
        di = red_sub(ui, vi, fmt, counter)
        ar[:, 1], ai[:, 1] = _cmul(dr, di, w_r, w_i, fmt, counter)
        t <<= 1
        m = h
    return xr, xi


def slots_to_coeffs(slots, N: int, fmt: RedFloatFormat, scale: float = 1.0) -> np.ndarray:
    """Real coefficients c with c(zeta^(5^j)) = scale * slots[j] (before integer rounding)."""
    z = np.asarray(slots, dtype=np.complex128)
    if z.shape != (N // 2,):
        raise ParameterError(f"expected {N // 2} slots, got {z.shape}")
    pos, conj = slot_index(N)
    vr = np.zeros(N)
    vi = np.zeros(N)
    zr = round_to_format(z.real, fmt)
    zi = round_to_format(z.imag, fmt)
    vr[pos], vi[pos] = zr, zi
    vr[conj], vi[conj] = zr, -zi
    cr, _ = embed_inverse(vr, vi, fmt)
    return red_mul(cr, round_to_format(scale / N, fmt), fmt)


def coeffs_to_slots(coeffs, fmt: RedFloatFormat, inv_scale: float = 1.0) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64)
    N = c.size
    c = red_mul(round_to_format(c, fmt), round_to_format(inv_scale, fmt), fmt)
    vr, vi = embed_forward(c, np.zeros(N), fmt)
    pos, _ = slot_index(N)
    return vr[pos] + 1j * vi[pos]


def direct_embedding_inverse(slots, N: int) -> np.ndarray:
    """O(N^2) reference: c_k = (2/N) Re sum_j z_j zeta^(-5^j k)."""
    z = np.asarray(slots, dtype=np.complex128)
    g = np.array([pow(5, j, 2 * N) for j in range(N // 2)])
    k = np.arange(N)
    E = np.exp(-1j * np.pi * np.outer(g, k) / N)
    return 2.0 / N * (z @ E).real


def direct_embedding_forward(coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64)
    N = c.size
    g = np.array([pow(5, j, 2 * N) for j in range(N // 2)])
    E = np.exp(1j * np.pi * np.outer(g, np.arange(N)) / N)
    return E @ c
