"""Reduced-mantissa binary floating point on top of float64.

Values are ordinary float64 numbers whose low (52 - m) mantissa bits are
zero.  Each operation is computed in double precision and then rounded once
to m bits, round-to-nearest-even.  The exponent field stays 11 bits wide;
results below the smallest normal flush to signed zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

_MIN_NORMAL = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class RedFloatFormat:
    mantissa_bits: int = 43
    exponent_bits: int = 11

    def __post_init__(self):
        if not 10 <= self.mantissa_bits <= 52:
            raise ParameterError("mantissa_bits must lie in [10, 52]")
        if self.exponent_bits != 11:
            raise ParameterError("only the 11-bit exponent is supported")

    @property
    def width(self) -> int:
        return 1 + self.exponent_bits + self.mantissa_bits


FP55 = RedFloatFormat(43)
FP64 = RedFloatFormat(52)


@dataclass
class OpCounter:
    mul: int = 0
    add: int = 0
    overflow: bool = False


def round_to_format(x, fmt: RedFloatFormat, counter: OpCounter | None = None):
    """Round float64 value(s) to fmt.  Returns the same shape (scalar or array)."""
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    a = np.atleast_1d(arr).copy()
    drop = 52 - fmt.mantissa_bits
    if drop:
        bits = a.view(np.uint64)
        lsb = (bits >> np.uint64(drop)) & np.uint64(1)
        half = np.uint64((1 << (drop - 1)) - 1)
        mask = np.uint64(~((1 << drop) - 1) & 0xFFFFFFFFFFFFFFFF)
        finite = np.isfinite(a)
        rounded = ((bits + half + lsb) & mask)
        bits[finite] = rounded[finite]
    tiny = np.abs(a) < _MIN_NORMAL
    if tiny.any():
        a[tiny] = np.copysign(0.0, a[tiny])
    if counter is not None and np.any(np.isinf(a) & np.isfinite(np.atleast_1d(arr))):
        counter.overflow = True
    return a[0] if scalar else a


def overflowed(x, result) -> bool:
    return bool(np.any(np.isinf(result) & np.isfinite(x)))


def _finish(a, b, raw, fmt, counter):
    r = round_to_format(raw, fmt, counter)
    if counter is not None and not counter.overflow:
        counter.overflow = bool(np.any(np.isinf(r) & np.isfinite(a) & np.isfinite(b)))
    return r


def red_add(a, b, fmt: RedFloatFormat, counter: OpCounter | None = None):
    if counter is not None:
        counter.add += np.size(a) if np.ndim(a) else 1
    with np.errstate(over="ignore", invalid="ignore"):
        return _finish(a, b, np.add(a, b), fmt, counter)


def red_sub(a, b, fmt: RedFloatFormat, counter: OpCounter | None = None):
    if counter is not None:
        counter.add += np.size(a) if np.ndim(a) else 1
    with np.errstate(over="ignore", invalid="ignore"):
        return _finish(a, b, np.subtract(a, b), fmt, counter)


def red_mul(a, b, fmt: RedFloatFormat, counter: OpCounter | None = None):
    if counter is not None:
        counter.mul += np.size(a) if np.ndim(a) else 1
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        return _finish(a, b, np.multiply(a, b), fmt, counter)


@dataclass
class RedComplex:
    re: np.ndarray
    im: np.ndarray
    fmt: RedFloatFormat = field(default=FP55)

    @classmethod
    def from_complex(cls, z, fmt: RedFloatFormat) -> "RedComplex":
        z = np.asarray(z, dtype=np.complex128)
        return cls(round_to_format(z.real, fmt), round_to_format(z.imag, fmt), fmt)

    def to_complex(self) -> np.ndarray:
        return np.asarray(self.re) + 1j * np.asarray(self.im)


def red_complex_mul(a: RedComplex, b: RedComplex, counter: OpCounter | None = None) -> RedComplex:
    """(ac - bd) + i(ad + bc): four real products, two real sums."""
    if a.fmt != b.fmt:
        raise ParameterError("operand formats differ")
    f = a.fmt
    ac = red_mul(a.re, b.re, f, counter)
    bd = red_mul(a.im, b.im, f, counter)
    ad = red_mul(a.re, b.im, f, counter)
    bc = red_mul(a.im, b.re, f, counter)
    return RedComplex(red_sub(ac, bd, f, counter), red_add(ad, bc, f, counter), f)


def red_complex_add(a: RedComplex, b: RedComplex, counter: OpCounter | None = None) -> RedComplex:
    f = a.fmt
    return RedComplex(red_add(a.re, b.re, f, counter), red_add(a.im, b.im, f, counter), f)


def red_complex_sub(a: RedComplex, b: RedComplex, counter: OpCounter | None = None) -> RedComplex:
    f = a.fmt
    return RedComplex(red_sub(a.re, b.re, f, counter), red_sub(a.im, b.im, f, counter), f)
