"""External-memory footprint of the client workload per category."""
from __future__ import annotations

from ..errors import ParameterError

CATEGORIES = ("public_key", "masks_errors", "twiddles", "seeds")
PRNG_SEED_BYTES = 16


def twiddle_seed_words(log_n: int, lanes: int = 8) -> int:
    """Live OTF seed words per limb: a (base, step) pair per lane per butterfly level."""
    return 2 * lanes * log_n


def memory_accountant(params, onchip: dict | None = None, coeff_bits: int = 44,
                      lanes: int = 8, levels: int | None = None) -> dict:
    """Bytes per category for one encryption's operands.

    polynomials x levels x N x coeff_bits / 8, with 2 polynomials of public
    key and one polynomial-equivalent each of masks/errors and twiddles.
    On-chip twiddles replace the table by OTF seeds (prime-width words); on-chip
    randoms replace keys and masks/errors by the 128-bit PRNG seed.
    """
    onchip = dict(onchip or {})
    unknown = set(onchip) - {"twiddles", "randoms"}
    if unknown:
        raise ParameterError(f"unknown on-chip flags {sorted(unknown)}")
    if coeff_bits <= 0 or lanes <= 0:
        raise ParameterError("coeff_bits and lanes must be positive")
    N = params.N
    L = params.levels if levels is None else levels
    if L < 0:
        raise ParameterError("levels must be non-negative")
    poly = L * N * coeff_bits // 8
    out = dict(public_key=2 * poly, masks_errors=poly, twiddles=poly, seeds=0)
    if L == 0:
        return out
    if onchip.get("twiddles"):
        out["twiddles"] = 0
        out["seeds"] += L * twiddle_seed_words(params.log_n, lanes) * params.prime_bits // 8
    if onchip.get("randoms"):
        out["public_key"] = 0
        out["masks_errors"] = 0
        out["seeds"] += PRNG_SEED_BYTES
    return out


def twiddle_reduction(params, coeff_bits: int = 44, lanes: int = 8) -> float:
    base = memory_accountant(params, {}, coeff_bits, lanes)
    otf = memory_accountant(params, {"twiddles": True}, coeff_bits, lanes)
    return 1 - (otf["twiddles"] + otf["seeds"]) / base["twiddles"]
