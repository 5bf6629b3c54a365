"""Versioned little-endian containers for keys, plaintexts and ciphertexts,
and the key=value parameter file."""
from __future__ import annotations

import struct

import numpy as np

from ..errors import ConfigError, ParameterError
from ..fourier import RnsPolynomial
from ..modarith import RnsBasis
from .scheme import Ciphertext, CkksParams, KeyMaterial, Plaintext

MAGIC = b"CFHE"
VERSION = 1
KINDS = {"keys": 1, "plaintext": 2, "ciphertext": 3}
_DOMAIN = {"coeff": 0, "ntt": 1}
_ORDER = {"natural": 0, "bitrev": 1}
# magic, version, kind, log_n, limbs, level, polys, scale, sigma
_HEAD = struct.Struct("<4sHBBHHHdd")


def _header(kind: str, basis: RnsBasis, N: int, level: int, polys: int,
            scale: float, sigma: float) -> bytes:
    h = _HEAD.pack(MAGIC, VERSION, KINDS[kind], N.bit_length() - 1, len(basis),
                   level, polys, scale, sigma)
    return h + np.array(basis.moduli, dtype="<u8").tobytes()


def _poly_bytes(p: RnsPolynomial) -> bytes:
    flags = struct.pack("<BB", _DOMAIN[p.domain], _ORDER[p.ordering])
    return flags + b"".join(np.asarray(l, dtype="<u8").tobytes() for l in p.limbs)


def _container(kind, polys, level, scale, sigma=0.0, extra=b"") -> bytes:
    basis, N = polys[0].basis, polys[0].degree
    return (_header(kind, basis, N, level, len(polys), scale, sigma) + extra
            + b"".join(_poly_bytes(p) for p in polys))


def dump_keys(km: KeyMaterial) -> bytes:
    extra = km.seed + km.sk_coeffs.astype("<i1").tobytes()
    return _container("keys", [km.sk, km.pk0, km.pk1], km.level, 0.0, km.sigma, extra)


def dump_plaintext(pt: Plaintext) -> bytes:
    return _container("plaintext", [pt.poly], pt.level, pt.scale)


def dump_ciphertext(ct: Ciphertext) -> bytes:
    return _container("ciphertext", [ct.c0, ct.c1], ct.level, ct.scale)


def _basis_for(moduli, log_n) -> RnsBasis:
    from ..modarith import witness_for, NttFriendlyPrime
    primes = []
    for q in moduli:
        w = witness_for(int(q), log_n)
        if w is None:
            raise ParameterError(f"modulus {q} is not a sparse NTT-friendly prime")
        primes.append(NttFriendlyPrime(int(q), w[0], log_n, w[1]))
    return RnsBasis(tuple(primes))


def load(data: bytes):
    """Parse any container; returns a KeyMaterial, Plaintext or Ciphertext."""
    try:
        return _load(data)
    except (struct.error, ValueError, KeyError) as exc:
        raise ParameterError(f"malformed container ({exc})") from exc


def _load(data: bytes):
    if len(data) < _HEAD.size or data[:4] != MAGIC:
        raise ParameterError("not a container (bad magic)")
    magic, ver, kind, log_n, L, level, polys, scale, sigma = _HEAD.unpack_from(data, 0)
    if ver != VERSION:
        raise ParameterError(f"unsupported container version {ver}")
    off = _HEAD.size
    moduli = np.frombuffer(data, dtype="<u8", count=L, offset=off)
    off += 8 * L
    basis = _basis_for(moduli.tolist(), log_n)
    N = 1 << log_n
    extra = b""
    if kind == KINDS["keys"]:
        extra = data[off:off + 16 + N]
        off += 16 + N
    out = []
    dom = {v: k for k, v in _DOMAIN.items()}
    order = {v: k for k, v in _ORDER.items()}
    for _ in range(polys):
        d, o = struct.unpack_from("<BB", data, off)
        off += 2
        limbs = []
        for _ in range(L):
            limbs.append(np.frombuffer(data, dtype="<u8", count=N, offset=off).astype(np.uint64))
            off += 8 * N
        out.append(RnsPolynomial(basis, limbs, dom[d], order[o]))
    if off != len(data):
        raise ParameterError("trailing bytes in container")
    if kind == KINDS["keys"]:
        sk_coeffs = np.frombuffer(extra, dtype="<i1", offset=16).astype(np.int8)
        return KeyMaterial(bytes(extra[:16]), sk_coeffs, out[0], out[1], out[2], sigma)
    if kind == KINDS["plaintext"]:
        return Plaintext(out[0], scale, level)
    if kind == KINDS["ciphertext"]:
        return Ciphertext(out[0], out[1], scale, level)
    raise ParameterError(f"unknown container kind {kind}")


# ---------------------------------------------------------------- params file

_PARAM_KEYS = {"log_n": int, "prime_bits": int, "levels": int, "scale": float,
               "sigma": float, "decrypt_levels": int}


def _number(v: str) -> float:
    v = v.strip()
    if "^" in v:
        b, e = v.split("^", 1)
        return float(b) ** float(e)
    return float(v)


def parse_kv(text: str) -> dict:
    """key=value lines; '#' starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def params_from_text(text: str) -> CkksParams:
    kv = parse_kv(text)
    bad = set(kv) - set(_PARAM_KEYS)
    if bad:
        raise ConfigError(f"unknown parameter keys {sorted(bad)}")
    args = {}
    for k, v in kv.items():
        try:
            x = _number(v)
        except ValueError as exc:
            raise ConfigError(f"{k}: not a number: {v!r}") from exc
        if _PARAM_KEYS[k] is int:
            if x != int(x):
                raise ConfigError(f"{k} must be an integer")
            x = int(x)
        args[k] = x
    return CkksParams(**args)


def params_to_text(p: CkksParams) -> str:
    return "".join(f"{k}={getattr(p, k)!r}\n" for k in _PARAM_KEYS)


# ---------------------------------------------------------------- message files

def save_message(path: str, z) -> None:
    z = np.asarray(z, dtype=np.complex128)
    if str(path).endswith(".csv"):
        with open(path, "w") as f:
            f.write(message_to_csv(z))
    else:
        np.stack([z.real, z.imag], axis=1).astype("<f8").tofile(path)


def message_to_csv(z, header: str = "") -> str:
    z = np.asarray(z, dtype=np.complex128)
    return header + "re,im\n" + "".join(f"{float(v.real)!r},{float(v.imag)!r}\n" for v in z)


def load_message(path: str) -> np.ndarray:
    try:
        if str(path).endswith(".csv"):
            with open(path) as f:
                lines = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
            if lines and lines[0].replace(" ", "").lower() == "re,im":
                lines = lines[1:]
            rows = np.array([[float(x) for x in ln.split(",")] for ln in lines]).reshape(len(lines), -1)
        else:
            rows = np.fromfile(path, dtype="<f8").reshape(-1, 2)
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed message file ({exc})") from exc
    if rows.ndim != 2 or rows.shape[1] != 2:
        raise ConfigError(f"{path}: expected two columns re,im")
    return rows[:, 0] + 1j * rows[:, 1]
