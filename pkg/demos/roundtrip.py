"""Client-side CKKS roundtrip: encode, encrypt, trim to two limbs, decrypt, decode.

Run: python3 demos/roundtrip.py
"""
import math

import numpy as np

from clientfhe.ckks_client.scheme import (CkksParams, decode, decrypt, encode, encrypt, keygen,
                                          noise_bound, random_message, server_return)
from clientfhe.redfloat import RedFloatFormat

params = CkksParams(log_n=12, levels=6)
seed = bytes(range(16))
km = keygen(params, seed)
z = random_message(params, seed)
print(f"N={params.N}, slots={params.slots}, limbs={params.levels}, scale=2^{math.log2(params.scale):.0f}")

for m in (24, 32, 43, 52):
    fmt = RedFloatFormat(m)
    ct = encrypt(encode(z, params, fmt), km, bytes(15) + b"\x01")
    back = server_return(ct, params)  # what comes home: decrypt_levels limbs
    out = decode(decrypt(back, km), fmt)
    err = np.abs(out - z).max()
    print(f"  mantissa {m:2d} bits: max slot error 2^{math.log2(err):6.2f}")

print(f"noise bound 2^{math.log2(noise_bound(params)):.2f}")
