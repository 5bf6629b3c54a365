"""CKKS client side: seeded sampling, encoding, encryption, memory accounting."""
from .prng import Gaussian, Ternary, Uniform, parse_seed, prng_expand
from .encoding import coeffs_to_slots, slots_to_coeffs
from .scheme import (Ciphertext, CkksParams, KeyMaterial, Plaintext, ct_add, decode,
                     decrypt, encode, encrypt, keygen, noise_bound, random_message,
                     roundtrip_error, roundtrip_precision_sweep, server_return,
                     sweep_to_csv)
from .memory import memory_accountant, twiddle_reduction
from .serialize import (dump_ciphertext, dump_keys, dump_plaintext, load,
                        params_from_text, params_to_text)

__all__ = ["Gaussian", "Ternary", "Uniform", "parse_seed", "prng_expand", "coeffs_to_slots",
           "slots_to_coeffs", "Ciphertext", "CkksParams", "KeyMaterial", "Plaintext", "ct_add",
           "decode", "decrypt", "encode", "encrypt", "keygen", "noise_bound", "random_message",
           "roundtrip_error", "roundtrip_precision_sweep", "server_return", "sweep_to_csv",
           "memory_accountant", "twiddle_reduction", "dump_ciphertext", "dump_keys",
           "dump_plaintext", "load", "params_from_text", "params_to_text"]
