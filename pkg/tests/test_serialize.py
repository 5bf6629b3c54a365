import numpy as np
import pytest

from clientfhe.ckks_client.scheme import CkksParams, encode, encrypt, keygen, random_message
from clientfhe.ckks_client.serialize import (dump_ciphertext, dump_keys, dump_plaintext, load,
                                             load_message, params_from_text, params_to_text,
                                             save_message)
from clientfhe.errors import ConfigError, ParameterError

P = CkksParams(log_n=9, levels=3)


@pytest.fixture(scope="module")
def objects():
    km = keygen(P, 1)
    pt = encode(random_message(P, 2), P)
    return km, pt, encrypt(pt, km, 3)


def test_roundtrip_byte_identical(objects):
    km, pt, ct = objects
    for dump, obj in ((dump_keys, km), (dump_plaintext, pt), (dump_ciphertext, ct)):
        data = dump(obj)
        assert dump(load(data)) == data
    k2 = load(dump_keys(km))
    assert k2.seed == km.seed and np.array_equal(k2.sk_coeffs, km.sk_coeffs)
    c2 = load(dump_ciphertext(ct))
    assert c2.c0.same_as(ct.c0) and c2.scale == ct.scale and c2.level == ct.level


def test_header_layout(objects):
    data = dump_ciphertext(objects[2])
    assert data[:4] == b"CFHE"
    assert int.from_bytes(data[4:6], "little") == 1
    N, L = P.N, P.levels
    assert len(data) == 4 + 2 + 1 + 1 + 2 + 2 + 2 + 8 + 8 + 8 * L + 2 * (2 + 8 * L * N)


def test_malformed(objects):
    data = dump_plaintext(objects[1])
    for bad in (b"", b"XXXX" + data[4:], data[:-8], data + b"\0",
                data[:4] + b"\x09\x00" + data[6:]):
        with pytest.raises(ParameterError):
            load(bad)


def test_params_text():
    p = CkksParams(log_n=12, levels=5, scale=2.0**30)
    assert params_from_text(params_to_text(p)) == p
    assert params_from_text("log_n = 12\nscale=2^30  # comment\nlevels=5\n") == p
    for bad in ("log_n", "bogus=1", "log_n=x", "levels=2.5"):
        with pytest.raises(ConfigError):
            params_from_text(bad)


def test_message_files(tmp_path):
    z = random_message(P, 4)
    for name in ("m.csv", "m.bin"):
        save_message(tmp_path / name, z)
        assert np.array_equal(load_message(tmp_path / name), z)
    (tmp_path / "bad.csv").write_text("re,im\n1,2,3\n")
    with pytest.raises(ConfigError):
        load_message(tmp_path / "bad.csv")
