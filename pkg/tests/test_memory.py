import pytest

from clientfhe.ckks_client.memory import memory_accountant, twiddle_reduction
from clientfhe.ckks_client.scheme import CkksParams
from clientfhe.errors import ParameterError

P = CkksParams()


def test_reference_values():
    acc = memory_accountant(P, coeff_bits=44)
    assert acc == dict(public_key=17301504, masks_errors=8650752, twiddles=8650752, seeds=0)
    otf = memory_accountant(P, {"twiddles": True}, coeff_bits=44)
    assert otf["twiddles"] == 0 and otf["seeds"] == 27648
    both = memory_accountant(P, {"twiddles": True, "randoms": True}, coeff_bits=44)
    assert both["public_key"] == both["masks_errors"] == 0
    assert both["seeds"] == 27648 + 16
    assert 0.996 <= twiddle_reduction(P) < 0.999


def test_zero_levels():
    assert all(v == 0 for v in memory_accountant(P, {"twiddles": True}, levels=0).values())


@pytest.mark.parametrize("onchip", [{}, {"twiddles": True}])
def test_linear_in_levels_and_n(onchip):
    a = memory_accountant(P, onchip, levels=6)
    b = memory_accountant(P, onchip, levels=12)
    assert all(b[k] == 2 * a[k] for k in a)
    small = memory_accountant(CkksParams(log_n=15), onchip)
    big = memory_accountant(CkksParams(log_n=16), onchip)
    for k in ("public_key", "masks_errors", "twiddles"):
        assert big[k] == 2 * small[k]


def test_bad_flags():
    with pytest.raises(ParameterError):
        memory_accountant(P, {"keys": True})
    with pytest.raises(ParameterError):
        memory_accountant(P, levels=-1)
