import math
from dataclasses import replace

import pytest

from clientfhe.ckks_client.scheme import CkksParams
from clientfhe.errors import ConfigError, ConsistencyError
from clientfhe.streamsim import (SimConfig, WorkloadSpec, check_tiling, config_from_kv,
                                 fifo_report, fifo_to_csv, pipeline_depth, simulate,
                                 workload_from_kv)

CFG = SimConfig()
INF = replace(CFG, dram_bytes_per_sec=math.inf)


def test_empty_workload():
    rep = simulate(CFG, WorkloadSpec())
    assert rep.total_cycles == 0 and rep.ema_bytes_in == rep.ema_bytes_out == 0


def test_single_ntt_closed_form():
    N = CFG.params.N
    rep = simulate(CFG, WorkloadSpec(n_ntt=1))
    assert rep.compute_cycles == N // CFG.lanes + pipeline_depth(CFG) == 16447


def test_mixed_mode_imbalance():
    rep = simulate(CFG, WorkloadSpec(n_encrypt=1, n_decrypt=1))
    ratio = rep.path_cycles["encrypt"] / rep.path_cycles["decrypt"]
    assert 7 <= ratio <= 13
    assert rep.phase_cycles["ntt"] > 0 and rep.phase_cycles["intt"] > 0


def test_determinism_and_report_fields():
    wl = WorkloadSpec(n_encrypt=2, n_decrypt=3)
    a, b = simulate(CFG, wl), simulate(CFG, wl)
    assert a == b
    assert a.wall_seconds == pytest.approx(a.total_cycles / CFG.clock_hz)
    assert a.total_cycles >= a.compute_cycles
    d = a.to_json_dict()
    for k in ("total_cycles", "ema_by_category", "stall_cycles", "throughput_ct_per_sec"):
        assert k in d


@pytest.mark.parametrize("wl", [WorkloadSpec(4, 0), WorkloadSpec(0, 4), WorkloadSpec(3, 5)])
def test_conservation(wl):
    rep = simulate(CFG, wl)
    dram_cycles = (rep.ema_bytes_in + rep.ema_bytes_out) / CFG.bytes_per_cycle
    assert rep.total_cycles >= dram_cycles
    assert (rep.ema_bytes_in + rep.ema_bytes_out) / rep.wall_seconds <= CFG.dram_bytes_per_sec * (1 + 1e-9)
    N = CFG.params.N
    L, L2 = CFG.params.levels, CFG.params.decrypt_levels
    coeff_ops = wl.n_encrypt * (1 + 3 * L) * N + wl.n_decrypt * (L2 + 1) * N
    assert rep.total_cycles >= math.ceil(coeff_ops / (CFG.lanes * CFG.pnl_per_rsc * CFG.rsc_count))


def test_monotonicity():
    wl = WorkloadSpec(n_encrypt=2, n_decrypt=2)
    lat = [simulate(replace(CFG, dram_bytes_per_sec=bw), wl).total_cycles
           for bw in (17.1e9, 34.2e9, 68.4e9, 136.8e9, math.inf)]
    assert all(b <= a for a, b in zip(lat, lat[1:]))
    lat = [simulate(replace(CFG, lanes=P), wl).total_cycles for P in (2, 4, 8, 16)]
    assert all(b <= a for a, b in zip(lat, lat[1:]))
    base = replace(CFG, onchip_twiddles=False, onchip_randoms=False)
    ema = [simulate(replace(base, onchip_twiddles=t, onchip_randoms=r), wl)
           for t, r in ((False, False), (True, False), (True, True))]
    bytes_ = [e.ema_bytes_in + e.ema_bytes_out for e in ema]
    assert bytes_[0] >= bytes_[1] >= bytes_[2]


@pytest.mark.parametrize("mode,kind", [("dual_encrypt", "n_encrypt"), ("dual_decrypt", "n_decrypt")])
def test_mode_consistency(mode, kind):
    k = 3
    two = simulate(replace(INF, mode=mode), WorkloadSpec(**{kind: 2 * k}))
    one = simulate(replace(INF, mode=mode, rsc_count=1), WorkloadSpec(**{kind: k}))
    assert two.throughput_ct_per_sec == pytest.approx(2 * one.throughput_ct_per_sec, rel=1e-9)


def test_base_fetches_what_all_generates():
    base = replace(CFG, onchip_twiddles=False, onchip_randoms=False)
    rep = simulate(base, WorkloadSpec(n_encrypt=1))
    assert rep.ema_by_category["public_key"] > 0 and rep.ema_by_category["twiddles"] > 0
    rep = simulate(CFG, WorkloadSpec(n_encrypt=1))
    assert rep.ema_by_category["public_key"] == rep.ema_by_category["twiddles"] == 0


def test_config_validation():
    for kw in (dict(lanes=3), dict(clock_hz=0), dict(mode="solo"), dict(twiddle_fetch="x"),
               dict(mse_latency=-1)):
        with pytest.raises(ConfigError):
            replace(CFG, **kw)
    with pytest.raises(ConfigError):
        WorkloadSpec(n_encrypt=-1)
    with pytest.raises(ConfigError):
        check_tiling(replace(CFG, global_scratch_bytes=64 * 1024))
    check_tiling(CFG)


def test_config_files():
    cfg = config_from_kv({"lanes": "4", "dram_bytes_per_sec": "inf", "onchip_twiddles": "no",
                          "mode": "dual_encrypt"}, CkksParams(log_n=14))
    assert cfg.lanes == 4 and math.isinf(cfg.dram_bytes_per_sec) and not cfg.onchip_twiddles
    assert cfg.params.log_n == 14
    for bad in ({"bogus": "1"}, {"lanes": "x"}, {"onchip_randoms": "maybe"}, {"lanes": "2.5"}):
        with pytest.raises(ConfigError):
            config_from_kv(bad)
    assert workload_from_kv({"n_encrypt": "3"}) == WorkloadSpec(n_encrypt=3)
    with pytest.raises(ConfigError):
        workload_from_kv({"n_enc": "3"})


def test_fifo_report_small():
    rows = fifo_report(replace(CFG, lanes=2), 8)
    assert [r["simulated_words"] for r in rows] == [r["declared_words"] for r in rows] == [2, 4]
    assert rows[1]["ratio"] == 2
    assert "stage,delay,declared_words,simulated_words,ratio" in fifo_to_csv(rows, "m")


def test_fifo_report_single_stage():
    assert fifo_report(replace(CFG, lanes=8), 8) == []


def test_fifo_report_default_size():
    rows = fifo_report(CFG)
    live = [r["simulated_words"] for r in rows if r["simulated_words"]]
    assert live == [8 << i for i in range(13)]
    assert all(r["ratio"] == 2 for r in rows[1:13])


def test_fifo_report_detects_mismatch(monkeypatch):
    import clientfhe.streamsim as ss
    real = ss.build_dataflow_schedule

    def broken(P, N, plan="merged"):
        s = real(P, N, plan)
        s.fifo_words = [w + 1 for w in s.fifo_words]
        return s
    monkeypatch.setattr(ss, "build_dataflow_schedule", broken)
    with pytest.raises(ConsistencyError):
        fifo_report(replace(CFG, lanes=2), 16)
