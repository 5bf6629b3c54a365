"""Lane sweep and on-chip generation ablation on the streaming simulator.

Run: python3 demos/bandwidth_knee.py
"""
from dataclasses import replace

from clientfhe.streamsim import (SimConfig, WorkloadSpec, accountant_crosscheck,
                                 balance_point_lanes, ema_ablation, lane_sweep)

cfg = SimConfig()
wl = WorkloadSpec(n_encrypt=8, n_decrypt=8)
for scale in (1.0, 0.5):
    c = replace(cfg, dram_bytes_per_sec=cfg.dram_bytes_per_sec * scale)
    sw = lane_sweep(c, wl)
    tp = ", ".join(f"P={r['lanes']}: {r['throughput']:.0f}/s" for r in sw.rows)
    print(f"bandwidth x{scale}: {tp}; knee {sw.knee}, analytic {balance_point_lanes(c, wl)}")

print("\nlatency relative to the all-on-chip variant (one encrypt):")
for r in ema_ablation(cfg, WorkloadSpec(n_encrypt=1)):
    print(f"  N={r['N']:6d} {r['variant']:7} {r['ratio_vs_all']:.2f}x  EMA {r['ema_bytes'] / 2**20:8.2f} MiB")

print("\n", accountant_crosscheck(cfg))
