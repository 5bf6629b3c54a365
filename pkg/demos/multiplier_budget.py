"""Twiddle multiplier counts for merged vs plain pipelined transforms.

Run: python3 demos/multiplier_budget.py
"""
from clientfhe.design_explorer import (PipelineConfig, area_proxy, count_multipliers,
                                       explore_configs, reductions)

# eight-point figure: separate twist column vs twist folded into the stage twiddles
plain = count_multipliers(PipelineConfig(2, 8, (2, 2, 2), merged=False)).twiddle_mult_total
merged = count_multipliers(PipelineConfig(2, 8, "merged")).twiddle_mult_total
print(f"N=8 twiddle multiplications: plain {plain}, merged {merged}")

print("\nP=8, N=2^12, cheapest plans:")
for r in explore_configs(8, 1 << 12, 4)[:6]:
    print(f"  {r['plan']:>22}  merged={r['merged']!s:5}  modmul={r['modmul']}")

for log_n in (12, 14, 16):
    r = reductions(8, 1 << log_n)
    print(f"N=2^{log_n}: merged {r['merged']} instances, "
          f"{100 * r['vs_radix2']:.1f}% below radix-2, {100 * r['vs_radix4']:.1f}% below radix-2^2")

a = area_proxy(8, 1 << 16)
print(f"area proxy: {100 * a['reduction']:.1f}% below the plain baseline")
