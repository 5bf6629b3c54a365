"""Multiplier counting over pipelined NTT/FFT design configurations.

Counts come from the MDC schedule itself: for every butterfly level we look
at the twiddle exponents each lane sees over a whole transform, and a lane
needs a physical multiplier at that level if any of them is non-trivial.

Conventions (fixed, see README):
  * NTT: a factor is trivial only when it equals 1.
  * FFT: factors +-1 and +-j are trivial (sign swaps / re-im swaps).
  * Designs that cannot fold the negacyclic twist keep a pre-twist column on
    the forward path and a post-twist column on the inverse path, P lanes
    each.  The merged design applies N^-1 as a constant in the element-wise
    engine, so it needs neither.
  * twiddle_mult_total counts per-transform multiplications on the forward
    path: non-trivial butterfly factors plus, for unfolded designs, N twist
    multiplications (the twist column processes every sample, psi^0 included).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParameterError
from .fourier import (_layouts, _log2, _plan_groups, dif_group_exponents,
                      merge_fold_check, merged_exponents, radix_plans)

# relative multiplier areas, um^2 at 28 nm (Montgomery variants) and an
# assumed FP55 real multiplier of the same size as the sparse Montgomery unit
AREA_BARRETT = 35054
AREA_MONTGOMERY = 19255
AREA_SPARSE_MONTGOMERY = 11328
AREA_FP_MUL = 11328


class MergeError(ParameterError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    P: int
    N: int
    plan: tuple | str = "merged"
    merged: bool = True
    mode: str = "ntt"

    def label(self) -> str:
        if self.plan == "merged":
            return f"radix-2^{_log2(self.N)}"
        return "x".join(str(r) for r in self.plan)


@dataclass
class MultiplierBudget:
    modmul_count: int = 0
    fpmul_count: int = 0          # complex multiplier positions
    shared_unit_count: int = 0
    twiddle_mult_total: int = 0
    levels: tuple = ()


def merge_admissible(N: int, plan) -> bool:
    return plan == "merged" or merge_fold_check(N, plan)


@lru_cache(maxsize=64)
def _lane_maps(P: int, N: int) -> tuple:
    x = np.arange(N)
    return tuple(lay.place(x)[1] for lay in _layouts(P, N))


def _level_counts(lanes: np.ndarray, e: np.ndarray, N: int) -> tuple:
    e = e % (2 * N)
    ntt = np.unique(lanes[e != 0]).size
    fft = np.unique(lanes[e % (N // 2) != 0]).size if N >= 4 else 0
    return int(ntt), int(fft), int((e != 0).sum())


@lru_cache(maxsize=4096)
def _group_counts(P: int, N: int, first: int, m: int) -> tuple:
    maps = _lane_maps(P, N)
    exps = dif_group_exponents(N, first, m)
    return tuple(_level_counts(maps[first - 1 + i], e, N) for i, e in enumerate(exps))


@lru_cache(maxsize=64)
def _merged_counts(P: int, N: int) -> tuple:
    maps = _lane_maps(P, N)
    return tuple(_level_counts(ln, e, N) for ln, e in zip(maps, merged_exponents(N)))


def _lane_counts(P: int, N: int, plan) -> tuple:
    if P not in (2, 4, 8, 16) or N % P:
        raise ParameterError("P must be 2, 4, 8 or 16 and divide N")
    if plan == "merged":
        per = _merged_counts(P, N)
    else:
        prod = 1
        for r in plan:
            prod *= r
        if prod != N:
            raise ParameterError(f"radix plan {plan} does not factor N={N}")
        per = tuple(c for first, m in _plan_groups(plan) for c in _group_counts(P, N, first, m))
    return (tuple(c[0] for c in per), tuple(c[1] for c in per), sum(c[2] for c in per))


def count_multipliers(cfg: PipelineConfig) -> MultiplierBudget:
    P, N = cfg.P, cfg.N
    if cfg.mode not in ("ntt", "fft", "reconfigurable"):
        raise ParameterError(f"unknown mode {cfg.mode!r}")
    plan = cfg.plan if cfg.plan == "merged" else tuple(cfg.plan)
    if plan == "merged" and not cfg.merged:
        raise ParameterError("the merged design has no unmerged variant")
    if cfg.merged and not merge_admissible(N, plan):
        raise MergeError(f"merge not supported for this radix plan {plan}")
    ntt_lv, fft_lv, total = _lane_counts(P, N, plan)
    twist = 0 if cfg.merged else 2 * P
    modmul = sum(ntt_lv) + twist
    fpmul = sum(fft_lv) + twist
    tw_total = total + (0 if cfg.merged else N)
    b = MultiplierBudget(twiddle_mult_total=tw_total, levels=ntt_lv)
    if cfg.mode in ("ntt", "reconfigurable"):
        b.modmul_count = modmul
    if cfg.mode in ("fft", "reconfigurable"):
        b.fpmul_count = fpmul
    if cfg.mode == "ntt":
        b.shared_unit_count = modmul
    elif cfg.mode == "fft":
        b.shared_unit_count = 4 * fpmul
    else:
        b.shared_unit_count = max(modmul, 4 * fpmul)
    return b


@dataclass
class SharedReport:
    budget: MultiplierBudget
    disjoint_units: int
    shared_units: int
    saving: float


def shared_budget(ntt_budget: MultiplierBudget, fft_budget: MultiplierBudget) -> SharedReport:
    """Reconfigurable units: four modular multipliers serve one complex FP product."""
    shared = max(ntt_budget.modmul_count, 4 * fft_budget.fpmul_count)
    disjoint = ntt_budget.modmul_count + 4 * fft_budget.fpmul_count
    b = MultiplierBudget(ntt_budget.modmul_count, fft_budget.fpmul_count, shared,
                         ntt_budget.twiddle_mult_total, ntt_budget.levels)
    return SharedReport(b, disjoint, shared, 1 - shared / disjoint if disjoint else 0.0)


def area_proxy(P: int, N: int, ntt_pipes: int = 4) -> dict:
    """Multiplier area for `ntt_pipes` NTT results plus one FFT result.

    Baseline: radix-2 with separate NTT (plain Montgomery) and FFT hardware.
    Optimized: merged radix-2^n, sparse-prime Montgomery, the FFT running on
    the same units (four modular multipliers per complex product).
    """
    r2 = tuple([2] * _log2(N))
    base_ntt = count_multipliers(PipelineConfig(P, N, r2, False, "ntt"))
    base_fft = count_multipliers(PipelineConfig(P, N, r2, False, "fft"))
    opt_ntt = count_multipliers(PipelineConfig(P, N, "merged", True, "ntt"))
    opt_fft = count_multipliers(PipelineConfig(P, N, "merged", True, "fft"))
    base = (ntt_pipes * base_ntt.modmul_count * AREA_MONTGOMERY
            + 4 * base_fft.fpmul_count * AREA_FP_MUL)
    units = max(ntt_pipes * opt_ntt.modmul_count, 4 * opt_fft.fpmul_count)
    opt = units * AREA_SPARSE_MONTGOMERY
    steps = {
        "baseline": base,
        "twiddle_scheduling": (ntt_pipes * opt_ntt.modmul_count * AREA_MONTGOMERY
                               + 4 * opt_fft.fpmul_count * AREA_FP_MUL),
        "sparse_montgomery": (ntt_pipes * opt_ntt.modmul_count * AREA_SPARSE_MONTGOMERY
                              + 4 * opt_fft.fpmul_count * AREA_FP_MUL),
        "reconfigurable": opt,
    }
    steps["reduction"] = 1 - opt / base
    return steps


def explore_configs(P: int, N: int, max_log: int = 4) -> list[dict]:
    """Every radix plan (stage radix <= 2^max_log) plus the merged design.

    Rows are sorted by modular multiplier count.  reduction_vs_radix2 is the
    saving of each row relative to the plain radix-2 plan.
    """
    n = _log2(N)
    _log2(P)
    rows = []
    configs = [PipelineConfig(P, N, "merged", True, "reconfigurable")]
    for plan in radix_plans(n, max_log):
        merged = merge_admissible(N, plan)
        configs.append(PipelineConfig(P, N, plan, merged, "reconfigurable"))
    for cfg in configs:
        b = count_multipliers(cfg)
        rows.append(dict(plan=cfg.label(), merged=cfg.merged, modmul=b.modmul_count,
                         fpmul=b.fpmul_count, shared=b.shared_unit_count,
                         twiddle_total=b.twiddle_mult_total))
    base = next(r["modmul"] for r in rows if r["plan"] == "x".join(["2"] * n))
    for r in rows:
        r["reduction_vs_radix2"] = round(1 - r["modmul"] / base, 6)
    rows.sort(key=lambda r: (r["modmul"], r["plan"]))
    return rows


def reductions(P: int, N: int) -> dict:
    """Saving of the best merged plan against the radix-2 and radix-2^2 plans."""
    n = _log2(N)
    best = count_multipliers(PipelineConfig(P, N, "merged", True)).modmul_count
    r2 = count_multipliers(PipelineConfig(P, N, tuple([2] * n), False)).modmul_count
    r4_plan = tuple([4] * (n // 2) + [2] * (n % 2))
    r4 = count_multipliers(PipelineConfig(P, N, r4_plan, False)).modmul_count
    return dict(merged=best, radix2=r2, radix4=r4,
                vs_radix2=1 - best / r2, vs_radix4=1 - best / r4)


def rows_to_csv(rows: list[dict], manifest: str | None = None) -> str:
    buf = io.StringIO()
    if manifest:
        buf.write(f"# manifest {manifest}\n")
    cols = ["plan", "merged", "modmul", "fpmul", "shared", "twiddle_total", "reduction_vs_radix2"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in cols})
    return buf.getvalue()
