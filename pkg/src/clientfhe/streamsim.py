"""Discrete-event model of the two-core streaming client accelerator.

Each core (RSC) owns `pnl_per_rsc` pipelined lanes of P coefficients per
cycle.  Work is cut into rounds: one round keeps every lane of a core busy
for N/P cycles (one transform per lane, or one complex transform spread over
all lanes in FFT mode).  Rounds stream back to back; a data dependency
between phases of one job (IFFT -> NTT, INTT -> FFT) drains the pipeline.

Memory: input tiles are double-buffered (the fetch for round i is issued
when round i-2 finishes).  Output streams to DRAM while it leaves the
pipeline; with two output buffers, round i may only start once the output
of round i-2 will have drained by the time round i's results appear.  All
transfers share one DRAM channel served in issue order at
`dram_bytes_per_sec / clock_hz` bytes per cycle, quantized to bursts.
"""
from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np

from .ckks_client.memory import memory_accountant
from .ckks_client.scheme import CkksParams
from .errors import ConfigError, ConsistencyError
from .fourier import _log2, build_dataflow_schedule, stream_transform
from .modarith import enumerate_ntt_friendly_primes

MODES = ("dual_encrypt", "dual_decrypt", "mixed")
TWIDDLE_FETCH = ("per_pass", "per_limb")
EMA_CATEGORIES = ("message", "ciphertext", "public_key", "secret_key", "masks_errors",
                  "twiddles", "fft_twiddles")


@dataclass(frozen=True)
class SimConfig:
    clock_hz: float = 6.0e8
    dram_bytes_per_sec: float = 68.4e9
    dram_burst_bytes: int = 64
    lanes: int = 8
    pnl_per_rsc: int = 4
    rsc_count: int = 2
    global_scratch_bytes: int = 880 * 1024
    int_word_bits: int = 44
    fp_word_bits: int = 55
    mode: str = "mixed"
    onchip_twiddles: bool = True
    onchip_randoms: bool = True
    twiddle_fetch: str = "per_pass"
    mult_latency: int = 3
    add_latency: int = 1
    mse_latency: int = 1
    params: CkksParams = field(default_factory=CkksParams)

    def __post_init__(self):
        for name in ("clock_hz", "dram_bytes_per_sec", "dram_burst_bytes", "lanes",
                     "pnl_per_rsc", "rsc_count", "global_scratch_bytes", "int_word_bits",
                     "fp_word_bits", "mult_latency", "add_latency"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.mse_latency < 0:
            raise ConfigError("mse_latency must be non-negative")
        if self.lanes not in (2, 4, 8, 16):
            raise ConfigError("lanes must be 2, 4, 8 or 16")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.twiddle_fetch not in TWIDDLE_FETCH:
            raise ConfigError(f"twiddle_fetch must be one of {TWIDDLE_FETCH}")

    @property
    def bytes_per_cycle(self) -> float:
        return self.dram_bytes_per_sec / self.clock_hz


@dataclass(frozen=True)
class WorkloadSpec:
    n_encrypt: int = 0
    n_decrypt: int = 0
    n_ntt: int = 0          # bare single-limb transforms, for calibration

    def __post_init__(self):
        if min(self.n_encrypt, self.n_decrypt, self.n_ntt) < 0:
            raise ConfigError("workload counts must be non-negative")


@dataclass
class SimReport:
    total_cycles: int = 0
    wall_seconds: float = 0.0
    phase_cycles: dict = field(default_factory=dict)
    ema_bytes_in: int = 0
    ema_bytes_out: int = 0
    ema_by_category: dict = field(default_factory=dict)
    stall_cycles: dict = field(default_factory=lambda: {"dram": 0, "fifo": 0})
    throughput_ct_per_sec: float = 0.0
    compute_cycles: int = 0
    path_cycles: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return asdict(self)


@dataclass
class _Round:
    job: int
    phase: str
    inputs: dict
    outputs: dict
    drain_after: bool = False
    job_kind: str = "ckks"


# ---------------------------------------------------------------- job model

@lru_cache(maxsize=64)
def _schedule_shape(P: int, N: int) -> tuple:
    s = build_dataflow_schedule(P, N)
    return s.levels, sum(s.delays), tuple(s.delays), tuple(s.fifo_words)


def pipeline_depth(cfg: SimConfig, N: int | None = None) -> int:
    """Sum of stage latencies: butterfly (multiplier + add) per level plus commutator delays."""
    N = cfg.params.N if N is None else N
    levels, delay, _, _ = _schedule_shape(cfg.lanes, N)
    return levels * (cfg.mult_latency + cfg.add_latency) + delay


def _sizes(cfg: SimConfig, N: int) -> dict:
    ib, fb = cfg.int_word_bits, cfg.fp_word_bits
    return dict(limb=N * ib // 8, message=N * fb // 8,
                stream=(N // 2) * _log2(N) * ib // 8,
                fft_stream=(N // 2) * _log2(N) * 2 * fb // 8,
                fft_table=(N // 2) * 2 * fb // 8)


def check_tiling(cfg: SimConfig) -> None:
    """Every streamed tile (a message or one polynomial limb) must fit one half of the global scratchpad."""
    half = cfg.global_scratch_bytes // 2
    sz = _sizes(cfg, cfg.params.N)
    for name in ("message", "limb"):
        if sz[name] > half:
            raise ConfigError(f"global_scratch: {name} tile of {sz[name]} B exceeds the "
                              f"{half} B double-buffer half")


def _transform_rounds(job: int, phase: str, n_limbs: int, per_round: int, base_inputs,
                      outputs_per_limb: dict, cfg: SimConfig, N: int, per_limb_transforms: int,
                      inverse_fetch: dict) -> list[_Round]:
    """Rounds for n_limbs x per_limb_transforms transforms packed onto the lanes, limb-major."""
    sz = _sizes(cfg, N)
    total = n_limbs * per_limb_transforms
    rounds = []
    for r in range(math.ceil(total / per_round)):
        ts = range(r * per_round, min(total, (r + 1) * per_round))
        limbs = sorted({t // per_limb_transforms for t in ts})
        first = [l for l in limbs if l * per_limb_transforms in ts]
        done = [l for l in limbs if l * per_limb_transforms + per_limb_transforms - 1 in ts]
        inp = {k: v * len(first) for k, v in base_inputs.items()}
        if not cfg.onchip_twiddles:
            if cfg.twiddle_fetch == "per_pass":
                inp["twiddles"] = sz["stream"] * len(limbs)
            else:
                inp["twiddles"] = sz["limb"] * len(first)
        for k, v in inverse_fetch.items():
            inp[k] = inp.get(k, 0) + v * len(first)
        out = {k: v * len(done) for k, v in outputs_per_limb.items()}
        rounds.append(_Round(job, phase, inp, out))
    return rounds


def _fft_round(job: int, phase: str, cfg: SimConfig, N: int, inputs: dict, outputs: dict) -> _Round:
    inp = dict(inputs)
    if not cfg.onchip_twiddles:
        sz = _sizes(cfg, N)
        inp["fft_twiddles"] = sz["fft_stream"] if cfg.twiddle_fetch == "per_pass" else sz["fft_table"]
    return _Round(job, phase, inp, dict(outputs))


def encrypt_rounds(cfg: SimConfig, job: int = 0) -> list[_Round]:
    """IFFT -> round/RNS -> NTT of (m + e0), v and e1 per limb -> fuse with pk in the MSE."""
    p = cfg.params
    N, L = p.N, p.levels
    sz = _sizes(cfg, N)
    head = _fft_round(job, "ifft", cfg, N, {"message": sz["message"]}, {})
    head.drain_after = True
    base = {}
    if not cfg.onchip_randoms:
        base = {"public_key": 2 * sz["limb"], "masks_errors": sz["limb"]}
    body = _transform_rounds(job, "ntt", L, cfg.pnl_per_rsc, base,
                             {"ciphertext": 2 * sz["limb"]}, cfg, N, 3, {})
    return [head] + body


def decrypt_rounds(cfg: SimConfig, job: int = 0) -> list[_Round]:
    """c0 + c1*s in the MSE -> INTT per limb -> CRT -> FFT."""
    p = cfg.params
    N, L = p.N, p.decrypt_levels
    sz = _sizes(cfg, N)
    key = {} if cfg.onchip_randoms else {"secret_key": sz["limb"]}
    body = _transform_rounds(job, "intt", L, cfg.pnl_per_rsc, {"ciphertext": 2 * sz["limb"]},
                             {}, cfg, N, 1, key)
    body[-1].drain_after = True
    tail = _fft_round(job, "fft", cfg, N, {}, {"message": sz["message"]})
    return body + [tail]


def ntt_rounds(cfg: SimConfig, job: int = 0) -> list[_Round]:
    sz = _sizes(cfg, cfg.params.N)
    rounds = _transform_rounds(job, "ntt", 1, 1, {"ciphertext": sz["limb"]},
                               {"ciphertext": sz["limb"]}, cfg, cfg.params.N, 1, {})
    for r in rounds:
        r.job_kind = "raw"
    return rounds


def _programs(cfg: SimConfig, wl: WorkloadSpec) -> list[list[_Round]]:
    R = cfg.rsc_count
    progs = [[] for _ in range(R)]
    enc = [encrypt_rounds(cfg, j) for j in range(wl.n_encrypt)]
    dec = [decrypt_rounds(cfg, wl.n_encrypt + j) for j in range(wl.n_decrypt)]
    raw = [ntt_rounds(cfg, wl.n_encrypt + wl.n_decrypt + j) for j in range(wl.n_ntt)]
    if cfg.mode == "mixed" and R >= 2:
        for r in enc:
            progs[0].extend(r)
        for r in dec:
            progs[1].extend(r)
        rest = raw
    else:
        rest = enc + dec + raw
    for i, r in enumerate(rest):
        progs[i % R].extend(r)
    return progs


# ---------------------------------------------------------------- event loop

class _Channel:
    def __init__(self, bpc: float, burst: int):
        self.bpc = bpc
        self.burst = burst
        self.free = 0.0
        self.busy = {"in": 0.0, "out": 0.0}

    def serve(self, t: float, nbytes: int, kind: str) -> float:
        if nbytes <= 0:
            return t
        q = math.ceil(nbytes / self.burst) * self.burst
        dt = 0.0 if math.isinf(self.bpc) else q / self.bpc
        start = max(t, self.free)
        self.free = start + dt
        self.busy[kind] += dt
        return self.free


def simulate(cfg: SimConfig, wl: WorkloadSpec) -> SimReport:
    check_tiling(cfg)
    N = cfg.params.N
    C = N // cfg.lanes
    depth = pipeline_depth(cfg)
    progs = _programs(cfg, wl)
    rep = SimReport()
    rep.ema_by_category = {k: 0 for k in EMA_CATEGORIES}
    rep.phase_cycles = {k: 0 for k in ("ifft", "ntt", "mse", "intt", "fft", "dram_in", "dram_out")}
    if not any(progs):
        return rep
    ch = _Channel(cfg.bytes_per_cycle, cfg.dram_burst_bytes)
    # per core: next round index, end times, and completion times of the
    # transfers (known as soon as a transfer is issued: the channel is FIFO)
    st = [dict(i=0, end=[], in_done={}, out_done={}, started=set()) for _ in progs]
    ev: list = []
    seq = 0

    def push(t, kind, k, i):
        nonlocal seq
        heapq.heappush(ev, (t, seq, kind, k, i))
        seq += 1

    def lag(rnd: _Round) -> int:
        return depth + (cfg.mse_latency if rnd.job_kind != "raw" else 0)

    for k, prog in enumerate(progs):
        for i in range(min(2, len(prog))):
            push(0.0, "fetch", k, i)
    last = 0.0
    first_start = math.inf
    last_out_ready = 0.0
    while ev:
        t, _, kind, k, i = heapq.heappop(ev)
        s, prog = st[k], progs[k]
        if kind == "fetch":
            nbytes = sum(prog[i].inputs.values())
            for c, v in prog[i].inputs.items():
                rep.ema_by_category[c] += v
            rep.ema_bytes_in += nbytes
            s["in_done"][i] = ch.serve(t, nbytes, "in")
            last = max(last, s["in_done"][i])
            push(t, "try", k, i)
        elif kind == "write":
            # output streams out while it is produced; the last word leaves
            # the pipeline at end + lag
            nbytes = sum(prog[i].outputs.values())
            for c, v in prog[i].outputs.items():
                rep.ema_by_category[c] += v
            rep.ema_bytes_out += nbytes
            done = ch.serve(t, nbytes, "out")
            s["out_done"][i] = max(done, s["end"][i] + lag(prog[i])) if nbytes else t
            last = max(last, s["out_done"][i])
            if i + 2 < len(prog):
                push(t, "try", k, i + 2)
        elif kind == "try":
            if i != s["i"] or i in s["started"]:
                continue
            if i not in s["in_done"] or (i >= 2 and i - 2 not in s["out_done"]):
                continue
            compute_ready = 0.0
            if i > 0:
                compute_ready = s["end"][i - 1]
                if prog[i - 1].drain_after:
                    compute_ready += lag(prog[i - 1])
            gates = {"dram": s["in_done"][i],
                     "fifo": s["out_done"][i - 2] - lag(prog[i]) if i >= 2 else 0.0}
            ready = max(compute_ready, *gates.values())
            if ready > t:
                push(ready, "try", k, i)
                continue
            s["started"].add(i)
            if i > 0 and ready > compute_ready:
                binding = max(gates, key=gates.get)
                rep.stall_cycles[binding] += ready - compute_ready
            first_start = min(first_start, t)
            rep.phase_cycles[prog[i].phase] += C
            s["end"].append(t + C)
            last_out_ready = max(last_out_ready, t + C + lag(prog[i]))
            last = max(last, t + C + lag(prog[i]))
            push(t + lag(prog[i]), "write", k, i)
            push(t + C, "end", k, i)
        elif kind == "end":
            s["i"] = i + 1
            if i + 2 < len(prog):
                push(t, "fetch", k, i + 2)
            if i + 1 < len(prog):
                push(t, "try", k, i + 1)
    rep.total_cycles = int(math.ceil(max(last, last_out_ready)))
    rep.wall_seconds = rep.total_cycles / cfg.clock_hz
    rep.phase_cycles["dram_in"] = int(math.ceil(ch.busy["in"]))
    rep.phase_cycles["dram_out"] = int(math.ceil(ch.busy["out"]))
    rep.phase_cycles["mse"] = _mse_cycles(cfg, wl)
    rep.compute_cycles = int(math.ceil(last_out_ready - first_start)) if first_start < math.inf else 0
    rep.stall_cycles = {k: int(round(v)) for k, v in rep.stall_cycles.items()}
    rep.path_cycles = {
        "encrypt": rep.phase_cycles["ifft"] + rep.phase_cycles["ntt"] if wl.n_encrypt else 0,
        "decrypt": rep.phase_cycles["intt"] + rep.phase_cycles["fft"],
    }
    jobs = wl.n_encrypt + wl.n_decrypt
    rep.throughput_ct_per_sec = jobs / rep.wall_seconds if jobs and rep.wall_seconds else 0.0
    return rep


def _mse_cycles(cfg: SimConfig, wl: WorkloadSpec) -> int:
    """Element-wise work (overlapped with the transforms): elements / (P * lanes per core)."""
    p = cfg.params
    width = cfg.lanes * cfg.pnl_per_rsc
    # encrypt per limb: RNS split, v*pk0, v*pk1, two additions; decrypt per limb: c1*s, add, CRT
    elems = p.N * (5 * p.levels * wl.n_encrypt + 3 * p.decrypt_levels * wl.n_decrypt)
    return int(math.ceil(elems / width))


# ---------------------------------------------------------------- sweeps

@dataclass
class LaneSweep:
    rows: list
    knee: int | None


def lane_sweep(cfg: SimConfig, wl: WorkloadSpec, lane_options=(2, 4, 8, 16)) -> LaneSweep:
    opts = sorted(int(p) for p in lane_options)
    if any(p & (p - 1) or p <= 0 for p in opts):
        raise ConfigError("lane options must be powers of two")
    rows = []
    for P in opts:
        rep = simulate(replace(cfg, lanes=P), wl)
        stalls = rep.stall_cycles["dram"] + rep.stall_cycles["fifo"]
        rows.append(dict(lanes=P, throughput=rep.throughput_ct_per_sec,
                         total_cycles=rep.total_cycles,
                         stall_fraction=stalls / rep.total_cycles if rep.total_cycles else 0.0))
    return LaneSweep(rows, find_knee(rows))


def find_knee(rows: list, gain: float = 1.1) -> int | None:
    """Smallest lane count after which doubling adds less than `gain`."""
    for a, b in zip(rows, rows[1:]):
        if a["throughput"] > 0 and b["throughput"] / a["throughput"] < gain:
            return a["lanes"]
    return rows[-1]["lanes"] if rows else None


def balance_point_lanes(cfg: SimConfig, wl: WorkloadSpec, lane_options=(2, 4, 8, 16)) -> int:
    """Analytic knee: smallest P whose busiest core computes no slower than the DRAM channel moves the bytes."""
    progs = _programs(replace(cfg, lanes=max(lane_options)), wl)
    rounds = max(len(p) for p in progs)
    nbytes = sum(sum(r.inputs.values()) + sum(r.outputs.values()) for p in progs for r in p)
    dram = nbytes / cfg.bytes_per_cycle
    N = cfg.params.N
    for P in sorted(lane_options):
        if rounds * N / P <= dram:
            return P
    return max(lane_options)


def sweep_to_csv(sweep: LaneSweep, manifest: str | None = None) -> str:
    buf = io.StringIO()
    if manifest:
        buf.write(f"# manifest {manifest}\n")
    buf.write(f"# knee {sweep.knee}\n")
    w = csv.DictWriter(buf, fieldnames=["lanes", "throughput", "total_cycles", "stall_fraction"],
                       lineterminator="\n")
    w.writeheader()
    for r in sweep.rows:
        w.writerow(r)
    return buf.getvalue()


VARIANTS = {"Base": (False, False), "TF_Gen": (True, False), "All": (True, True)}


def ema_ablation(cfg: SimConfig, wl: WorkloadSpec, log_ns=(14, 15, 16)) -> list[dict]:
    """Latency and EMA bytes for Base / TF_Gen / All at each polynomial degree."""
    rows = []
    for log_n in log_ns:
        params = replace(cfg.params, log_n=log_n)
        lat = {}
        for name, (tw, rnd) in VARIANTS.items():
            c = replace(cfg, params=params, onchip_twiddles=tw, onchip_randoms=rnd)
            rep = simulate(c, wl)
            lat[name] = rep.total_cycles
            rows.append(dict(N=1 << log_n, variant=name, latency_cycles=rep.total_cycles,
                             ema_bytes=rep.ema_bytes_in + rep.ema_bytes_out))
        for r in rows[-3:]:
            r["ratio_vs_all"] = r["latency_cycles"] / lat["All"] if lat["All"] else float("nan")
    return rows


def ablation_to_csv(rows: list[dict], manifest: str | None = None) -> str:
    buf = io.StringIO()
    if manifest:
        buf.write(f"# manifest {manifest}\n")
    w = csv.DictWriter(buf, fieldnames=["N", "variant", "latency_cycles", "ema_bytes",
                                        "ratio_vs_all"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "ratio_vs_all": f"{r['ratio_vs_all']:.4f}"})
    return buf.getvalue()


def accountant_crosscheck(cfg: SimConfig) -> dict:
    """Base-variant EMA of one encrypt next to the accountant's categories."""
    c = replace(cfg, onchip_twiddles=False, onchip_randoms=False, twiddle_fetch="per_limb",
                mode="dual_encrypt")
    rep = simulate(c, WorkloadSpec(n_encrypt=1))
    acc = memory_accountant(cfg.params, {}, cfg.int_word_bits)
    return dict(simulated={k: rep.ema_by_category[k] for k in ("public_key", "masks_errors", "twiddles")},
                accountant={k: acc[k] for k in ("public_key", "masks_errors", "twiddles")},
                message=rep.ema_by_category["message"],
                message_expected=_sizes(cfg, cfg.params.N)["message"])


# ---------------------------------------------------------------- FIFO report

@lru_cache(maxsize=8)
def _probe_prime(log_n: int):
    return enumerate_ntt_friendly_primes(30, 40, log_n)[0]


def fifo_report(cfg: SimConfig, N: int | None = None) -> list[dict]:
    """Simulated high-water FIFO occupancy per MDC commutator, next to the declared sizes."""
    N = cfg.params.N if N is None else N
    P = cfg.lanes
    if N % P:
        raise ConfigError("lanes must divide N")
    sched = build_dataflow_schedule(P, N)
    if sched.levels == 1 or not any(sched.fifo_words):
        return []
    res = stream_transform(np.zeros(N, dtype=np.uint64), _probe_prime(_log2(N)), sched)
    rows = []
    prev = None
    for s, (d, w, h) in enumerate(zip(sched.delays, sched.fifo_words, res.fifo_high_water)):
        ratio = h / prev if prev else float("nan")
        rows.append(dict(stage=s, delay=d, declared_words=w, simulated_words=h, ratio=ratio))
        if h:
            prev = h
    nz = [r["simulated_words"] for r in rows if r["simulated_words"]]
    if any(b != 2 * a for a, b in zip(nz, nz[1:])):
        raise ConsistencyError("FIFO occupancy does not double between stages")
    if any(r["declared_words"] != r["simulated_words"] for r in rows):
        raise ConsistencyError("simulated FIFO occupancy differs from the schedule")
    return rows


def fifo_to_csv(rows: list[dict], manifest: str | None = None) -> str:
    buf = io.StringIO()
    if manifest:
        buf.write(f"# manifest {manifest}\n")
    w = csv.DictWriter(buf, fieldnames=["stage", "delay", "declared_words", "simulated_words",
                                        "ratio"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


# ---------------------------------------------------------------- config files

def _num(v: str) -> float:
    v = v.strip()
    if v.lower() in ("inf", "infinity"):
        return math.inf
    if "^" in v:
        b, e = v.split("^", 1)
        return float(b) ** float(e)
    return float(v)


_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def config_from_kv(kv: dict, params: CkksParams | None = None) -> SimConfig:
    fields = SimConfig.__dataclass_fields__
    args = {}
    for k, v in kv.items():
        if k not in fields or k == "params":
            raise ConfigError(f"unknown simulator key {k!r}")
        typ = fields[k].type
        try:
            if k in ("mode", "twiddle_fetch"):
                args[k] = v.strip()
            elif typ in ("bool",):
                args[k] = _BOOL[v.strip().lower()]
            elif typ in ("int",):
                x = _num(v)
                if x != int(x):
                    raise ValueError
                args[k] = int(x)
            else:
                args[k] = _num(v)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{k}: bad value {v!r}") from exc
    if params is not None:
        args["params"] = params
    return SimConfig(**args)


def workload_from_kv(kv: dict) -> WorkloadSpec:
    args = {}
    for k, v in kv.items():
        if k not in WorkloadSpec.__dataclass_fields__:
            raise ConfigError(f"unknown workload key {k!r}")
        try:
            args[k] = int(v)
        except ValueError as exc:
            raise ConfigError(f"{k}: bad value {v!r}") from exc
    return WorkloadSpec(**args)
