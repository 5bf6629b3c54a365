"""Command-line entry point.

Exit status: 0 on success, 2 on usage errors (unknown subcommand or flag,
missing arguments), 1 on domain errors with the module's message on stderr.
Every report carries the hash of the run manifest that produced it; binary
artifacts get a sidecar `<path>.manifest.json`.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, replace

import numpy as np

from . import __version__
from .errors import ConfigError, ConsistencyError, ParameterError

DEFAULT_SEED = "0" * 32


# ---------------------------------------------------------------- manifest

class RunManifest:
    def __init__(self, argv: list[str], config: dict, seeds: dict):
        self.argv = list(argv)
        self.config = config
        self.seeds = seeds
        self.inputs: dict = {}
        self.artifacts: dict = {}

    def add_input(self, path: str, data: bytes) -> None:
        self.inputs[path] = hashlib.sha256(data).hexdigest()

    def core(self) -> dict:
        return dict(tool="clientfhe", version=__version__, argv=self.argv,
                    config=self.config, seeds=self.seeds, inputs=self.inputs)

    @property
    def digest(self) -> str:
        blob = json.dumps(self.core(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def record(self, path: str, data: bytes) -> None:
        self.artifacts[path] = hashlib.sha256(data).hexdigest()

    def to_json(self) -> str:
        return json.dumps({**self.core(), "manifest": self.digest, "artifacts": self.artifacts},
                          sort_keys=True, indent=2, default=str) + "\n"


def _read(path: str, man: RunManifest | None = None) -> bytes:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    if man is not None:
        man.add_input(path, data)
    return data


def _emit(args, man: RunManifest, data: bytes | str, binary: bool = False) -> None:
    """Write to --out (or stdout for text); binary artifacts get a manifest sidecar."""
    if isinstance(data, str):
        data = data.encode()
    if args.out in (None, "-"):
        if binary:
            raise ConfigError("binary output needs --out PATH")
        sys.stdout.write(data.decode())
        return
    with open(args.out, "wb") as f:
        f.write(data)
    man.record(args.out, data)
    if binary:
        with open(args.out + ".manifest.json", "w") as f:
            f.write(man.to_json())


def _json(obj, man: RunManifest) -> str:
    return json.dumps({"manifest": man.digest, **obj}, sort_keys=True, indent=2,
                      default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return str(x)


# ---------------------------------------------------------------- helpers

def _params(args, man: RunManifest | None = None):
    from .ckks_client.scheme import CkksParams
    from .ckks_client.serialize import params_from_text
    if getattr(args, "params", None):
        p = params_from_text(_read(args.params, man).decode())
    else:
        p = CkksParams()
    if getattr(args, "log_n", None):
        p = replace(p, log_n=args.log_n)
    return p


def _fmt(args):
    from .redfloat import RedFloatFormat
    return RedFloatFormat(args.mantissa_bits)


def _kv_file(path: str | None, man: RunManifest) -> dict:
    if not path:
        return {}
    from .ckks_client.serialize import parse_kv
    return parse_kv(_read(path, man).decode())


def _sim_config(args, man: RunManifest):
    from .streamsim import config_from_kv
    params = _params(args, man)
    return config_from_kv(_kv_file(args.config, man), params)


def _workload(args, man: RunManifest, default):
    from .streamsim import WorkloadSpec, workload_from_kv
    kv = _kv_file(args.workload, man)
    return workload_from_kv(kv) if kv else WorkloadSpec(**default)


def _load_obj(path: str, man: RunManifest, want):
    from .ckks_client.serialize import load
    obj = load(_read(path, man))
    if not isinstance(obj, want):
        raise ParameterError(f"{path} holds a {type(obj).__name__}, expected {want.__name__}")
    return obj


# ---------------------------------------------------------------- commands

def _bit_range(text: str) -> tuple:
    try:
        lo, hi = (int(v) for v in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO..HI, got {text!r}") from None
    return lo, hi


def cmd_primes(args, man):
    from .modarith import enumerate_ntt_friendly_primes
    if args.bits:
        args.bits_lo, args.bits_hi = args.bits
    primes = enumerate_ntt_friendly_primes(args.bits_lo, args.bits_hi, args.log_n_primes,
                                           rule=args.rule)
    if args.count_only:
        _emit(args, man, _json({"count": len(primes), "bits": [args.bits_lo, args.bits_hi],
                                "log_n": args.log_n_primes, "rule": args.rule}, man))
        return
    lines = [f"# manifest {man.digest}", "q p_bw n a b c"] + [p.to_record() for p in primes]
    _emit(args, man, "\n".join(lines) + "\n")


def cmd_keygen(args, man):
    from .ckks_client.scheme import keygen
    from .ckks_client.serialize import dump_keys
    km = keygen(_params(args, man), args.seed)
    _emit(args, man, dump_keys(km), binary=True)


def cmd_encode(args, man):
    from .ckks_client.scheme import encode
    from .ckks_client.serialize import dump_plaintext, load_message
    _read(args.input, man)
    z = load_message(args.input)
    pt = encode(z, _params(args, man), _fmt(args), args.level)
    _emit(args, man, dump_plaintext(pt), binary=True)


def cmd_encrypt(args, man):
    from .ckks_client.scheme import KeyMaterial, Plaintext, encrypt
    from .ckks_client.serialize import dump_ciphertext
    km = _load_obj(args.keys, man, KeyMaterial)
    pt = _load_obj(args.input, man, Plaintext)
    if pt.level < km.level:
        km = km.at_level(pt.level)
    ct = encrypt(pt, km, args.seed, noiseless=args.noiseless)
    _emit(args, man, dump_ciphertext(ct), binary=True)


def cmd_decrypt(args, man):
    from .ckks_client.scheme import Ciphertext, KeyMaterial, decrypt
    from .ckks_client.serialize import dump_plaintext
    km = _load_obj(args.keys, man, KeyMaterial)
    ct = _load_obj(args.input, man, Ciphertext)
    level = args.level if args.level else min(ct.level, _params(args, man).decrypt_levels)
    _emit(args, man, dump_plaintext(decrypt(ct, km, level)), binary=True)


def cmd_decode(args, man):
    from .ckks_client.scheme import Plaintext, decode
    from .ckks_client.serialize import message_to_csv
    pt = _load_obj(args.input, man, Plaintext)
    z = decode(pt, _fmt(args))
    _emit(args, man, message_to_csv(z, f"# manifest {man.digest}\n"))


def cmd_sweep(args, man):
    from .ckks_client.scheme import roundtrip_precision_sweep, sweep_to_csv
    p = _params(args, man)
    ms = range(args.min_bits, args.max_bits + 1, args.step)
    level = p.decrypt_levels if args.fast else None
    rows = roundtrip_precision_sweep(p, ms, args.seed, args.messages, level)
    _emit(args, man, sweep_to_csv(rows, man.digest))


def cmd_account(args, man):
    from .ckks_client.memory import memory_accountant, twiddle_reduction
    p = _params(args, man)
    onchip = {"twiddles": args.onchip_twiddles, "randoms": args.onchip_randoms}
    acc = memory_accountant(p, onchip, args.coeff_bits, args.lanes)
    out = {"bytes": acc, "mib": {k: v / 2 ** 20 for k, v in acc.items()},
           "onchip": onchip, "coeff_bits": args.coeff_bits,
           "twiddle_reduction": twiddle_reduction(p, args.coeff_bits, args.lanes)}
    _emit(args, man, _json(out, man))


def cmd_explore(args, man):
    from .design_explorer import explore_configs, rows_to_csv
    rows = explore_configs(args.lanes, 1 << args.log_n_explore, args.max_log)
    _emit(args, man, rows_to_csv(rows, man.digest))


def cmd_simulate(args, man):
    from .streamsim import simulate
    cfg = _sim_config(args, man)
    wl = _workload(args, man, dict(n_encrypt=1, n_decrypt=1))
    rep = simulate(cfg, wl)
    body = _json({"report": rep.to_json_dict(), "workload": asdict(wl)}, man)
    if args.report:
        args.out = args.report
    _emit(args, man, body)


def cmd_lane_sweep(args, man):
    from .streamsim import lane_sweep, sweep_to_csv
    cfg = _sim_config(args, man)
    wl = _workload(args, man, dict(n_encrypt=4, n_decrypt=4))
    opts = [int(x) for x in args.lane_options.split(",")]
    _emit(args, man, sweep_to_csv(lane_sweep(cfg, wl, opts), man.digest))


def cmd_ema(args, man):
    from .streamsim import ablation_to_csv, ema_ablation
    cfg = _sim_config(args, man)
    wl = _workload(args, man, dict(n_encrypt=1))
    _emit(args, man, ablation_to_csv(ema_ablation(cfg, wl), man.digest))


def cmd_fifo(args, man):
    from .streamsim import fifo_report, fifo_to_csv
    cfg = _sim_config(args, man)
    _emit(args, man, fifo_to_csv(fifo_report(cfg, args.n), man.digest))


def cmd_selftest(args, man):
    from .selftest import run_selftest
    ok, lines = run_selftest(args.seed)
    for line in lines:
        print(line)
    if not ok:
        raise ConsistencyError("selftest failed")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", metavar="FILE", help="CKKS parameter file (key=value)")
    common.add_argument("--seed", metavar="HEX128", default=DEFAULT_SEED,
                        help="128-bit seed as hex (default all zero)")
    common.add_argument("--mantissa-bits", metavar="M", type=int, default=43,
                        help="FFT datapath mantissa width (default 43)")
    common.add_argument("--out", metavar="PATH", help="output file (default stdout for text)")

    ap = argparse.ArgumentParser(prog="clientfhe", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(fn=fn)
        return p

    p = add("primes", cmd_primes, "enumerate sparse NTT-friendly primes")
    p.add_argument("action", nargs="?", default="enumerate", choices=["enumerate"])
    p.add_argument("--bits", type=_bit_range, help="LO..HI (same as --bits-lo/--bits-hi)")
    p.add_argument("--bits-lo", type=int, default=32)
    p.add_argument("--bits-hi", type=int, default=36)
    p.add_argument("--log-n", "--logn", dest="log_n_primes", type=int, default=16)
    p.add_argument("--rule", default="closed_form", choices=["closed_form", "magnitude", "none"])
    p.add_argument("--count-only", action="store_true")

    p = add("keygen", cmd_keygen, "generate keys from --seed")
    p.add_argument("--log-n", "--logn", type=int)

    p = add("encode", cmd_encode, "encode a message file (CSV re,im or binary float64 pairs)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--level", type=int)
    p.add_argument("--log-n", "--logn", type=int)

    p = add("encrypt", cmd_encrypt, "encrypt a plaintext; --seed is the encryption seed")
    p.add_argument("--keys", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--noiseless", action="store_true", help="zero mask and errors (testing)")

    p = add("decrypt", cmd_decrypt, "decrypt a ciphertext (default: server-return level)")
    p.add_argument("--keys", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--level", type=int)
    p.add_argument("--log-n", "--logn", type=int)

    p = add("decode", cmd_decode, "decode a plaintext to CSV slots")
    p.add_argument("--in", dest="input", required=True)

    p = add("sweep-precision", cmd_sweep, "roundtrip precision versus mantissa width (CSV)")
    p.add_argument("--min-bits", type=int, default=20)
    p.add_argument("--max-bits", type=int, default=52)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--messages", type=int, default=32)
    p.add_argument("--fast", action="store_true",
                   help="encrypt on the server-return limbs only (same result, less work)")
    p.add_argument("--log-n", "--logn", type=int)

    p = add("account-memory", cmd_account, "external memory per category (JSON)")
    p.add_argument("--coeff-bits", type=int, default=44)
    p.add_argument("--lanes", type=int, default=8)
    p.add_argument("--onchip-twiddles", action="store_true")
    p.add_argument("--onchip-randoms", action="store_true")
    p.add_argument("--log-n", "--logn", type=int)

    p = add("explore", cmd_explore, "multiplier counts over radix plans (CSV)")
    p.add_argument("--lanes", type=int, default=8)
    p.add_argument("--log-n", "--logn", dest="log_n_explore", type=int, default=12)
    p.add_argument("--max-log", type=int, default=4)

    for name, fn, help_ in (("simulate", cmd_simulate, "run the streaming simulator (JSON)"),
                            ("lane-sweep", cmd_lane_sweep, "throughput versus lanes (CSV)"),
                            ("ema-ablation", cmd_ema, "Base / TF_Gen / All latency (CSV)"),
                            ("fifo-report", cmd_fifo, "per-stage FIFO occupancy (CSV)")):
        p = add(name, fn, help_)
        p.add_argument("--config", metavar="FILE", help="simulator config (key=value)")
        p.add_argument("--log-n", "--logn", type=int)
        if name != "fifo-report":
            p.add_argument("--workload", metavar="FILE", help="workload (key=value)")
        if name == "simulate":
            p.add_argument("--report", metavar="PATH", help="alias of --out")
        if name == "lane-sweep":
            p.add_argument("--lane-options", default="2,4,8,16")
        if name == "fifo-report":
            p.add_argument("--n", type=int, help="transform size (default: params N)")

    add("selftest", cmd_selftest, "oracle-equivalence checks at N <= 2^10")
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    if not argv:
        ap.print_usage(sys.stderr)
        return 2
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "fn", None):
        ap.print_usage(sys.stderr)
        return 2
    config = {k: v for k, v in vars(args).items() if k not in ("fn",)}
    man = RunManifest(argv, config, {"seed": args.seed})
    try:
        args.fn(args, man)
    except (ParameterError, ConfigError, ConsistencyError) as exc:
        print(f"clientfhe {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
