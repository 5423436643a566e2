"""Command-line front end: code/permutation/interleaver design, capacity
tables, GA-DE curves, and link simulation.

Exit codes: 0 success, 2 usage/configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channel_metrics import AwgnSpec, capacity_table_rows
from .constellation import Labeling, make_ask
from .construction import (
    ChannelProfile,
    bpsk_profile,
    construct_gade,
    construct_montecarlo,
    estimate_bler,
)
from .baselines import (
    Interleaver,
    bicm_estimate,
    construct_pbp_code,
    construct_sbp_8ask,
    construct_sbp_codes,
    greedy_interleaver,
    identity_interleaver,
    make_random_interleaver,
    sbp_estimate,
)
from .errors import ConfigurationError, SearchError
from .mapping import (
    BitPermutationMap,
    bpcm_profile,
    build_8ask_layout,
    design_permutations,
    mapping_stage_count,
)
from .polar import PolarCode
from .simulate import link_csv_rows, run_sweep_config

_MODULATIONS = {"bpsk": 1, "4ask": 2, "8ask": 3, "16ask": 4}


def _meta(args: argparse.Namespace) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {"tool": "polarcm", "version": __version__, "flags": flags}


def _write_json_artifact(path: str, payload_json: str, args: argparse.Namespace):
    d = json.loads(payload_json)
    d["meta"] = _meta(args)
    Path(path).write_text(json.dumps(d, sort_keys=True, indent=2) + "\n")


def _write_csv(path: str, header, rows, args: argparse.Namespace):
    with open(path, "w", newline="") as fh:
        fh.write(f"# polarcm {__version__}\n")
        fh.write("# " + json.dumps(_meta(args)["flags"], sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])


def _parse_range(text: str):
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise ConfigurationError(f"range must be lo:hi:step, got {text!r}")
    lo, hi, step = (float(p) for p in parts)
    if step <= 0 or hi < lo:
        raise ConfigurationError(f"bad range {text!r}")
    n = int(np.floor((hi - lo) / step + 0.5)) + 1
    return [lo + i * step for i in range(n)]


def _load_code(path: str) -> PolarCode:
    return PolarCode.from_json(Path(path).read_text())


def _spec_from_args(snr_db: float, convention: str, info_bits_per_symbol: float) -> AwgnSpec:
    if convention == "esn0":
        return AwgnSpec.from_snr_db_es(snr_db)
    return AwgnSpec.from_snr_db_eb(snr_db, info_bits_per_symbol)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_design_code(args) -> int:
    n = args.N
    k_info = int(round(args.rate * n))
    spec = _spec_from_args(args.snr_db, args.snr_convention, max(args.rate, 1e-9))
    if args.method == "gade":
        code = construct_gade(n, k_info, bpsk_profile(spec, n),
                              design_meta={"method": "gade", "snr_db": args.snr_db,
                                           "snr_convention": args.snr_convention,
                                           "seed": args.seed})
    else:
        code = construct_montecarlo(n, k_info, spec, trials=args.trials, seed=args.seed)
        code.design_meta["snr_db"] = args.snr_db
        code.design_meta["snr_convention"] = args.snr_convention
    _write_json_artifact(args.out, code.to_json(), args)
    return 0


def _cmd_design_permutations(args) -> int:
    code = _load_code(args.code)
    k = _MODULATIONS[args.modulation]
    if k < 2:
        raise ConfigurationError("permutation design needs a higher-order modulation")
    c = make_ask(k, Labeling.SET_PARTITION)
    layout = build_8ask_layout(code.n_bits) if k == 3 else None
    if layout is None and code.n_bits % k:
        raise ConfigurationError(f"code length {code.n_bits} does not map onto {args.modulation}")
    n_symbols = layout.n_symbols if layout else code.n_bits // k
    spec = _spec_from_args(args.snr_db, args.snr_convention, code.k_info / n_symbols)
    design = design_permutations(code, c, spec, max_iters=args.max_iters, layout=layout)
    _write_json_artifact(args.out, design.pmap.to_json(), args)
    print(f"{design.final_estimate:.6e}")
    return 0


def _cmd_design_interleaver(args) -> int:
    if args.kind == "random":
        ilv = make_random_interleaver(args.N, args.seed)
        _write_json_artifact(args.out, ilv.to_json(), args)
        return 0
    if not args.code or not args.modulation:
        raise ConfigurationError("greedy design needs --code and --modulation")
    code = _load_code(args.code)
    if code.n_bits != args.N:
        raise ConfigurationError("--N does not match the code length")
    k = _MODULATIONS[args.modulation]
    c = make_ask(k, Labeling.GRAY)
    n_symbols = -(-code.n_bits // k)
    spec = _spec_from_args(args.snr_db, args.snr_convention, code.k_info / n_symbols)
    design = greedy_interleaver(code, c, spec, seed=args.seed)
    _write_json_artifact(args.out, design.interleaver.to_json(), args)
    print(f"{design.initial_estimate:.6e} {design.final_estimate:.6e}")
    return 0


def _cmd_capacity_table(args) -> int:
    k = _MODULATIONS[args.modulation]
    labeling = Labeling.GRAY if args.labeling == "gray" else Labeling.SET_PARTITION
    c = make_ask(k, labeling)
    order = tuple(int(v) for v in args.order.split(",")) if args.order else tuple(range(k))
    rows = capacity_table_rows(c, args.modulation, _parse_range(args.snr_db_range), order)
    _write_csv(args.out, ("constellation", "snr_db", "order", "level", "capacity"), rows, args)
    return 0


def _estimator_for_scheme(args, code_paths):
    """Returns (estimate_fn(spec) -> bler, info_bits_per_symbol)."""
    k = _MODULATIONS[args.modulation]
    scheme = args.scheme
    if scheme == "bpsk":
        code = _load_code(code_paths[0])
        return (lambda spec: estimate_bler(code, bpsk_profile(spec, code.n_bits)),
                code.k_info / code.n_bits)
    if scheme == "bpcm":
        code = _load_code(code_paths[0])
        if not args.pmap:
            raise ConfigurationError("bpcm curves need --pmap")
        pmap = BitPermutationMap.from_json(Path(args.pmap).read_text())
        c = make_ask(k, Labeling.SET_PARTITION)
        layout = build_8ask_layout(code.n_bits) if k == 3 else None
        stages = mapping_stage_count(code, pmap, layout)
        n_symbols = layout.n_symbols if layout else code.n_bits // k
        return (lambda spec: estimate_bler(code, bpcm_profile(pmap, c, spec, layout), stages),
                code.k_info / n_symbols)
    if scheme in ("bicm", "pbp"):
        code = _load_code(code_paths[0])
        c = make_ask(k, Labeling.GRAY)
        if args.interleaver:
            ilv = Interleaver.from_json(Path(args.interleaver).read_text())
        else:
            ilv = identity_interleaver(code.n_bits)
        return (lambda spec: bicm_estimate(code, c, spec, ilv),
                code.k_info / -(-code.n_bits // k))
    if scheme == "sbp":
        c = make_ask(k, Labeling.SET_PARTITION)
        if k == 3:
            code = _load_code(code_paths[0])
            layout = build_8ask_layout(code.n_bits)
            pmap = BitPermutationMap.all_p1(layout.n_symbols, 3)
            stages = mapping_stage_count(code, pmap, layout)
            return (lambda spec: estimate_bler(code, bpcm_profile(pmap, c, spec, layout), stages),
                    code.k_info / layout.n_symbols)
        codes = [_load_code(p) for p in code_paths]
        if len(codes) != k:
            raise ConfigurationError(f"sbp needs {k} level codes, got {len(codes)}")
        total_k = sum(cd.k_info for cd in codes)
        return (lambda spec: sbp_estimate(codes, c, spec), total_k / codes[0].n_bits)
    raise ConfigurationError(f"unknown scheme {scheme!r}")


def _cmd_de_curve(args) -> int:
    code_paths = args.code.split(",")
    estimate, ibps = _estimator_for_scheme(args, code_paths)
    rows = []
    for snr_db in _parse_range(args.snr_db_range):
        spec = _spec_from_args(snr_db, args.snr_convention, ibps)
        rows.append((args.scheme, args.modulation, snr_db, estimate(spec)))
    _write_csv(args.out, ("scheme", "constellation", "snr_db", "bler_estimate"), rows, args)
    return 0


def _cmd_simulate(args) -> int:
    cfg_path = Path(args.config)
    cfg = json.loads(cfg_path.read_text())

    def load_text(ref: str) -> str:
        p = Path(ref)
        if not p.is_absolute():
            p = cfg_path.parent / p
        return p.read_text()

    result = run_sweep_config(cfg, load_text)
    if args.out_json:
        d = json.loads(result.to_json())
        d["meta"] = _meta(args)
        Path(args.out_json).write_text(json.dumps(d, sort_keys=True, indent=2) + "\n")
    if args.out_csv:
        _write_csv(args.out_csv,
                   ("scheme", "N", "rate", "constellation", "snr_db", "trials",
                    "errors", "bler", "seed", "censored"),
                   link_csv_rows(result), args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarcm",
                                     description="polar coded-modulation workbench")
    parser.add_argument("--version", action="version", version=f"polarcm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design-code", help="construct a BPSK polar code")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--method", choices=("gade", "montecarlo"), default="gade")
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--snr-convention", choices=("ebn0", "esn0"), default="ebn0")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_design_code)

    p = sub.add_parser("design-permutations", help="greedy per-symbol permutation design")
    p.add_argument("--code", required=True)
    p.add_argument("--modulation", choices=("4ask", "8ask", "16ask"), required=True)
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--snr-convention", choices=("ebn0", "esn0"), default="ebn0")
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_design_permutations)

    p = sub.add_parser("design-interleaver", help="random or greedy interleaver")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--kind", choices=("random", "greedy"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--code")
    p.add_argument("--modulation", choices=tuple(_MODULATIONS))
    p.add_argument("--snr-db", type=float, default=0.0)
    p.add_argument("--snr-convention", choices=("ebn0", "esn0"), default="ebn0")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_design_interleaver)

    p = sub.add_parser("capacity-table", help="modulation and bit-channel capacities")
    p.add_argument("--modulation", choices=tuple(_MODULATIONS), required=True)
    p.add_argument("--labeling", choices=("gray", "sp"), default="sp")
    p.add_argument("--snr-db-range", required=True, help="lo:hi:step (Es/N0 dB) or a single value")
    p.add_argument("--order", default="", help="decode order, e.g. 0,1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_capacity_table)

    p = sub.add_parser("de-curve", help="GA-DE BLER estimate vs SNR")
    p.add_argument("--code", required=True, help="code file (comma-separated for sbp levels)")
    p.add_argument("--scheme", choices=("bpsk", "bpcm", "bicm", "sbp", "pbp"), required=True)
    p.add_argument("--modulation", choices=tuple(_MODULATIONS), required=True)
    p.add_argument("--snr-db-range", required=True)
    p.add_argument("--snr-convention", choices=("ebn0", "esn0"), default="ebn0")
    p.add_argument("--pmap")
    p.add_argument("--interleaver")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_de_curve)

    p = sub.add_parser("simulate", help="run an AWGN link sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.add_argument("--threads", type=int, default=1,
                   help="worker cap for SNR points (1 = in-process)")
    p.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SearchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigurationError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
