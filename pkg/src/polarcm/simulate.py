"""End-to-end Monte-Carlo AWGN link simulation for all mapping schemes.

Trials are seeded individually (Philox key = (point seed, trial index)), so
counts are independent of batch size and of any parallel execution order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .channel_metrics import AwgnSpec, conditional_llr_array
from .constellation import Constellation, Labeling, make_ask
from .errors import ConfigurationError
from .llr_ops import clip_llr
from .mapping import BitPermutationMap, EightAskLayout, bpcm_map, mlc_receive
from .baselines import Interleaver
from .polar import PolarCode, encode, make_subcodes, sc_decode

SCHEMES = ("bpcm", "bicm", "sbp", "pbp", "bpsk")


# ---------------------------------------------------------------------------
# Scheme engines: fixed artifacts, vectorized transmit/receive over a batch
# ---------------------------------------------------------------------------

class BpskEngine:
    """Plain BPSK link; the reference scheme and the k=1 degenerate case."""

    def __init__(self, code: PolarCode):
        self.code = code
        self.c = make_ask(1, Labeling.GRAY)
        self.k_info = code.k_info
        self.n_symbols = code.n_bits
        self._amp = np.array([self.c.map_bits((0,)), self.c.map_bits((1,))])

    def simulate(self, bits, noise, spec: AwgnSpec):
        x = self._amp[encode(self.code, bits)]
        y = x + spec.noise_std * noise
        a0, a1 = self._amp
        llr = ((y - a1) ** 2 - (y - a0) ** 2) / (2.0 * spec.variance)
        info, _ = sc_decode(self.code, clip_llr(llr))
        return np.any(info != bits, axis=-1)


class BpcmEngine:
    """Bit-permuted mapping of one modulation-independent code (MLC receiver).

    Also covers per-level chain codes: pass ``members`` explicitly with an
    all-P1 map and each level decodes its own code.
    """

    def __init__(self, pmap: BitPermutationMap, c: Constellation,
                 code: PolarCode | None = None, members=None,
                 layout: EightAskLayout | None = None):
        if (code is None) == (members is None):
            raise ConfigurationError("provide exactly one of code or members")
        k_prime = 4 if layout is not None else pmap.n_slots
        self.members = members if members is not None else make_subcodes(code, k_prime).members
        self.pmap = pmap
        self.c = c
        self.layout = layout
        self._splits = np.cumsum([m.k_info for m in self.members])[:-1]
        self.k_info = int(sum(m.k_info for m in self.members))
        self.n_symbols = layout.n_symbols if layout is not None else pmap.n_symbols

    def simulate(self, bits, noise, spec: AwgnSpec):
        parts = np.split(bits, self._splits, axis=-1)
        coded = np.stack([encode(m, p) for m, p in zip(self.members, parts)])
        x = bpcm_map(coded, self.pmap, self.c, self.layout)
        y = x + spec.noise_std * noise
        info = mlc_receive(y, self.pmap, self.members, self.c, spec, self.layout)
        return np.any(info != bits, axis=-1)


class BicmEngine:
    """Interleaved mapping with parallel (no-feedback) exact marginal demapping."""

    def __init__(self, code: PolarCode, c: Constellation, interleaver: Interleaver):
        if interleaver.n_bits != code.n_bits:
            raise ConfigurationError("interleaver sized for a different code")
        self.code = code
        self.c = c
        self.interleaver = interleaver
        self.k_info = code.k_info
        self.n_symbols = -(-code.n_bits // c.k)
        self._n_pad = self.n_symbols * c.k - code.n_bits
        self._known_mask = np.zeros((self.n_symbols, c.k), dtype=bool)
        for j in range(code.n_bits, self.n_symbols * c.k):
            self._known_mask[j // c.k, j % c.k] = True  # zero padding, known to rx

    def simulate(self, bits, noise, spec: AwgnSpec):
        coded = encode(self.code, bits)
        stream = self.interleaver.apply(coded)
        if self._n_pad:
            pad = np.zeros(stream.shape[:-1] + (self._n_pad,), dtype=stream.dtype)
            stream = np.concatenate([stream, pad], axis=-1)
        labels = stream.reshape(stream.shape[:-1] + (self.n_symbols, self.c.k))
        packed = np.zeros(labels.shape[:-1], dtype=np.int64)
        for j in range(self.c.k):
            packed |= labels[..., j].astype(np.int64) << j
        y = self.c.map_labels(packed) + spec.noise_std * noise
        known_bits = np.zeros((self.n_symbols, self.c.k), dtype=np.int8)
        llrs = np.stack(
            [conditional_llr_array(self.c, y, spec, known_bits, self._known_mask,
                                   np.full(self.n_symbols, lvl, dtype=np.int64))
             for lvl in range(self.c.k)],
            axis=-1,
        ).reshape(y.shape[:-1] + (self.n_symbols * self.c.k,))
        llr_coded = self.interleaver.restore(llrs[..., : self.code.n_bits])
        info, _ = sc_decode(self.code, clip_llr(llr_coded))
        return np.any(info != bits, axis=-1)


# ---------------------------------------------------------------------------
# Point and sweep runners
# ---------------------------------------------------------------------------

@dataclass
class PointResult:
    snr_db: float
    snr_db_es: float
    trials: int
    errors: int
    bler: float
    censored: bool
    seed: int


@dataclass
class LinkResult:
    points: list
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"config": self.config,
                           "points": [asdict(p) for p in self.points]},
                          sort_keys=True, indent=2) + "\n"


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, trial], dtype=np.uint64)))


def _spec_for(engine, snr_db: float, convention: str) -> AwgnSpec:
    if convention == "esn0":
        return AwgnSpec.from_snr_db_es(snr_db)
    if convention == "ebn0":
        return AwgnSpec.from_snr_db_eb(snr_db, engine.k_info / engine.n_symbols)
    raise ConfigurationError(f"unknown SNR convention {convention!r}")


def run_point(engine, snr_db: float, *, snr_convention: str = "ebn0",
              max_trials: int = 1_000_000, min_block_errors: int = 50,
              seed: int = 0, batch_size: int = 256) -> PointResult:
    """Simulate independent blocks until ``min_block_errors`` or ``max_trials``.

    The trial stream is inspected in order, so the reported counts do not
    depend on the batch size.
    """
    spec = _spec_for(engine, snr_db, snr_convention)
    trials = 0
    errors = 0
    while trials < max_trials and errors < min_block_errors:
        b = min(batch_size, max_trials - trials)
        rngs = [_trial_rng(seed, trials + t) for t in range(b)]
        bits = np.stack([r.integers(0, 2, size=engine.k_info, dtype=np.int8) for r in rngs])
        noise = np.stack([r.standard_normal(engine.n_symbols) for r in rngs])
        flags = engine.simulate(bits, noise, spec)
        cum = errors + np.cumsum(flags)
        if cum[-1] >= min_block_errors:
            stop = int(np.argmax(cum >= min_block_errors))
            trials += stop + 1
            errors = int(cum[stop])
            break
        errors = int(cum[-1])
        trials += b
    return PointResult(
        snr_db=float(snr_db), snr_db_es=spec.snr_db_es, trials=trials, errors=errors,
        bler=errors / trials if trials else 0.0,
        censored=errors < min_block_errors, seed=seed,
    )


def run_sweep(engine, snr_grid, *, snr_convention: str = "ebn0",
              max_trials: int = 1_000_000, min_block_errors: int = 50,
              master_seed: int = 0, batch_size: int = 256,
              bler_floor: float = 1e-5, config: dict | None = None) -> LinkResult:
    """Map :func:`run_point` over the grid, skipping points past the BLER floor."""
    grid = [float(v) for v in snr_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("snr_grid must be strictly increasing")
    points = []
    for idx, snr_db in enumerate(grid):
        point_seed = int(np.random.SeedSequence(entropy=(master_seed, idx)).generate_state(1, np.uint64)[0])
        res = run_point(engine, snr_db, snr_convention=snr_convention,
                        max_trials=max_trials, min_block_errors=min_block_errors,
                        seed=point_seed, batch_size=batch_size)
        points.append(res)
        if not res.censored and res.bler < bler_floor:
            break
        if res.trials >= max_trials and res.errors == 0:
            break
    return LinkResult(points=points, config=dict(config or {}))


def snr_at_bler(points, target: float):
    """SNR where the measured curve crosses ``target`` (log-linear interpolation)."""
    usable = sorted((p for p in points if p.errors > 0), key=lambda p: p.snr_db)
    for a, b in zip(usable, usable[1:]):
        if a.bler >= target >= b.bler:
            if a.bler == b.bler:
                return a.snr_db
            la, lb, lt = np.log10(a.bler), np.log10(b.bler), np.log10(target)
            return a.snr_db + (b.snr_db - a.snr_db) * (lt - la) / (lb - la)
    return None


# ---------------------------------------------------------------------------
# Config-driven runs (the CLI surface)
# ---------------------------------------------------------------------------

_REQUIRED_KEYS = ("scheme", "snr_grid", "modulation")


def validate_sim_config(cfg: dict) -> dict:
    cfg = dict(cfg)
    for key in _REQUIRED_KEYS:
        if key not in cfg:
            raise ConfigurationError(f"simulation config missing {key!r}")
    if cfg["scheme"] not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {cfg['scheme']!r}")
    cfg.setdefault("snr_convention", "ebn0")
    cfg.setdefault("max_trials", 1_000_000)
    cfg.setdefault("min_block_errors", 50)
    cfg.setdefault("master_seed", 0)
    cfg.setdefault("batch_size", 256)
    cfg.setdefault("bler_floor", 1e-5)
    if cfg["min_block_errors"] < 20:
        raise ConfigurationError("min_block_errors must be at least 20 for reported points")
    grid = [float(v) for v in cfg["snr_grid"]]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("snr_grid must be strictly increasing")
    return cfg


def build_engine(cfg: dict, load_text):
    """Instantiate the scheme engine for a validated config.

    ``load_text(ref)`` resolves artifact references (file paths) to JSON text.
    """
    from .mapping import build_8ask_layout  # local import to keep module load light

    scheme = cfg["scheme"]
    mod = cfg["modulation"]
    k = int(mod["k"])
    if scheme == "bpsk":
        return BpskEngine(PolarCode.from_json(load_text(cfg["code"])))
    if scheme == "bpcm":
        code = PolarCode.from_json(load_text(cfg["code"]))
        pmap = BitPermutationMap.from_json(load_text(cfg["pmap"]))
        c = make_ask(k, Labeling(mod.get("labeling", Labeling.SET_PARTITION.value)))
        layout = build_8ask_layout(code.n_bits) if k == 3 else None
        return BpcmEngine(pmap, c, code=code, layout=layout)
    if scheme == "sbp":
        c = make_ask(k, Labeling(mod.get("labeling", Labeling.SET_PARTITION.value)))
        if k == 3:
            code = PolarCode.from_json(load_text(cfg["code"]))
            layout = build_8ask_layout(code.n_bits)
            pmap = BitPermutationMap.all_p1(layout.n_symbols, 3)
            return BpcmEngine(pmap, c, code=code, layout=layout)
        members = [PolarCode.from_json(load_text(ref)) for ref in cfg["codes"]]
        pmap = BitPermutationMap.all_p1(members[0].n_bits, k)
        return BpcmEngine(pmap, c, members=members)
    # bicm / pbp share the parallel-demap engine
    code = PolarCode.from_json(load_text(cfg["code"]))
    c = make_ask(k, Labeling(mod.get("labeling", Labeling.GRAY.value)))
    if cfg.get("interleaver"):
        ilv = Interleaver.from_json(load_text(cfg["interleaver"]))
    else:
        ilv = Interleaver(permutation=np.arange(code.n_bits), kind="identity", seed=None)
    return BicmEngine(code, c, ilv)


def run_sweep_config(cfg: dict, load_text) -> LinkResult:
    cfg = validate_sim_config(cfg)
    engine = build_engine(cfg, load_text)
    return run_sweep(
        engine, cfg["snr_grid"], snr_convention=cfg["snr_convention"],
        max_trials=int(cfg["max_trials"]), min_block_errors=int(cfg["min_block_errors"]),
        master_seed=int(cfg["master_seed"]), batch_size=int(cfg["batch_size"]),
        bler_floor=float(cfg["bler_floor"]), config=cfg,
    )


def link_csv_rows(result: LinkResult) -> list:
    cfg = result.config
    mod = cfg.get("modulation", {})
    name = {1: "bpsk", 2: "4ask", 3: "8ask", 4: "16ask"}.get(int(mod.get("k", 1)), "?")
    rows = []
    for p in result.points:
        rows.append((cfg.get("scheme", "?"), cfg.get("n_bits", ""), cfg.get("rate", ""),
                     name, p.snr_db, p.trials, p.errors, p.bler, p.seed, int(p.censored)))
    return rows
