"""BICM interleaving (random and greedy) and modulation-specific baseline
code constructions (per-level chain codes and marginal-channel codes)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .channel_metrics import AwgnSpec, pbp_bit_capacities, pbp_first_order_capacities, sbp_bit_capacities
from .constellation import Constellation, Labeling, make_ask
from .construction import (
    ChannelProfile,
    construct_gade,
    de_means,
    estimate_bler,
    estimate_bler_batch,
    mean_llr_for_capacity,
    qfunc,
)
from .errors import ConfigurationError, SearchError
from .mapping import BitPermutationMap, EightAskLayout, bpcm_profile, build_8ask_layout
from .polar import PolarCode


@dataclass
class Interleaver:
    """Bijection over coded-bit positions; tx slot j carries bit permutation[j]."""

    permutation: np.ndarray
    kind: str = "random"
    seed: int | None = None

    def __post_init__(self):
        self.permutation = np.asarray(self.permutation, dtype=np.int64)
        n = self.permutation.size
        if not np.array_equal(np.sort(self.permutation), np.arange(n)):
            raise ConfigurationError("interleaver permutation is not a bijection")

    @property
    def n_bits(self) -> int:
        return self.permutation.size

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty(self.n_bits, dtype=np.int64)
        inv[self.permutation] = np.arange(self.n_bits)
        return inv

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[..., self.permutation]

    def restore(self, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(np.asarray(x))
        out[..., self.permutation] = x
        return out

    def to_json(self) -> str:
        return json.dumps(
            {"N": self.n_bits, "permutation": self.permutation.tolist(),
             "kind": self.kind, "seed": self.seed},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Interleaver":
        d = json.loads(text)
        return cls(permutation=np.asarray(d["permutation"], dtype=np.int64),
                   kind=d.get("kind", "random"), seed=d.get("seed"))


def identity_interleaver(n: int) -> Interleaver:
    return Interleaver(permutation=np.arange(n), kind="identity", seed=None)


def make_random_interleaver(n: int, seed: int) -> Interleaver:
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    return Interleaver(permutation=rng.permutation(n), kind="random", seed=seed)


def bit_levels_of_positions(interleaver: Interleaver, k: int) -> np.ndarray:
    """Modulation level carrying each coded-bit position (slot j -> level j mod k)."""
    return interleaver.inverse % k


def bicm_profile(c: Constellation, spec: AwgnSpec, interleaver: Interleaver) -> ChannelProfile:
    """Marginal (no-feedback) bit-channel means assigned through the interleaver."""
    level_means = np.array([mean_llr_for_capacity(cap) for cap in pbp_bit_capacities(c, spec)])
    return ChannelProfile(means=level_means[bit_levels_of_positions(interleaver, c.k)])


def bicm_estimate(code: PolarCode, c: Constellation, spec: AwgnSpec,
                  interleaver: Interleaver) -> float:
    return estimate_bler(code, bicm_profile(c, spec, interleaver))


@dataclass
class GreedyDesign:
    interleaver: Interleaver
    initial_estimate: float
    final_estimate: float
    accepted_swaps: int


def greedy_interleaver(code: PolarCode, c: Constellation, spec: AwgnSpec,
                       seed: int) -> GreedyDesign:
    """Start from a seeded random interleaver and sweep all ordered index pairs,
    accepting a swap only if the GA-DE BLER estimate strictly decreases."""
    n = code.n_bits
    start = make_random_interleaver(n, seed)
    perm = start.permutation.copy()
    level_means = np.array([mean_llr_for_capacity(cap) for cap in pbp_bit_capacities(c, spec)])
    slot_level = np.arange(n) % c.k
    profile = np.empty(n)
    profile[perm] = level_means[slot_level]  # profile indexed by coded position
    stages = code.n_stages
    current = float(estimate_bler_batch(code.frozen, profile[None, :], stages)[0])
    initial = current
    accepted = 0
    for i in range(n):
        j = 0
        while j < n:
            cand_j = np.arange(j, n)
            cand_j = cand_j[(cand_j != i) & (slot_level[cand_j] != slot_level[i])]
            if cand_j.size == 0:
                break
            pa = perm[i]
            pb = perm[cand_j]
            cand = np.repeat(profile[None, :], cand_j.size, axis=0)
            rows = np.arange(cand_j.size)
            cand[rows, pa] = profile[pb]
            cand[rows, pb] = profile[pa]
            blers = estimate_bler_batch(code.frozen, cand, stages)
            better = np.flatnonzero(blers < current)
            if better.size == 0:
                break
            hit = int(better[0])
            jj = int(cand_j[hit])
            perm[i], perm[jj] = perm[jj], perm[i]
            profile = cand[hit].copy()
            current = float(blers[hit])
            accepted += 1
            j = jj + 1
    final = Interleaver(permutation=perm, kind="greedy", seed=seed)
    return GreedyDesign(interleaver=final, initial_estimate=initial,
                        final_estimate=current, accepted_swaps=accepted)


# ---------------------------------------------------------------------------
# Modulation-specific constructions
# ---------------------------------------------------------------------------

def construct_sbp_codes(c: Constellation, spec: AwgnSpec, total_rate: float,
                        n_total: int) -> list:
    """One code per bit level (chain-rule channels, feedback decoding assumed).

    Frozen positions are selected jointly: all k*N_s input positions are ranked
    by their DE mean and the best round(rate * k * N_s) become information bits.
    """
    k = c.k
    if n_total % k:
        raise ConfigurationError(f"total bit count {n_total} not divisible by k={k}")
    n_level = n_total // k
    if n_level < 2 or n_level & (n_level - 1):
        raise ConfigurationError(f"per-level length {n_level} must be a power of two")
    caps = sbp_bit_capacities(c, spec, order=tuple(range(k))).per_level
    k_info = int(round(total_rate * n_total))
    if not 0 <= k_info <= n_total:
        raise ConfigurationError(f"infeasible rate {total_rate}")
    stages = n_level.bit_length() - 1
    all_means = np.concatenate([
        de_means(np.full(n_level, mean_llr_for_capacity(cap)), stages) for cap in caps
    ])
    order = np.argsort(-all_means, kind="stable")
    frozen = np.ones(n_total, dtype=bool)
    frozen[order[:k_info]] = False
    return [
        PolarCode(frozen=frozen[lvl * n_level : (lvl + 1) * n_level],
                  design_meta={"method": "sbp", "level": lvl, "snr_db_es": spec.snr_db_es})
        for lvl in range(k)
    ]


def sbp_estimate(level_codes, c: Constellation, spec: AwgnSpec) -> float:
    """GA-DE BLER of the per-level chain codes decoded with ideal feedback."""
    caps = sbp_bit_capacities(c, spec, order=tuple(range(c.k))).per_level
    log_ok = 0.0
    for code, cap in zip(level_codes, caps):
        means = de_means(np.full(code.n_bits, mean_llr_for_capacity(cap)), code.n_stages)
        pe = qfunc(np.sqrt(means / 2.0))[~code.frozen]
        log_ok += np.sum(np.log1p(-np.minimum(pe, 1 - 1e-300)))
    return float(-np.expm1(log_ok))


def construct_sbp_8ask(spec: AwgnSpec, total_rate: float, n_total: int):
    """Three-level chain construction reusing the four-subcode layout geometry."""
    c = make_ask(3, Labeling.SET_PARTITION)
    layout = build_8ask_layout(n_total)
    pmap = BitPermutationMap.all_p1(layout.n_symbols, 3)
    profile = bpcm_profile(pmap, c, spec, layout)
    k_info = int(round(total_rate * n_total))
    code = construct_gade(n_total, k_info, profile, stages=layout_stage_count(n_total),
                          design_meta={"method": "sbp-8ask", "snr_db_es": spec.snr_db_es})
    return code, layout


def layout_stage_count(n_total: int) -> int:
    return (int(n_total).bit_length() - 1) - 2


def construct_pbp_code(c: Constellation, spec: AwgnSpec, total_rate: float,
                       interleaver: Interleaver, refine_first_order: bool = False,
                       mc_samples: int = 200_000, seed: int = 0) -> PolarCode:
    """Marginal-channel (no feedback) construction through the interleaver.

    With ``refine_first_order`` the first polarization step's pair capacities are
    estimated numerically and DE starts one stage in.
    """
    n = interleaver.n_bits
    k_info = int(round(total_rate * n))
    if not 0 <= k_info <= n:
        raise ConfigurationError(f"infeasible rate {total_rate}")
    levels = bit_levels_of_positions(interleaver, c.k)
    meta = {"method": "pbp", "snr_db_es": spec.snr_db_es,
            "interleaver": interleaver.kind, "refined": refine_first_order}
    if not refine_first_order:
        level_means = np.array([mean_llr_for_capacity(cap) for cap in pbp_bit_capacities(c, spec)])
        return construct_gade(n, k_info, ChannelProfile(means=level_means[levels]),
                              design_meta=meta)
    half = n // 2
    pairs = [(int(levels[i]), int(levels[i + half])) for i in range(half)]
    caps = pbp_first_order_capacities(c, spec, pairs, n_samples=mc_samples, seed=seed)
    means = np.empty(n)
    for i, (cap_minus, cap_plus) in enumerate(caps):
        means[i] = mean_llr_for_capacity(cap_minus)
        means[i + half] = mean_llr_for_capacity(cap_plus)
    stages = (int(n).bit_length() - 1) - 1
    return construct_gade(n, k_info, ChannelProfile(means=means), stages=stages,
                          design_meta=meta)


def pbp_estimate(code: PolarCode, c: Constellation, spec: AwgnSpec,
                 interleaver: Interleaver) -> float:
    return bicm_estimate(code, c, spec, interleaver)


def search_required_snr(estimate_fn, target_bler: float, snr_lo_db: float = -10.0,
                        snr_hi_db: float = 30.0, resolution_db: float = 0.05) -> float:
    """Lowest SNR (dB, to the given resolution) where estimate_fn(snr) <= target."""
    if estimate_fn(snr_hi_db) > target_bler:
        raise SearchError(f"target {target_bler} unreachable at {snr_hi_db} dB")
    if estimate_fn(snr_lo_db) <= target_bler:
        return snr_lo_db
    lo, hi = snr_lo_db, snr_hi_db
    while hi - lo > resolution_db:
        mid = 0.5 * (lo + hi)
        if estimate_fn(mid) <= target_bler:
            hi = mid
        else:
            lo = mid
    return hi
