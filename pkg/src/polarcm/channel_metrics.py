"""AWGN model, exact soft demapping, and bit-channel capacity calculators.

SNR convention: real channel y = x + n with n ~ N(0, sigma^2), unit-energy
constellations, N0 = 2 sigma^2, hence Es/N0 = 1/(2 sigma^2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import logsumexp

from .constellation import Constellation
from .errors import ConfigurationError
from .llr_ops import boxplus

_GH_NODES = 128
_LN2 = np.log(2.0)


@lru_cache(maxsize=4)
def _gauss_hermite(n: int = _GH_NODES):
    t, w = np.polynomial.hermite.hermgauss(n)
    return t, w / np.sqrt(np.pi)


@dataclass(frozen=True)
class AwgnSpec:
    """Noise level of the real AWGN channel; converts between SNR conventions."""

    noise_std: float

    def __post_init__(self):
        if not self.noise_std > 0:
            raise ConfigurationError("noise_std must be positive")

    @property
    def variance(self) -> float:
        return self.noise_std**2

    @property
    def snr_db_es(self) -> float:
        return -10.0 * np.log10(2.0 * self.noise_std**2)

    def snr_db_eb(self, info_bits_per_symbol: float) -> float:
        """Eb/N0 in dB for the given spectral efficiency (rate * bits/symbol)."""
        return self.snr_db_es - 10.0 * np.log10(info_bits_per_symbol)

    @classmethod
    def from_snr_db_es(cls, snr_db: float) -> "AwgnSpec":
        return cls(noise_std=float(np.sqrt(0.5 * 10.0 ** (-snr_db / 10.0))))

    @classmethod
    def from_snr_db_eb(cls, snr_db: float, info_bits_per_symbol: float) -> "AwgnSpec":
        return cls.from_snr_db_es(snr_db + 10.0 * np.log10(info_bits_per_symbol))


def awgn_transmit(x, spec: AwgnSpec, rng: np.random.Generator):
    """x plus zero-mean Gaussian noise of std ``spec.noise_std``."""
    return x + spec.noise_std * rng.standard_normal(np.shape(x))


# ---------------------------------------------------------------------------
# Exact LLR demapping
# ---------------------------------------------------------------------------

def conditional_llr_array(
    c: Constellation,
    y: np.ndarray,
    spec: AwgnSpec,
    known_bits: np.ndarray,
    known_mask: np.ndarray,
    target_levels: np.ndarray,
) -> np.ndarray:
    """Exact log P(y | b_t=0, known) / P(y | b_t=1, known) per symbol.

    Unassigned levels are marginalized uniformly; computed with log-sum-exp
    (no max-log approximation).

    y : (..., S) received amplitudes.
    known_bits : (..., S, k) bit values; entries where known_mask is False are ignored.
    known_mask : bool, broadcastable to (..., S, k).
    target_levels : (S,) target level per symbol.
    """
    amps = c.amplitudes
    lab = c.label_bits()  # (M, k)
    e = -((y[..., None] - amps) ** 2) / (2.0 * spec.variance)  # (..., S, M)
    mism = (lab[None, :, :] != np.asarray(known_bits)[..., None, :]) & np.asarray(known_mask)[..., None, :]
    allowed = ~np.any(mism, axis=-1)  # (..., S, M)
    tbit = lab[:, np.asarray(target_levels)].T  # (S, M)
    w0 = (allowed & (tbit == 0)).astype(float)
    w1 = (allowed & (tbit == 1)).astype(float)
    return logsumexp(e, axis=-1, b=w0) - logsumexp(e, axis=-1, b=w1)


def conditional_llr(c: Constellation, y: float, spec: AwgnSpec, known: dict, target: int) -> float:
    """Scalar form of :func:`conditional_llr_array` with ``known`` as {level: bit}."""
    if not 0 <= target < c.k:
        raise ValueError(f"target level {target} out of range for k={c.k}")
    if target in known:
        raise ValueError("known assignment must not include the target level")
    for lvl, b in known.items():
        if not 0 <= int(lvl) < c.k:
            raise ValueError(f"known level {lvl} out of range")
        if int(b) not in (0, 1):
            raise ValueError("known bits must be 0/1")
    kb = np.zeros((1, c.k), dtype=np.int8)
    km = np.zeros((1, c.k), dtype=bool)
    for lvl, b in known.items():
        kb[0, int(lvl)] = int(b)
        km[0, int(lvl)] = True
    out = conditional_llr_array(c, np.asarray([float(y)]), spec, kb, km, np.asarray([target]))
    return float(out[0])


# ---------------------------------------------------------------------------
# Mutual information
# ---------------------------------------------------------------------------

def _log_mixture(y: np.ndarray, points: np.ndarray, sigma: float) -> np.ndarray:
    # log of (1/|P|) sum_x exp(-(y-x)^2 / 2 sigma^2); Gaussian norm cancels in ratios
    d = -((y[..., None] - points) ** 2) / (2.0 * sigma**2)
    return logsumexp(d, axis=-1) - np.log(len(points))


def _binary_mixture_mi(points0, points1, sigma: float) -> float:
    """I(b; Y) for uniform b where Y = X + N and X is uniform over points_b."""
    t, w = _gauss_hermite()
    offsets = np.sqrt(2.0) * sigma * t
    total = 0.0
    for pts_own, pts_other in ((points0, points1), (points1, points0)):
        pts_own = np.asarray(pts_own, dtype=float)
        pts_other = np.asarray(pts_other, dtype=float)
        y = pts_own[:, None] + offsets[None, :]  # (|P|, nodes)
        num = _log_mixture(y, pts_own, sigma)
        den = np.logaddexp(_log_mixture(y, pts_own, sigma), _log_mixture(y, pts_other, sigma)) - _LN2
        total += 0.5 * np.mean(np.sum(w * (num - den), axis=-1)) / _LN2
    return float(min(max(total, 0.0), 1.0))


def bit_level_capacity(
    c: Constellation,
    spec: AwgnSpec,
    target: int,
    known=(),
    fixed: dict | None = None,
) -> float:
    """I(B_target; Y | B_known) with ``known`` levels conditioned uniformly.

    ``fixed`` pins levels to constant bit values (receiver-known padding);
    remaining levels are marginalized.
    """
    fixed = dict(fixed or {})
    known = tuple(int(v) for v in known)
    if not 0 <= target < c.k:
        raise ValueError(f"target level {target} out of range")
    if target in known or target in fixed:
        raise ValueError("target level cannot be conditioned on")
    if len(set(known)) != len(known) or set(known) & set(fixed):
        raise ValueError("known/fixed levels must be disjoint and unique")
    lab = c.label_bits()
    amps = c.amplitudes
    sel_fixed = np.ones(c.size, dtype=bool)
    for lvl, b in fixed.items():
        sel_fixed &= lab[:, int(lvl)] == int(b)
    total = 0.0
    n_assign = 0
    for assign in product((0, 1), repeat=len(known)):
        sel = sel_fixed.copy()
        for lvl, b in zip(known, assign):
            sel &= lab[:, lvl] == b
        pts0 = amps[sel & (lab[:, target] == 0)]
        pts1 = amps[sel & (lab[:, target] == 1)]
        total += _binary_mixture_mi(pts0, pts1, spec.noise_std)
        n_assign += 1
    return total / n_assign


def modulation_capacity(c: Constellation, spec: AwgnSpec) -> float:
    """I(X; Y) for uniform inputs, by Gauss-Hermite quadrature."""
    t, w = _gauss_hermite()
    n = np.sqrt(2.0) * spec.noise_std * t  # (nodes,)
    diff = c.amplitudes[:, None] - c.amplitudes[None, :]  # x_i - x_j
    arg = (n[None, None, :] ** 2 - (diff[:, :, None] + n[None, None, :]) ** 2) / (2.0 * spec.variance)
    lse = logsumexp(arg, axis=1)  # (M, nodes), sum over j
    cap = c.k - float(np.mean(np.sum(w * lse, axis=-1))) / _LN2
    return min(max(cap, 0.0), float(c.k))


@dataclass(frozen=True)
class BitChannelCapacities:
    """Per-level conditional capacities in a given decode order."""

    total: float
    per_level: np.ndarray
    order: tuple

    def __post_init__(self):
        self.per_level.setflags(write=False)


def sbp_bit_capacities(c: Constellation, spec: AwgnSpec, order) -> BitChannelCapacities:
    """Chain-rule capacities I(B_order[j]; Y | B_order[0..j-1])."""
    order = tuple(int(v) for v in order)
    if sorted(order) != list(range(c.k)):
        raise ConfigurationError(f"order {order} is not a permutation of 0..{c.k - 1}")
    per = np.array([bit_level_capacity(c, spec, order[j], known=order[:j]) for j in range(c.k)])
    return BitChannelCapacities(total=modulation_capacity(c, spec), per_level=per, order=order)


def pbp_bit_capacities(c: Constellation, spec: AwgnSpec) -> np.ndarray:
    """Marginal capacities I(B_i; Y) with all other levels unknown."""
    return np.array([bit_level_capacity(c, spec, i) for i in range(c.k)])


def biawgn_capacity(sigma: float) -> float:
    """Capacity of the binary-input AWGN channel with inputs +-1 and noise std sigma."""
    return _binary_mixture_mi([-1.0], [1.0], sigma)


def equivalent_biawgn_sigma(capacity: float, tol: float = 1e-6) -> float:
    """Noise std of the BI-AWGN channel matching the given capacity (bisection)."""
    if not 0.0 < capacity < 1.0:
        raise ValueError(f"capacity must lie in (0, 1), got {capacity}")
    lo, hi = 1e-3, 1e3  # capacity(lo) ~ 1, capacity(hi) ~ 0
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        cap = biawgn_capacity(mid)
        if abs(cap - capacity) <= tol:
            return float(mid)
        if cap > capacity:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))


def snr_for_modulation_capacity(c: Constellation, target: float, lo_db: float = -25.0, hi_db: float = 40.0) -> float:
    """Es/N0 (dB) at which I(X;Y) equals ``target`` (bisection; monotone in SNR)."""
    if not 0.0 < target < c.k:
        raise ValueError(f"target capacity must lie in (0, {c.k})")
    lo, hi = lo_db, hi_db
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if modulation_capacity(c, AwgnSpec.from_snr_db_es(mid)) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# First-order polarization of marginal bit channels (Monte-Carlo)
# ---------------------------------------------------------------------------

def polarized_pair_mi(bits_a, llrs_a, bits_b, llrs_b) -> tuple:
    """(I(W-), I(W+)) of one polar step over two binary-channel sample sets.

    Samples are (transmitted bit, LLR toward bit 0) draws.  The step maps
    (u1, u2) -> (u1 ^ u2, u2) with the XOR observed through channel a.
    """
    bits_a = np.asarray(bits_a)
    bits_b = np.asarray(bits_b)
    u1 = bits_a ^ bits_b
    u2 = bits_b
    l_minus = boxplus(np.asarray(llrs_a), np.asarray(llrs_b))
    l_plus = np.asarray(llrs_b) + (1 - 2 * u1) * np.asarray(llrs_a)
    # I = E[1 - log2(1 + exp(-LLR toward the true bit))], exact for uniform inputs
    i_minus = 1.0 - np.mean(np.logaddexp(0.0, -(1 - 2 * u1) * l_minus)) / _LN2
    i_plus = 1.0 - np.mean(np.logaddexp(0.0, -(1 - 2 * u2) * l_plus)) / _LN2
    return float(i_minus), float(i_plus)


def _sample_marginal_bit_channel(c: Constellation, spec: AwgnSpec, level: int, n: int, rng: np.random.Generator):
    lab = c.label_bits()
    groups = [np.flatnonzero(lab[:, level] == v) for v in (0, 1)]
    bits = rng.integers(0, 2, size=n)
    pick = rng.integers(0, len(groups[0]), size=n)
    idx = np.where(bits == 0, groups[0][pick], groups[1][pick])
    y = c.amplitudes[idx] + spec.noise_std * rng.standard_normal(n)
    km = np.zeros((1, c.k), dtype=bool)
    kb = np.zeros((1, c.k), dtype=np.int8)
    llr = conditional_llr_array(c, y[None, :], spec, kb[:, None, :], km[:, None, :],
                                np.full(n, level, dtype=np.int64))[0]
    return bits, llr


def pbp_first_order_capacities(
    c: Constellation,
    spec: AwgnSpec,
    pairing,
    n_samples: int = 200_000,
    seed: int = 0,
) -> list:
    """Monte-Carlo (I(W-), I(W+)) for each pair of marginal bit-channel levels."""
    pairing = [(int(a), int(b)) for a, b in pairing]
    for a, b in pairing:
        if not (0 <= a < c.k and 0 <= b < c.k):
            raise ConfigurationError(f"invalid level pair ({a}, {b})")
    cache = {}
    out = []
    for a, b in pairing:
        if (a, b) not in cache:
            rng = np.random.Generator(np.random.Philox(key=np.array([seed, a * c.k + b], dtype=np.uint64)))
            ba, la = _sample_marginal_bit_channel(c, spec, a, n_samples, rng)
            bb, lb = _sample_marginal_bit_channel(c, spec, b, n_samples, rng)
            cache[(a, b)] = polarized_pair_mi(ba, la, bb, lb)
        out.append(cache[(a, b)])
    return out


def capacity_table_rows(c: Constellation, name: str, snr_db_points, order) -> list:
    """CSV rows (constellation, snr_db, order, level, capacity); level -1 is I(X;Y)."""
    order = tuple(int(v) for v in order)
    order_txt = "".join(str(v) for v in order)
    rows = []
    for snr_db in snr_db_points:
        spec = AwgnSpec.from_snr_db_es(snr_db)
        caps = sbp_bit_capacities(c, spec, order)
        rows.append((name, snr_db, order_txt, -1, caps.total))
        for j, cap in enumerate(caps.per_level):
            rows.append((name, snr_db, order_txt, j, float(cap)))
    return rows
