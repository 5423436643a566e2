"""GA density evolution over non-identical channels, BLER estimates, and
frozen-set construction (DE-based and genie-aided Monte-Carlo)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .channel_metrics import AwgnSpec, equivalent_biawgn_sigma
from .errors import ConfigurationError, SearchError
from .polar import PolarCode, polar_transform, sc_engine

_PHI_SPLIT = 10.0
_PHI_MEAN_MAX = 6000.0  # means beyond this are numerically perfect channels


def _phi_exp(m):
    return np.exp(0.0218 - 0.4527 * np.asarray(m, dtype=float) ** 0.86)


def _phi_tail(m):
    m = np.asarray(m, dtype=float)
    return np.sqrt(np.pi / m) * np.exp(-m / 4.0) * (1.0 - 10.0 / (7.0 * m))


# Scale the tail so phi is continuous (hence invertible) at the split point.
_PHI_TAIL_SCALE = float(_phi_exp(_PHI_SPLIT) / _phi_tail(_PHI_SPLIT))
_PHI_AT_SPLIT = float(_phi_exp(_PHI_SPLIT))


def phi(m):
    """1 - E[tanh(L/2)] under the Gaussian LLR approximation; phi(0) = 1."""
    m = np.asarray(m, dtype=float)
    small = np.minimum(1.0, _phi_exp(np.maximum(m, 1e-300)))
    with np.errstate(over="ignore", invalid="ignore"):
        large = _PHI_TAIL_SCALE * _phi_tail(np.maximum(m, _PHI_SPLIT))
    out = np.where(m < _PHI_SPLIT, small, large)
    return np.where(m <= 0.0, 1.0, out)


def phi_inv(z):
    """Inverse of :func:`phi`; exact algebraic inverse below the split point,
    bisection on the tail branch above it.  phi_inv(1) = 0."""
    z = np.asarray(z, dtype=float)
    zc = np.clip(z, 1e-300, 1.0)
    # exp branch: z = exp(0.0218 - 0.4527 m^0.86)
    m = ((0.0218 - np.log(zc)) / 0.4527) ** (1.0 / 0.86)
    m = np.where(zc >= 1.0, 0.0, m)
    tail = zc < _PHI_AT_SPLIT
    if np.any(tail):
        zt = zc[tail]
        lo = np.full(zt.shape, _PHI_SPLIT)
        hi = np.full(zt.shape, _PHI_MEAN_MAX)
        for _ in range(44):
            mid = 0.5 * (lo + hi)
            above = _PHI_TAIL_SCALE * _phi_tail(mid) > zt
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        if m.shape:
            m[tail] = 0.5 * (lo + hi)
        else:
            m = 0.5 * (lo + hi)
    return m if m.shape else float(m)


def check_node_mean(ma, mb):
    """GA mean-LLR update for the check (f) side of one polar butterfly."""
    z = 1.0 - (1.0 - phi(ma)) * (1.0 - phi(mb))
    return phi_inv(z)


def qfunc(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


@dataclass
class ChannelProfile:
    """Mean LLR of the equivalent BI-AWGN seen by each coded-bit position."""

    means: np.ndarray

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        if np.any(self.means < 0):
            raise ConfigurationError("profile means must be non-negative")

    @classmethod
    def uniform(cls, mean: float, n: int) -> "ChannelProfile":
        return cls(means=np.full(n, float(mean)))


_MEAN_CACHE: dict = {}


def mean_llr_for_capacity(capacity: float) -> float:
    """Mean LLR (2/sigma^2) of the equivalent BI-AWGN channel for a capacity."""
    capacity = float(min(max(capacity, 1e-12), 1.0 - 1e-12))
    if capacity not in _MEAN_CACHE:
        sigma = equivalent_biawgn_sigma(capacity)
        _MEAN_CACHE[capacity] = 2.0 / sigma**2
    return _MEAN_CACHE[capacity]


def de_means(means: np.ndarray, stages: int) -> np.ndarray:
    """Propagate per-position mean LLRs backward through ``stages`` polar stages.

    ``means`` indexes coded-bit positions on the last axis; leading axes are
    batch dimensions.  Output indexes u(0) positions.
    """
    m = np.array(means, dtype=float, copy=True)
    n_bits = m.shape[-1]
    lead = m.shape[:-1]
    for t in range(stages, 0, -1):
        width = 1 << t
        v = m.reshape(lead + (n_bits // width, 2, width // 2))
        a = v[..., 0, :].copy()
        b = v[..., 1, :]
        v[..., 0, :] = check_node_mean(a, b)
        v[..., 1, :] = a + b
    return m


@dataclass
class DeResult:
    info_means: np.ndarray
    per_bit_error: np.ndarray
    bler_estimate: float


def _bler_from_pe(pe: np.ndarray, frozen: np.ndarray) -> np.ndarray:
    picked = np.where(frozen, 0.0, pe)
    log_ok = np.sum(np.log1p(-np.minimum(picked, 1.0 - 1e-300)), axis=-1)
    return -np.expm1(log_ok)


def de_evolve(code: PolarCode, profile: ChannelProfile, stages: int | None = None) -> DeResult:
    """GA-DE over the given stage count (default: the full transform)."""
    stages = code.n_stages if stages is None else int(stages)
    if profile.means.shape[-1] != code.n_bits:
        raise ConfigurationError(f"profile length {profile.means.shape[-1]} != N={code.n_bits}")
    info_means = de_means(profile.means, stages)
    pe = qfunc(np.sqrt(info_means / 2.0))
    return DeResult(
        info_means=info_means,
        per_bit_error=pe,
        bler_estimate=float(_bler_from_pe(pe, code.frozen)),
    )


def estimate_bler(code: PolarCode, profile: ChannelProfile, stages: int | None = None) -> float:
    """Union-style SC BLER estimate over the fixed (not re-selected) frozen set."""
    return de_evolve(code, profile, stages).bler_estimate


def estimate_bler_batch(frozen: np.ndarray, means_batch: np.ndarray, stages: int) -> np.ndarray:
    """Vectorized :func:`estimate_bler` over a (B, N) batch of profiles."""
    pe = qfunc(np.sqrt(de_means(means_batch, stages) / 2.0))
    return _bler_from_pe(pe, np.asarray(frozen, dtype=bool))


def construct_gade(N: int, K: int, profile: ChannelProfile, stages: int | None = None,
                   design_meta: dict | None = None) -> PolarCode:
    """Freeze the N-K positions with the smallest DE mean LLRs (ties: lower index wins)."""
    if not 0 <= K <= N:
        raise ConfigurationError(f"K={K} out of range for N={N}")
    scratch = PolarCode(frozen=np.zeros(N, dtype=bool))
    stages = scratch.n_stages if stages is None else int(stages)
    means = de_means(profile.means, stages)
    order = np.argsort(-means, kind="stable")  # stable: equal means keep lower index first
    frozen = np.ones(N, dtype=bool)
    frozen[order[:K]] = False
    meta = {"method": "gade"}
    meta.update(design_meta or {})
    return PolarCode(frozen=frozen, design_meta=meta)


def construct_montecarlo(N: int, K: int, spec: AwgnSpec, trials: int, seed: int,
                         batch_size: int = 256) -> PolarCode:
    """Genie-aided first-error counting over BPSK/AWGN; keep the K most reliable positions."""
    if trials < 1000:
        raise ConfigurationError("Monte-Carlo construction needs at least 1000 trials")
    counts = np.zeros(N, dtype=np.int64)
    done = 0
    batch_index = 0
    while done < trials:
        b = min(batch_size, trials - done)
        rng = np.random.Generator(np.random.Philox(key=np.array([seed, batch_index], dtype=np.uint64)))
        u = rng.integers(0, 2, size=(b, N), dtype=np.int8)
        x = 2.0 * polar_transform(u) - 1.0  # bit 0 -> -1
        y = x + spec.noise_std * rng.standard_normal((b, N))
        llr = -2.0 * y / spec.variance
        _, _, err = sc_engine(np.zeros(N, dtype=bool), llr, genie_bits=u)
        counts += err.sum(axis=0)
        done += b
        batch_index += 1
    order = np.argsort(counts, kind="stable")
    frozen = np.ones(N, dtype=bool)
    frozen[order[:K]] = False
    return PolarCode(
        frozen=frozen,
        design_meta={"method": "montecarlo", "snr_db_es": spec.snr_db_es,
                     "seed": seed, "trials": trials},
    )


def bpsk_profile(spec: AwgnSpec, n: int) -> ChannelProfile:
    """Uniform profile of the raw BPSK channel: mean LLR 2/sigma^2."""
    return ChannelProfile.uniform(2.0 / spec.variance, n)


def design_snr_search(
    N: int,
    K: int,
    target_bler: float,
    channel_profile_fn,
    snr_lo_db: float = -10.0,
    snr_hi_db: float = 30.0,
    resolution_db: float = 0.05,
    stages: int | None = None,
):
    """Lowest SNR (to ``resolution_db``) whose GA-DE-constructed code meets the target.

    ``channel_profile_fn(snr_db) -> ChannelProfile``.  Returns (snr_db, code).
    """
    if not 0.0 < target_bler <= 1.0:
        raise ConfigurationError("target BLER must lie in (0, 1]")

    def attempt(snr_db):
        profile = channel_profile_fn(snr_db)
        code = construct_gade(N, K, profile, stages)
        return code, estimate_bler(code, profile, stages)

    code_hi, bler_hi = attempt(snr_hi_db)
    if bler_hi > target_bler:
        raise SearchError(
            f"BLER target {target_bler} unreachable at {snr_hi_db} dB (estimate {bler_hi:.3g})"
        )
    code_lo, bler_lo = attempt(snr_lo_db)
    if bler_lo <= target_bler:
        return snr_lo_db, code_lo
    lo, hi, best = snr_lo_db, snr_hi_db, code_hi
    while hi - lo > resolution_db:
        mid = 0.5 * (lo + hi)
        code_mid, bler_mid = attempt(mid)
        if bler_mid <= target_bler:
            hi, best = mid, code_mid
        else:
            lo = mid
    return hi, best
