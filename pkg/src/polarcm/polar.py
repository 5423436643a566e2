"""Polar transform, encoder, SC decoder, and the subcode decomposition.

Stage convention is the natural (non-bit-reversed) recursion: stage t
butterflies act inside contiguous blocks of size 2^t, combining element i of
the block's first half with element i of its second half.  With this ordering
the first s stages act independently on contiguous blocks of length 2^s, so
contiguous input ranges form subcodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .llr_ops import boxplus, clip_llr


def _check_power_of_two(n: int, what: str = "length") -> int:
    if n < 2 or n & (n - 1):
        raise ConfigurationError(f"{what} must be a power of two >= 2, got {n}")
    return int(n).bit_length() - 1


@dataclass
class PolarCode:
    """Block length, frozen mask (True = frozen to 0), and design metadata."""

    frozen: np.ndarray
    design_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frozen = np.asarray(self.frozen, dtype=bool)
        _check_power_of_two(self.frozen.size, "block length")

    @property
    def n_bits(self) -> int:
        return self.frozen.size

    @property
    def n_stages(self) -> int:
        return self.frozen.size.bit_length() - 1

    @property
    def k_info(self) -> int:
        return int(self.frozen.size - np.count_nonzero(self.frozen))

    @property
    def info_positions(self) -> np.ndarray:
        return np.flatnonzero(~self.frozen)

    def to_json(self) -> str:
        return json.dumps(
            {
                "N": self.n_bits,
                "frozen_indices": np.flatnonzero(self.frozen).tolist(),
                "design_meta": self.design_meta,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "PolarCode":
        d = json.loads(text)
        frozen = np.zeros(int(d["N"]), dtype=bool)
        frozen[np.asarray(d.get("frozen_indices", []), dtype=int)] = True
        return cls(frozen=frozen, design_meta=dict(d.get("design_meta", {})))


@dataclass
class SubcodeSet:
    """Contiguous-range subcodes of a parent code; member j covers inputs [jQ, (j+1)Q)."""

    parent: PolarCode
    count: int
    members: list


def polar_transform(bits, stages: int | None = None) -> np.ndarray:
    """Apply the first ``stages`` stages of the recursive transform (default: all).

    Operates on the last axis; leading axes are batch dimensions.  Applying the
    same stage count twice is the identity (GF(2) involution).
    """
    b = np.array(bits, dtype=np.int8, copy=True) & 1
    n_bits = b.shape[-1]
    n = _check_power_of_two(n_bits)
    s = n if stages is None else int(stages)
    if not 0 <= s <= n:
        raise ConfigurationError(f"stages must be in [0, {n}], got {s}")
    lead = b.shape[:-1]
    for t in range(1, s + 1):
        width = 1 << t
        v = b.reshape(lead + (n_bits // width, 2, width // 2))
        v[..., 0, :] ^= v[..., 1, :]
    return b


def encode(code: PolarCode, info_bits, stages: int | None = None) -> np.ndarray:
    """Scatter info bits into non-frozen positions and run the transform."""
    info_bits = np.asarray(info_bits, dtype=np.int8)
    if info_bits.shape[-1] != code.k_info:
        raise ConfigurationError(f"expected {code.k_info} info bits, got {info_bits.shape[-1]}")
    u = np.zeros(info_bits.shape[:-1] + (code.n_bits,), dtype=np.int8)
    u[..., code.info_positions] = info_bits
    return polar_transform(u, stages)


def make_subcodes(code: PolarCode, k_prime: int) -> SubcodeSet:
    """Split a code into k' in {2, 4} contiguous subcodes of length N/k'."""
    if k_prime not in (2, 4):
        raise ConfigurationError(f"subcode count must be 2 or 4, got {k_prime}")
    if code.n_bits % k_prime or code.n_bits // k_prime < 2:
        raise ConfigurationError(f"cannot split N={code.n_bits} into {k_prime} subcodes")
    q = code.n_bits // k_prime
    members = [PolarCode(frozen=code.frozen[j * q : (j + 1) * q].copy()) for j in range(k_prime)]
    return SubcodeSet(parent=code, count=k_prime, members=members)


def sc_engine(frozen: np.ndarray, llrs: np.ndarray, genie_bits: np.ndarray | None = None):
    """Batched successive cancellation over (B, N) LLRs.

    Returns (u0, coded, errors): input-side decisions, re-encoded codeword, and
    per-position would-be-error flags (all False unless ``genie_bits`` forces
    decisions to the true bits).
    """
    frozen = np.asarray(frozen, dtype=bool)
    n_bits = frozen.size
    llrs = clip_llr(np.asarray(llrs, dtype=float))
    batch = llrs.shape[0]
    u0 = np.zeros((batch, n_bits), dtype=np.int8)
    errors = np.zeros((batch, n_bits), dtype=bool)

    def rec(llr: np.ndarray, lo: int, hi: int) -> np.ndarray:
        width = hi - lo
        if width == 1:
            if frozen[lo]:
                d = np.zeros(batch, dtype=np.int8)
            else:
                d = (llr[:, 0] < 0).astype(np.int8)  # tie (LLR == 0) decides 0
            if genie_bits is not None:
                truth = genie_bits[:, lo].astype(np.int8)
                errors[:, lo] = d != truth
                d = truth
            u0[:, lo] = d
            return d[:, None]
        h = width // 2
        la = boxplus(llr[:, :h], llr[:, h:])
        c1 = rec(la, lo, lo + h)
        lb = clip_llr(llr[:, h:] + (1 - 2 * c1.astype(float)) * llr[:, :h])
        c2 = rec(lb, lo + h, hi)
        return np.concatenate([c1 ^ c2, c2], axis=1)

    coded = rec(llrs, 0, n_bits)
    return u0, coded, errors


def sc_decode(code: PolarCode, channel_llrs) -> tuple:
    """SC decode; returns (info_bits, re-encoded coded bits).

    Sign convention: LLR > 0 means bit 0 is more likely.  Accepts an (N,) LLR
    vector or a (B, N) batch; output shapes follow the input.
    """
    llrs = np.asarray(channel_llrs, dtype=float)
    single = llrs.ndim == 1
    if single:
        llrs = llrs[None, :]
    if llrs.shape[-1] != code.n_bits:
        raise ConfigurationError(f"expected {code.n_bits} LLRs, got {llrs.shape[-1]}")
    u0, coded, _ = sc_engine(code.frozen, llrs)
    info = u0[:, code.info_positions]
    if single:
        return info[0], coded[0]
    return info, coded
