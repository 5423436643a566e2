"""Real ASK constellations with Gray and set-partition bit labelings."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigurationError

SUPPORTED_K = (1, 2, 3, 4)


class Labeling(str, Enum):
    GRAY = "gray"
    SET_PARTITION = "set_partition"


def _gray_label(index: int, k: int) -> int:
    # Packed label of amplitude index: bit j of the result is b_j, with b_0
    # taken as the leading (most significant) bit of the reflected Gray word.
    g = index ^ (index >> 1)
    out = 0
    for j in range(k):
        out |= ((g >> (k - 1 - j)) & 1) << j
    return out


@dataclass(frozen=True)
class Constellation:
    """2^k equally spaced real amplitudes plus a bijective k-bit labeling.

    ``amplitudes`` are stored most-negative first and normalized to unit
    average energy.  ``label_table[i]`` is the packed label of amplitude
    index ``i`` (bit j of the integer is label bit b_j).  b_0 is the first
    bit in the per-symbol decode chain.
    """

    k: int
    amplitudes: np.ndarray
    label_table: np.ndarray
    labeling_kind: Labeling
    _index_of_label: np.ndarray = field(init=False, repr=False)
    _label_bits: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = 1 << self.k
        if self.amplitudes.shape != (m,) or self.label_table.shape != (m,):
            raise ConfigurationError("amplitudes/label_table must have 2^k entries")
        if sorted(self.label_table.tolist()) != list(range(m)):
            raise ConfigurationError("label_table is not a bijection")
        inv = np.empty(m, dtype=np.int64)
        inv[self.label_table] = np.arange(m)
        bits = (self.label_table[:, None] >> np.arange(self.k)[None, :]) & 1
        self.amplitudes.setflags(write=False)
        self.label_table.setflags(write=False)
        object.__setattr__(self, "_index_of_label", inv)
        object.__setattr__(self, "_label_bits", bits.astype(np.int8))
        self._index_of_label.setflags(write=False)
        self._label_bits.setflags(write=False)

    @property
    def size(self) -> int:
        return 1 << self.k

    def label_bits(self) -> np.ndarray:
        """(2^k, k) array; row i holds the label bits (b_0..b_{k-1}) of amplitude i."""
        return self._label_bits

    def pack_bits(self, bits) -> int:
        bits = tuple(int(b) for b in bits)
        if len(bits) != self.k:
            raise ValueError(f"expected {self.k} bits, got {len(bits)}")
        if any(b not in (0, 1) for b in bits):
            raise ValueError("bits must be 0/1")
        return sum(b << j for j, b in enumerate(bits))

    def index_of_packed(self, packed) -> np.ndarray:
        """Amplitude index for packed label(s); accepts scalars or arrays."""
        return self._index_of_label[packed]

    def map_bits(self, bits) -> float:
        """Amplitude carrying the given k-bit tuple."""
        return float(self.amplitudes[self._index_of_label[self.pack_bits(bits)]])

    def map_labels(self, packed: np.ndarray) -> np.ndarray:
        """Vectorized map of packed labels to amplitudes."""
        return self.amplitudes[self._index_of_label[packed]]

    def demap_point(self, x: float) -> tuple:
        """Label bits of the nearest amplitude; exact inverse of map_bits."""
        idx = int(np.argmin(np.abs(self.amplitudes - x)))
        packed = int(self.label_table[idx])
        return tuple((packed >> j) & 1 for j in range(self.k))

    def to_json(self) -> str:
        return json.dumps(
            {
                "k": self.k,
                "labeling_kind": self.labeling_kind.value,
                "amplitudes": self.amplitudes.tolist(),
                "label_table": self.label_table.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Constellation":
        d = json.loads(text)
        return cls(
            k=int(d["k"]),
            amplitudes=np.asarray(d["amplitudes"], dtype=float),
            label_table=np.asarray(d["label_table"], dtype=np.int64),
            labeling_kind=Labeling(d["labeling_kind"]),
        )


def make_ask(k: int, labeling_kind: Labeling = Labeling.SET_PARTITION) -> Constellation:
    """Unit-energy 2^k-ASK with the requested labeling.

    Set-partition labeling is the natural binary encoding of the amplitude
    index (b_0 = least significant bit), which doubles the minimum intra-subset
    distance with each fixed bit.  Gray labeling is the binary-reflected code
    over amplitude indices.
    """
    if k not in SUPPORTED_K:
        raise ConfigurationError(f"unsupported bits/symbol: {k} (supported: {SUPPORTED_K})")
    labeling_kind = Labeling(labeling_kind)
    m = 1 << k
    levels = 2.0 * np.arange(m) - (m - 1)
    amplitudes = levels / np.sqrt(np.mean(levels**2))
    if labeling_kind is Labeling.SET_PARTITION:
        table = np.arange(m, dtype=np.int64)
    else:
        table = np.array([_gray_label(i, k) for i in range(m)], dtype=np.int64)
    return Constellation(k=k, amplitudes=amplitudes, label_table=table, labeling_kind=labeling_kind)
