"""Per-symbol decode-order permutations, BPCM symbol mapping with MLC
feedback, the greedy permutation designer, and the three-level (8-ASK)
four-subcode layout with selective polarization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations
from math import factorial

import numpy as np

from .channel_metrics import AwgnSpec, bit_level_capacity, conditional_llr_array
from .constellation import Constellation
from .construction import (
    ChannelProfile,
    check_node_mean,
    estimate_bler_batch,
    mean_llr_for_capacity,
)
from .errors import ConfigurationError
from .llr_ops import boxplus, clip_llr
from .polar import PolarCode, make_subcodes, sc_decode

_SLOTS_FOR_CATALOG_SIZE = {2: 2, 6: 3, 24: 4}


def bpcm_catalog(k_prime: int) -> list:
    """All k'! decode-order permutations; entry[level] = slot mapped to that level.

    Index 0 is the identity (the conventional order P1: slot j on level j).
    """
    if k_prime not in (2, 3, 4):
        raise ConfigurationError(f"unsupported slot count {k_prime}")
    return list(permutations(range(k_prime)))


@dataclass
class BitPermutationMap:
    """Per-modulation-symbol choice of decode-order permutation."""

    n_symbols: int
    catalog: list
    perm_ids: np.ndarray

    def __post_init__(self):
        self.perm_ids = np.asarray(self.perm_ids, dtype=np.int64)
        if self.perm_ids.shape != (self.n_symbols,):
            raise ConfigurationError("perm_ids length must equal n_symbols")
        if self.perm_ids.size and (self.perm_ids.min() < 0 or self.perm_ids.max() >= len(self.catalog)):
            raise ConfigurationError("perm_id outside catalog")

    @property
    def catalog_size(self) -> int:
        return len(self.catalog)

    @property
    def n_slots(self) -> int:
        return len(self.catalog[0])

    def entries(self) -> np.ndarray:
        """(n_symbols, n_slots) table; row i is catalog[perm_ids[i]]."""
        return np.asarray(self.catalog, dtype=np.int64)[self.perm_ids]

    @classmethod
    def all_p1(cls, n_symbols: int, n_slots: int) -> "BitPermutationMap":
        return cls(n_symbols=n_symbols, catalog=bpcm_catalog(n_slots),
                   perm_ids=np.zeros(n_symbols, dtype=np.int64))

    def to_json(self) -> str:
        return json.dumps(
            {"n_symbols": self.n_symbols, "catalog_size": self.catalog_size,
             "perm_ids": self.perm_ids.tolist()},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "BitPermutationMap":
        d = json.loads(text)
        size = int(d["catalog_size"])
        if size not in _SLOTS_FOR_CATALOG_SIZE:
            raise ConfigurationError(f"catalog size {size} is not a supported k'!")
        return cls(
            n_symbols=int(d["n_symbols"]),
            catalog=bpcm_catalog(_SLOTS_FOR_CATALOG_SIZE[size]),
            perm_ids=np.asarray(d["perm_ids"], dtype=np.int64),
        )


# ---------------------------------------------------------------------------
# Three-level layout for four subcodes (8-ASK)
# ---------------------------------------------------------------------------

def _even_pick(total: int, count: int) -> np.ndarray:
    """Boolean mask selecting ``count`` of ``total`` indices, evenly spread."""
    idx = np.arange(total)
    return ((idx + 1) * count) // total > (idx * count) // total


@dataclass
class EightAskLayout:
    """Slot geometry mapping four subcodes onto three bit levels.

    Subcode 0 fills the lowest level; subcode 1 splits between the lowest and
    middle levels; subcodes 2 and 3 fill the remaining middle/high slots.
    Same-index bits of subcodes (0,1) and (2,3) that share a level are joined
    by one extra 2x2 polar kernel (the first-listed member carries the XOR);
    unused high-level slots of the last symbols carry known zeros.
    """

    n_coded_bits: int
    n_symbols: int
    slot_subcode: np.ndarray   # (S, 3); -1 = filler
    slot_index: np.ndarray     # (S, 3); within-subcode index, -1 = filler
    pos_symbol: np.ndarray     # (N,)
    pos_level: np.ndarray      # (N,) nominal level
    pair_partner: np.ndarray   # (N,); -1 if unpaired
    pair_role: np.ndarray      # (N,); 0 none, 1 xor carrier, 2 direct
    polar_pairs: list = field(default_factory=list)
    filler_slots: list = field(default_factory=list)

    @property
    def subcode_length(self) -> int:
        return self.n_coded_bits // 4

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_coded_bits": self.n_coded_bits,
                "n_symbols": self.n_symbols,
                "slot_assignment": [
                    [[int(self.slot_subcode[t, l]), int(self.slot_index[t, l])] for l in range(3)]
                    for t in range(self.n_symbols)
                ],
                "polar_pairs": [[int(a), int(b)] for a, b in self.polar_pairs],
                "filler_positions": [[int(t), int(l)] for t, l in self.filler_slots],
            },
            sort_keys=True,
        )


def build_8ask_layout(n_coded_bits: int) -> EightAskLayout:
    """Deterministic Fig-style layout for four subcodes over three bit levels."""
    n = int(n_coded_bits)
    if n % 4:
        raise ConfigurationError(f"coded-bit count must be divisible by 4, got {n}")
    q = n // 4
    s = -(-n // 3)  # symbols
    n_fill = 3 * s - n
    s2_lo = s - q          # subcode-1 bits on the lowest level
    s2_mid = q - s2_lo
    s3_mid = s - s2_mid
    s3_hi = q - s3_mid
    if s2_lo < 0 or s2_mid < 0 or s3_hi < 0 or s3_mid > q:
        raise ConfigurationError(f"N={n} too small for the three-level layout")

    s2_lo_mask = _even_pick(q, s2_lo)
    s3_hi_mask = _even_pick(q, s3_hi)

    streams = [
        [(0, i) for i in range(q)] + [(1, i) for i in np.flatnonzero(s2_lo_mask)],
        [(1, i) for i in np.flatnonzero(~s2_lo_mask)] + [(2, i) for i in np.flatnonzero(~s3_hi_mask)],
        [(2, i) for i in np.flatnonzero(s3_hi_mask)] + [(3, i) for i in range(q)],
    ]
    slot_subcode = np.full((s, 3), -1, dtype=np.int8)
    slot_index = np.full((s, 3), -1, dtype=np.int64)
    pos_symbol = np.empty(n, dtype=np.int64)
    pos_level = np.empty(n, dtype=np.int64)
    filler_slots = []
    for level, stream in enumerate(streams):
        for t, (sub, idx) in enumerate(stream):
            slot_subcode[t, level] = sub
            slot_index[t, level] = idx
            pos_symbol[sub * q + idx] = t
            pos_level[sub * q + idx] = level
        for t in range(len(stream), s):
            filler_slots.append((t, level))

    pair_partner = np.full(n, -1, dtype=np.int64)
    pair_role = np.zeros(n, dtype=np.int8)
    polar_pairs = []
    for first_sub, mask in ((0, s2_lo_mask), (2, s3_hi_mask)):
        for i in np.flatnonzero(mask):
            a = first_sub * q + int(i)
            b = (first_sub + 1) * q + int(i)
            pair_partner[a], pair_partner[b] = b, a
            pair_role[a], pair_role[b] = 1, 2
            polar_pairs.append((a, b))

    return EightAskLayout(
        n_coded_bits=n, n_symbols=s,
        slot_subcode=slot_subcode, slot_index=slot_index,
        pos_symbol=pos_symbol, pos_level=pos_level,
        pair_partner=pair_partner, pair_role=pair_role,
        polar_pairs=polar_pairs, filler_slots=filler_slots,
    )


def layout_coverage_ok(layout: EightAskLayout) -> bool:
    """Every coded bit feeds exactly one slot, and slots+fillers tile all symbols."""
    seen = np.zeros(layout.n_coded_bits, dtype=int)
    q = layout.subcode_length
    for t in range(layout.n_symbols):
        for level in range(3):
            sub = layout.slot_subcode[t, level]
            if sub >= 0:
                seen[sub * q + layout.slot_index[t, level]] += 1
    n_slots = int(np.count_nonzero(layout.slot_subcode >= 0))
    return bool(np.all(seen == 1)) and n_slots + len(layout.filler_slots) == 3 * layout.n_symbols


# ---------------------------------------------------------------------------
# Mapping and MLC reception
# ---------------------------------------------------------------------------

def _as_slot_array(subcode_bits) -> np.ndarray:
    arr = np.asarray(subcode_bits, dtype=np.int8)
    if arr.ndim < 2:
        raise ConfigurationError("subcode bits must be one vector per decode slot")
    return arr


def bpcm_map(subcode_bits, pmap: BitPermutationMap, c: Constellation,
             layout: EightAskLayout | None = None) -> np.ndarray:
    """Map per-subcode coded bits to modulation amplitudes.

    ``subcode_bits``: (k', ..., Q).  For symbol i with catalog entry e, label
    level j carries subcode e[j]'s bit i; with a layout, the slot geometry
    (selective-polarization XORs, zero fillers) is applied first.
    """
    bits = _as_slot_array(subcode_bits)
    if layout is not None:
        return _bpcm_map_layout(bits, pmap, c, layout)
    kp = bits.shape[0]
    if kp != c.k or pmap.n_slots != kp:
        raise ConfigurationError("slot count must match bits/symbol for the direct mapping")
    q = bits.shape[-1]
    if q != pmap.n_symbols:
        raise ConfigurationError(f"expected {pmap.n_symbols} bits per subcode, got {q}")
    ent = pmap.entries()  # (S, k)
    vals = np.moveaxis(bits, 0, -1)  # (..., S, k'): slot axis last
    idx = np.broadcast_to(ent, vals.shape[:-2] + ent.shape)
    level_bits = np.take_along_axis(vals, idx, axis=-1)  # (..., S, k): level j <- slot ent[:, j]
    packed = np.zeros(level_bits.shape[:-1], dtype=np.int64)
    for j in range(c.k):
        packed |= level_bits[..., j].astype(np.int64) << j
    return c.map_labels(packed)


def _layout_actual_levels(pmap: BitPermutationMap, layout: EightAskLayout):
    ent = pmap.entries()  # (S, 3): actual level j <- nominal stream ent[:, j]
    act = np.argsort(ent, axis=1)  # act[t, nominal] = actual level
    pos_act = act[layout.pos_symbol, layout.pos_level]
    return act, pos_act


def _bpcm_map_layout(bits: np.ndarray, pmap: BitPermutationMap, c: Constellation,
                     layout: EightAskLayout) -> np.ndarray:
    if c.k != 3 or pmap.n_slots != 3:
        raise ConfigurationError("the four-subcode layout maps onto three bit levels")
    if bits.shape[0] != 4 or bits.shape[-1] != layout.subcode_length:
        raise ConfigurationError("layout mapping expects four subcodes of length N/4")
    if pmap.n_symbols != layout.n_symbols:
        raise ConfigurationError("permutation map sized for a different layout")
    lead = bits.shape[1:-1]
    vals = np.concatenate([bits[j] for j in range(4)], axis=-1)  # (..., N)
    for a, b in layout.polar_pairs:
        vals[..., a] ^= vals[..., b]
    _, pos_act = _layout_actual_levels(pmap, layout)
    labels = np.zeros(lead + (layout.n_symbols, 3), dtype=np.int8)
    labels[..., layout.pos_symbol, pos_act] = vals
    packed = np.zeros(lead + (layout.n_symbols,), dtype=np.int64)
    for j in range(3):
        packed |= labels[..., j].astype(np.int64) << j
    return c.map_labels(packed)


def _resolve_members(code_or_members, k_prime: int):
    if isinstance(code_or_members, PolarCode):
        return make_subcodes(code_or_members, k_prime).members
    members = list(code_or_members)
    if len(members) != k_prime:
        raise ConfigurationError(f"expected {k_prime} member codes, got {len(members)}")
    return members


def mlc_receive(y, pmap: BitPermutationMap, code_or_members, c: Constellation,
                spec: AwgnSpec, layout: EightAskLayout | None = None,
                genie_feedback=None):
    """Multistage reception: demap one decode slot at a time with feedback.

    ``code_or_members`` is either the parent polar code (split into contiguous
    subcodes) or an explicit list of per-slot codes (level codes).  When
    ``genie_feedback`` (list of true member codewords) is given, feedback uses
    the true bits while decisions are still recorded.  Returns concatenated
    info bits, shaped (..., sum k_info).
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    if single:
        y = y[None, :]
    if layout is not None:
        out = _mlc_receive_layout(y, pmap, code_or_members, c, spec, layout, genie_feedback)
    else:
        out = _mlc_receive_direct(y, pmap, code_or_members, c, spec, genie_feedback)
    return out[0] if single else out


def _mlc_receive_direct(y, pmap, code_or_members, c, spec, genie_feedback):
    kp = pmap.n_slots
    if kp != c.k:
        raise ConfigurationError("slot count must match bits/symbol")
    members = _resolve_members(code_or_members, kp)
    n_sym = pmap.n_symbols
    if y.shape[-1] != n_sym or any(m.n_bits != n_sym for m in members):
        raise ConfigurationError("symbol count does not match the permutation map")
    batch = y.shape[0]
    ent = pmap.entries()
    level_of = np.argsort(ent, axis=1)  # level_of[i, slot]
    known_bits = np.zeros((batch, n_sym, c.k), dtype=np.int8)
    known_mask = np.zeros((n_sym, c.k), dtype=bool)
    sym_idx = np.arange(n_sym)
    infos = []
    for s, member in enumerate(members):
        tgt = level_of[:, s]
        llr = conditional_llr_array(c, y, spec, known_bits, known_mask, tgt)
        info, coded = sc_decode(member, clip_llr(llr))
        infos.append(info)
        feedback = coded if genie_feedback is None else np.broadcast_to(
            np.asarray(genie_feedback[s], dtype=np.int8), coded.shape)
        known_bits[:, sym_idx, tgt] = feedback
        known_mask[sym_idx, tgt] = True
    return np.concatenate(infos, axis=-1)


def _mlc_receive_layout(y, pmap, code_or_members, c, spec, layout, genie_feedback):
    if c.k != 3 or pmap.n_slots != 3:
        raise ConfigurationError("layout reception needs a 3-bit constellation")
    members = _resolve_members(code_or_members, 4)
    q = layout.subcode_length
    if any(m.n_bits != q for m in members) or y.shape[-1] != layout.n_symbols:
        raise ConfigurationError("member/symbol sizes do not match the layout")
    batch = y.shape[0]
    act, pos_act = _layout_actual_levels(pmap, layout)
    pos_sym = layout.pos_symbol
    ready = _ready_epochs(layout)
    known_bits = np.zeros((batch, layout.n_symbols, 3), dtype=np.int8)
    known_mask = np.zeros((layout.n_symbols, 3), dtype=bool)
    for t, nom in layout.filler_slots:
        known_mask[t, act[t, nom]] = True  # fillers are known zeros
    coded_members = [None] * 4
    infos = []
    for s, member in enumerate(members):
        llr_all = np.stack(
            [conditional_llr_array(c, y, spec, known_bits, known_mask,
                                   np.full(layout.n_symbols, lvl, dtype=np.int64))
             for lvl in range(3)],
            axis=-1,
        )
        pos = s * q + np.arange(q)
        base = llr_all[:, pos_sym[pos], pos_act[pos]]
        llr = base.copy()
        role = layout.pair_role[pos]
        first = np.flatnonzero(role == 1)
        if first.size:
            partner = layout.pair_partner[pos[first]]
            llr[:, first] = boxplus(base[:, first], llr_all[:, pos_sym[partner], pos_act[partner]])
        second = np.flatnonzero(role == 2)
        if second.size:
            partner = layout.pair_partner[pos[second]]
            a_hat = coded_members[s - 1][:, partner - (s - 1) * q].astype(float)
            llr[:, second] = base[:, second] + (1.0 - 2.0 * a_hat) * \
                llr_all[:, pos_sym[partner], pos_act[partner]]
        info, coded = sc_decode(member, clip_llr(llr))
        infos.append(info)
        coded_members[s] = coded if genie_feedback is None else np.broadcast_to(
            np.asarray(genie_feedback[s], dtype=np.int8), coded.shape).copy()
        # publish slot values that became fully determined at this epoch
        done = np.flatnonzero(ready == s)
        if done.size:
            vals = np.empty((batch, done.size), dtype=np.int8)
            for col, p in enumerate(done):
                sub, idx = p // q, p % q
                v = coded_members[sub][:, idx]
                if layout.pair_role[p] == 1:  # slot carries a XOR b
                    partner = layout.pair_partner[p]
                    v = v ^ coded_members[partner // q][:, partner % q]
                vals[:, col] = v
            known_bits[:, pos_sym[done], pos_act[done]] = vals
            known_mask[pos_sym[done], pos_act[done]] = True
    return np.concatenate(infos, axis=-1)


def _ready_epochs(layout: EightAskLayout) -> np.ndarray:
    """Epoch after which each coded position's slot value is known to the receiver."""
    q = layout.subcode_length
    owner = np.arange(layout.n_coded_bits) // q
    return np.where(layout.pair_role == 1, owner + 1, owner)


# ---------------------------------------------------------------------------
# GA-DE profiles for permuted mappings
# ---------------------------------------------------------------------------

def bpcm_means_table(catalog, c: Constellation, spec: AwgnSpec) -> np.ndarray:
    """(len(catalog), k') mean LLRs: slot s decoded with earlier slots fed back."""
    table = np.empty((len(catalog), len(catalog[0])))
    for e_id, entry in enumerate(catalog):
        level_of = {slot: lvl for lvl, slot in enumerate(entry)}
        for s in range(len(entry)):
            cap = bit_level_capacity(
                c, spec, target=level_of[s], known=[level_of[t] for t in range(s)]
            )
            table[e_id, s] = mean_llr_for_capacity(cap)
    return table


class LayoutDeModel:
    """Equivalent-channel means for every slot of a layout, per catalog entry.

    Capacities depend on the slot's actual level, the set of same-symbol levels
    already known (fed back) at the use epoch, and filler levels pinned to 0;
    they are cached per structural signature.
    """

    def __init__(self, layout: EightAskLayout, c: Constellation, spec: AwgnSpec, catalog):
        self.layout = layout
        self.c = c
        self.spec = spec
        self.catalog = [tuple(e) for e in catalog]
        self.acts = [tuple(int(v) for v in np.argsort(e)) for e in self.catalog]
        q = layout.subcode_length
        self.ready = _ready_epochs(layout)
        # per-symbol structure: nominal level -> (ready epoch | None for filler)
        self.slot_ready = np.full((layout.n_symbols, 3), -2, dtype=np.int64)  # -2 = filler
        for t in range(layout.n_symbols):
            for lvl in range(3):
                sub = int(layout.slot_subcode[t, lvl])
                if sub >= 0:
                    self.slot_ready[t, lvl] = self.ready[sub * q + layout.slot_index[t, lvl]]
        self._cap_cache: dict = {}

    def _mean(self, target: int, known: frozenset, fixed: frozenset) -> float:
        key = (target, known, fixed)
        if key not in self._cap_cache:
            cap = bit_level_capacity(self.c, self.spec, target,
                                     known=sorted(known), fixed={l: 0 for l in sorted(fixed)})
            self._cap_cache[key] = mean_llr_for_capacity(cap)
        return self._cap_cache[key]

    def slot_mean(self, t: int, e_id: int, nom_level: int, epoch: int) -> float:
        act = self.acts[e_id]
        known = set()
        fixed = set()
        for other in range(3):
            if other == nom_level:
                continue
            r = self.slot_ready[t, other]
            if r == -2:
                fixed.add(act[other])
            elif r < epoch:
                known.add(act[other])
        return self._mean(act[nom_level], frozenset(known), frozenset(fixed))

    def _position_means(self, p: int, e_id: int):
        """(own, f-epoch, g-epoch) slot means for coded position p under entry e_id."""
        q = self.layout.subcode_length
        t = self.layout.pos_symbol[p]
        nom = self.layout.pos_level[p]
        owner = p // q
        role = self.layout.pair_role[p]
        own = self.slot_mean(t, e_id, nom, owner)
        if role == 0:
            return own, own, own
        f_epoch = owner if role == 1 else owner - 1
        return own, self.slot_mean(t, e_id, nom, f_epoch), self.slot_mean(t, e_id, nom, f_epoch + 1)

    def slot_mean_arrays(self, perm_ids: np.ndarray):
        n = self.layout.n_coded_bits
        own = np.empty(n)
        at_f = np.empty(n)
        at_g = np.empty(n)
        for p in range(n):
            e_id = int(perm_ids[self.layout.pos_symbol[p]])
            own[p], at_f[p], at_g[p] = self._position_means(p, e_id)
        return own, at_f, at_g

    def combine(self, own, at_f, at_g) -> np.ndarray:
        """Fold pair slots through one polar step (f/g) into per-position means."""
        means = own.copy()
        role = self.layout.pair_role
        partner = self.layout.pair_partner
        first = np.flatnonzero(role == 1)
        means[first] = check_node_mean(at_f[first], at_f[partner[first]])
        second = np.flatnonzero(role == 2)
        means[second] = at_g[second] + at_g[partner[second]]
        return means

    def profile(self, perm_ids: np.ndarray) -> np.ndarray:
        return self.combine(*self.slot_mean_arrays(perm_ids))

    def symbol_positions(self, t: int) -> np.ndarray:
        """Coded positions whose profile entries depend on symbol t's entry."""
        q = self.layout.subcode_length
        pos = []
        for lvl in range(3):
            sub = int(self.layout.slot_subcode[t, lvl])
            if sub < 0:
                continue
            p = sub * q + int(self.layout.slot_index[t, lvl])
            pos.append(p)
            if self.layout.pair_role[p]:
                pos.append(int(self.layout.pair_partner[p]))
        return np.unique(np.asarray(pos, dtype=np.int64))


def bpcm_profile(pmap: BitPermutationMap, c: Constellation, spec: AwgnSpec,
                 layout: EightAskLayout | None = None) -> ChannelProfile:
    """Per-coded-position equivalent BI-AWGN mean LLRs induced by a permutation map."""
    if layout is not None:
        model = LayoutDeModel(layout, c, spec, pmap.catalog)
        return ChannelProfile(means=model.profile(pmap.perm_ids))
    table = bpcm_means_table(pmap.catalog, c, spec)
    return ChannelProfile(means=table[pmap.perm_ids].T.ravel())


def mapping_stage_count(code: PolarCode, pmap: BitPermutationMap,
                        layout: EightAskLayout | None = None) -> int:
    """Polar stages left between u(0) and the coded bits consumed by the mapper."""
    k_prime = 4 if layout is not None else pmap.n_slots
    return code.n_stages - {2: 1, 4: 2}[k_prime]


# ---------------------------------------------------------------------------
# Permutation design (greedy per-symbol descent on the GA-DE BLER estimate)
# ---------------------------------------------------------------------------

@dataclass
class PermutationDesign:
    pmap: BitPermutationMap
    initial_estimate: float
    final_estimate: float
    objective_trace: list
    iterations: int


def design_permutations(code: PolarCode, c: Constellation, spec: AwgnSpec,
                        max_iters: int = 10,
                        layout: EightAskLayout | None = None) -> PermutationDesign:
    """Start from all-P1; per symbol, keep the catalog entry with the lowest
    GA-DE BLER estimate (ties keep the lowest index); stop after a full pass
    with no change or ``max_iters`` passes."""
    if layout is not None:
        if c.k != 3:
            raise ConfigurationError("layout design needs a 3-bit constellation")
        n_symbols = layout.n_symbols
        catalog = bpcm_catalog(3)
        if layout.n_coded_bits != code.n_bits:
            raise ConfigurationError("layout sized for a different code")
    else:
        if code.n_bits % c.k:
            raise ConfigurationError("code length must divide into whole symbols")
        n_symbols = code.n_bits // c.k
        catalog = bpcm_catalog(c.k)
    m_cat = len(catalog)
    perm_ids = np.zeros(n_symbols, dtype=np.int64)
    pmap = BitPermutationMap(n_symbols=n_symbols, catalog=catalog, perm_ids=perm_ids)
    stages = mapping_stage_count(code, pmap, layout)

    if layout is not None:
        model = LayoutDeModel(layout, c, spec, catalog)
        own, at_f, at_g = model.slot_mean_arrays(perm_ids)
        base = model.combine(own, at_f, at_g)
    else:
        table = bpcm_means_table(catalog, c, spec)
        base = table[perm_ids].T.ravel().copy()
    q = n_symbols  # symbols per subcode in the direct mapping

    current = float(estimate_bler_batch(code.frozen, base[None, :], stages)[0])
    initial = current
    trace = [current]
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        changed = False
        for i in range(n_symbols):
            cand = np.repeat(base[None, :], m_cat, axis=0)
            if layout is not None:
                touched = model.symbol_positions(i)
                for e_id in range(m_cat):
                    o, f, g = own.copy(), at_f.copy(), at_g.copy()
                    for lvl in range(3):
                        sub = int(layout.slot_subcode[i, lvl])
                        if sub < 0:
                            continue
                        p = sub * layout.subcode_length + int(layout.slot_index[i, lvl])
                        o[p], f[p], g[p] = model._position_means(p, e_id)
                    cand[e_id, touched] = model.combine(o, f, g)[touched]
            else:
                for s in range(pmap.n_slots):
                    cand[:, s * q + i] = table[:, s]
            blers = estimate_bler_batch(code.frozen, cand, stages)
            best = int(np.argmin(blers))
            if best != perm_ids[i]:
                changed = True
                perm_ids[i] = best
                base = cand[best].copy()
                if layout is not None:
                    for lvl in range(3):
                        sub = int(layout.slot_subcode[i, lvl])
                        if sub < 0:
                            continue
                        p = sub * layout.subcode_length + int(layout.slot_index[i, lvl])
                        own[p], at_f[p], at_g[p] = model._position_means(p, best)
            current = float(blers[best])
            trace.append(current)
        if not changed:
            break
    final_map = BitPermutationMap(n_symbols=n_symbols, catalog=catalog, perm_ids=perm_ids)
    return PermutationDesign(pmap=final_map, initial_estimate=initial,
                             final_estimate=current, objective_trace=trace,
                             iterations=iterations)
