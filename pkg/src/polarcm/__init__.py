"""Polar-code coded modulation workbench.

Modulation-independent polar codes mapped onto 4/8/16-ASK through per-symbol
decode-order permutations, with MLC/BICM baselines, GA density-evolution
design tools, and a Monte-Carlo AWGN link simulator.
"""

__version__ = "0.1.0"

from .constellation import Constellation, Labeling, make_ask
from .channel_metrics import (
    AwgnSpec,
    BitChannelCapacities,
    awgn_transmit,
    biawgn_capacity,
    bit_level_capacity,
    conditional_llr,
    conditional_llr_array,
    equivalent_biawgn_sigma,
    modulation_capacity,
    pbp_bit_capacities,
    pbp_first_order_capacities,
    polarized_pair_mi,
    sbp_bit_capacities,
    snr_for_modulation_capacity,
)
from .polar import PolarCode, SubcodeSet, encode, make_subcodes, polar_transform, sc_decode
from .construction import (
    ChannelProfile,
    DeResult,
    bpsk_profile,
    construct_gade,
    construct_montecarlo,
    de_evolve,
    design_snr_search,
    estimate_bler,
    mean_llr_for_capacity,
)
from .mapping import (
    BitPermutationMap,
    EightAskLayout,
    bpcm_catalog,
    bpcm_map,
    bpcm_profile,
    build_8ask_layout,
    design_permutations,
    mapping_stage_count,
    mlc_receive,
)
from .baselines import (
    GreedyDesign,
    Interleaver,
    bicm_estimate,
    bicm_profile,
    construct_pbp_code,
    construct_sbp_8ask,
    construct_sbp_codes,
    greedy_interleaver,
    identity_interleaver,
    make_random_interleaver,
    pbp_estimate,
    sbp_estimate,
    search_required_snr,
)
from .simulate import (
    BicmEngine,
    BpcmEngine,
    BpskEngine,
    LinkResult,
    PointResult,
    run_point,
    run_sweep,
    run_sweep_config,
    snr_at_bler,
)
from .errors import ConfigurationError, SearchError
