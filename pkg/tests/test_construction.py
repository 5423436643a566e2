import numpy as np
import pytest

from polarcm import (
    AwgnSpec,
    ChannelProfile,
    ConfigurationError,
    PolarCode,
    SearchError,
    construct_gade,
    construct_montecarlo,
    de_evolve,
    design_snr_search,
    estimate_bler,
)
from polarcm.construction import (
    bpsk_profile,
    check_node_mean,
    de_means,
    phi,
    phi_inv,
)

from oracles import particle_de_means, phi_numeric, reference_bpsk_design_snr


def test_phi_basic_properties():
    assert phi(0.0) == 1.0
    assert phi(-1.0) == 1.0
    ms = np.linspace(0.05, 120, 500)
    vals = phi(ms)
    assert np.all(np.diff(vals) <= 0)
    assert phi(400.0) < 1e-40


def test_phi_inverse_roundtrip():
    ms = np.linspace(0.1, 40, 401)
    assert np.max(np.abs(phi_inv(phi(ms)) - ms)) < 1e-6
    assert phi_inv(1.0) == 0.0


def test_phi_close_to_numeric():
    # the two-piece approximation tracks the integral definition
    for m in (0.5, 2.0, 6.0, 15.0, 30.0):
        ref = phi_numeric(m)
        assert abs(phi(m) - ref) / ref < 0.08


def test_check_node_ordering():
    for ma, mb in [(1.0, 1.0), (3.0, 5.0), (0.5, 20.0)]:
        lo = check_node_mean(ma, mb)
        assert lo <= min(ma, mb) + 1e-9
        assert ma + mb >= max(ma, mb)


def test_one_stage_example():
    out = de_means(np.full(2, 3.0), 1)
    assert out[0] <= 3.0 <= out[1]
    assert out[1] == 6.0


def test_zero_profile():
    code = PolarCode(frozen=np.zeros(4, dtype=bool))
    res = de_evolve(code, ChannelProfile.uniform(0.0, 4))
    assert np.allclose(res.info_means, 0.0)
    assert np.allclose(res.per_bit_error, 0.5)


def test_de_against_particle_oracle_n4():
    means = de_means(np.full(4, 4.0), 2)
    ref = particle_de_means(np.full(4, 4.0), 2, n_particles=10**6, seed=0)
    assert np.all(np.abs(means - ref) / ref < 0.05)


def test_estimate_bler_trivial_and_monotone():
    all_frozen = PolarCode(frozen=np.ones(8, dtype=bool))
    assert estimate_bler(all_frozen, ChannelProfile.uniform(1.0, 8)) == 0.0
    code = PolarCode(frozen=np.array([True] * 4 + [False] * 4))
    lo = estimate_bler(code, ChannelProfile.uniform(2.0, 8))
    hi = estimate_bler(code, ChannelProfile.uniform(4.0, 8))
    assert hi <= lo


def test_profile_validation():
    with pytest.raises(ConfigurationError):
        ChannelProfile(means=np.array([-0.1, 1.0]))
    code = PolarCode(frozen=np.zeros(8, dtype=bool))
    with pytest.raises(ConfigurationError):
        de_evolve(code, ChannelProfile.uniform(1.0, 4))


def test_construct_gade_edges_and_worst_position():
    prof = ChannelProfile.uniform(3.0, 4)
    assert construct_gade(4, 0, prof).k_info == 0
    assert construct_gade(4, 4, prof).k_info == 4
    code = construct_gade(4, 3, prof)
    assert bool(code.frozen[0])  # twice-minus branch is the worst position
    with pytest.raises(ConfigurationError):
        construct_gade(4, 5, prof)


def test_gade_selection_dominates_random_sets():
    n, k = 1024, 512
    spec = AwgnSpec.from_snr_db_eb(2.0, 0.5)
    prof = bpsk_profile(spec, n)
    code = construct_gade(n, k, prof)
    best = estimate_bler(code, prof)
    res = de_evolve(PolarCode(frozen=np.zeros(n, dtype=bool)), prof)
    rng = np.random.default_rng(0)
    for _ in range(100):
        pick = rng.permutation(n)[:k]
        frozen = np.ones(n, dtype=bool)
        frozen[pick] = False
        rand_bler = float(-np.expm1(np.sum(np.log1p(-res.per_bit_error[pick]))))
        assert best <= rand_bler


def test_montecarlo_construction():
    spec = AwgnSpec.from_snr_db_eb(3.0, 0.5)
    mc1 = construct_montecarlo(16, 8, spec, trials=20000, seed=3)
    mc2 = construct_montecarlo(16, 8, spec, trials=20000, seed=3)
    assert np.array_equal(mc1.frozen, mc2.frozen)
    ga = construct_gade(16, 8, bpsk_profile(spec, 16))
    agree = np.count_nonzero(~mc1.frozen & ~ga.frozen)
    assert agree >= 6
    # sigma -> 0: no errors anywhere, tie-break keeps the first K indices
    clean = construct_montecarlo(16, 8, AwgnSpec(noise_std=1e-3), trials=1000, seed=0)
    assert np.array_equal(np.flatnonzero(~clean.frozen), np.arange(8))
    with pytest.raises(ConfigurationError):
        construct_montecarlo(16, 8, spec, trials=10, seed=0)


def _bpsk_fn(n):
    return lambda db: bpsk_profile(AwgnSpec.from_snr_db_eb(db, 0.5), n)


def test_design_snr_search_contract():
    n, k = 256, 128
    fn = _bpsk_fn(n)
    snr, code = design_snr_search(n, k, 1e-4, fn)
    assert estimate_bler(code, fn(snr)) <= 1e-4
    below = snr - 0.05
    code_below = construct_gade(n, k, fn(below))
    assert estimate_bler(code_below, fn(below)) > 1e-4
    # target 1.0 accepts the lowest SNR in range
    snr_lo, _ = design_snr_search(n, k, 1.0, fn, snr_lo_db=-3.0)
    assert snr_lo == -3.0


def test_design_snr_search_unreachable():
    with pytest.raises(SearchError):
        design_snr_search(64, 64, 1e-9, _bpsk_fn(64), snr_hi_db=-5.0)


def test_design_snr_matches_independent_gade():
    n, k = 1024, 512
    snr, _ = design_snr_search(n, k, 1e-5, _bpsk_fn(n))
    ref = reference_bpsk_design_snr(n, k, 1e-5)
    assert abs(snr - ref) < 0.3


def test_estimate_at_design_point_meets_paper_target():
    n, k = 1024, 512
    fn = _bpsk_fn(n)
    snr, code = design_snr_search(n, k, 1e-5, fn)
    assert estimate_bler(code, fn(snr)) <= 1e-5
