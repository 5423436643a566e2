import json
from dataclasses import asdict

import numpy as np
import pytest

from polarcm import (
    AwgnSpec,
    ConfigurationError,
    Labeling,
    PolarCode,
    make_ask,
    make_random_interleaver,
    run_point,
    run_sweep,
    snr_at_bler,
)
from polarcm.construction import bpsk_profile, construct_gade
from polarcm.mapping import BitPermutationMap
from polarcm.simulate import (
    BicmEngine,
    BpcmEngine,
    BpskEngine,
    PointResult,
    build_engine,
    validate_sim_config,
)


def _small_code(n=64, rate=0.5, snr_db=2.0):
    return construct_gade(n, int(n * rate), bpsk_profile(AwgnSpec.from_snr_db_eb(snr_db, rate), n))


def test_run_point_deterministic():
    eng = BpskEngine(_small_code())
    a = run_point(eng, 3.0, max_trials=2000, min_block_errors=25, seed=7)
    b = run_point(eng, 3.0, max_trials=2000, min_block_errors=25, seed=7)
    assert asdict(a) == asdict(b)
    c = run_point(eng, 3.0, max_trials=2000, min_block_errors=25, seed=8)
    assert asdict(a) != asdict(c)


def test_run_point_batch_size_invariance():
    eng = BpskEngine(_small_code())
    a = run_point(eng, 2.0, max_trials=3000, min_block_errors=30, seed=1, batch_size=17)
    b = run_point(eng, 2.0, max_trials=3000, min_block_errors=30, seed=1, batch_size=512)
    assert (a.trials, a.errors) == (b.trials, b.errors)


def test_run_point_clean_channel():
    eng = BpskEngine(_small_code())
    res = run_point(eng, 30.0, max_trials=500, min_block_errors=20, seed=0)
    assert res.errors == 0
    assert res.trials == 500
    assert res.censored


def test_run_sweep_monotone_and_skip():
    eng = BpskEngine(_small_code())
    result = run_sweep(eng, [1.0, 2.0, 3.0, 4.0, 8.0, 9.0], max_trials=4000,
                       min_block_errors=40, master_seed=3, bler_floor=1e-3)
    blers = [p.bler for p in result.points]
    solid = [p.bler for p in result.points if not p.censored]
    assert all(b <= a * 1.5 + 1e-12 for a, b in zip(solid, solid[1:]))
    assert len(result.points) < 6  # floor skipping kicked in


def test_run_sweep_empty_grid():
    eng = BpskEngine(_small_code())
    assert run_sweep(eng, []).points == []


def test_run_sweep_rejects_unsorted():
    eng = BpskEngine(_small_code())
    with pytest.raises(ConfigurationError):
        run_sweep(eng, [3.0, 2.0])


def test_engines_clean_roundtrip():
    code = _small_code()
    engines = [
        BpskEngine(code),
        BpcmEngine(BitPermutationMap.all_p1(32, 2), make_ask(2, Labeling.SET_PARTITION), code=code),
        BicmEngine(code, make_ask(2, Labeling.GRAY), make_random_interleaver(64, 1)),
        BicmEngine(code, make_ask(3, Labeling.GRAY), make_random_interleaver(64, 1)),  # padded
    ]
    for eng in engines:
        res = run_point(eng, 25.0, snr_convention="esn0", max_trials=200,
                        min_block_errors=20, seed=2)
        assert res.errors == 0


def test_snr_at_bler_interpolation():
    pts = [PointResult(1.0, 0, 1000, 100, 1e-1, False, 0),
           PointResult(2.0, 0, 10000, 100, 1e-2, False, 0),
           PointResult(3.0, 0, 100000, 100, 1e-3, False, 0)]
    assert abs(snr_at_bler(pts, 1e-2) - 2.0) < 1e-12
    assert abs(snr_at_bler(pts, 10 ** -1.5) - 1.5) < 1e-12
    assert snr_at_bler(pts, 1e-5) is None


def test_validate_config():
    base = {"scheme": "bpsk", "snr_grid": [1.0, 2.0], "modulation": {"k": 1}}
    cfg = validate_sim_config(base)
    assert cfg["min_block_errors"] == 50
    with pytest.raises(ConfigurationError):
        validate_sim_config({**base, "scheme": "xyz"})
    with pytest.raises(ConfigurationError):
        validate_sim_config({**base, "min_block_errors": 5})
    with pytest.raises(ConfigurationError):
        validate_sim_config({**base, "snr_grid": [2.0, 1.0]})
    with pytest.raises(ConfigurationError):
        validate_sim_config({"scheme": "bpsk"})


def test_build_engine_from_config():
    code = _small_code()
    store = {"code.json": code.to_json()}
    cfg = validate_sim_config({
        "scheme": "bpcm", "snr_grid": [5.0], "modulation": {"k": 2},
        "code": "code.json", "pmap": "pmap.json",
    })
    store["pmap.json"] = BitPermutationMap.all_p1(32, 2).to_json()
    eng = build_engine(cfg, store.__getitem__)
    assert isinstance(eng, BpcmEngine)
    assert eng.k_info == code.k_info
    # mis-sized pmap is a configuration error
    store["pmap.json"] = BitPermutationMap.all_p1(16, 2).to_json()
    with pytest.raises(ConfigurationError):
        build_engine(cfg, store.__getitem__)
