import itertools

import numpy as np
import pytest

from polarcm import ConfigurationError, Labeling, make_ask
from polarcm.constellation import Constellation


def test_bpsk_gray_labels():
    c = make_ask(1, Labeling.GRAY)
    assert np.allclose(c.amplitudes, [-1.0, 1.0])
    assert c.map_bits((0,)) == -1.0
    assert c.map_bits((1,)) == 1.0


def test_4ask_amplitudes_unit_energy():
    c = make_ask(2, Labeling.GRAY)
    assert np.allclose(c.amplitudes, np.array([-3, -1, 1, 3]) / np.sqrt(5))


def test_8ask_energy_by_direct_computation():
    # oracle: E[x^2] = mean of (2i - 7)^2 / 21 = 1
    c = make_ask(3, Labeling.SET_PARTITION)
    levels = 2.0 * np.arange(8) - 7.0
    assert np.isclose(np.mean(levels**2), 21.0)
    assert np.isclose(np.mean(c.amplitudes**2), 1.0, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("labeling", [Labeling.GRAY, Labeling.SET_PARTITION])
def test_unit_energy_all(k, labeling):
    c = make_ask(k, labeling)
    assert abs(np.mean(c.amplitudes**2) - 1.0) < 1e-12


def test_unsupported_k():
    with pytest.raises(ConfigurationError):
        make_ask(5, Labeling.GRAY)
    with pytest.raises(ConfigurationError):
        make_ask(0, Labeling.GRAY)


def test_sp_map_bits_examples():
    c = make_ask(2, Labeling.SET_PARTITION)
    assert np.isclose(c.map_bits((0, 0)), -3 / np.sqrt(5))
    # natural binary index of (b0, b1) = (1, 1) is 3
    assert np.isclose(c.map_bits((1, 1)), 3 / np.sqrt(5))


def test_map_bits_wrong_length():
    c = make_ask(2, Labeling.GRAY)
    with pytest.raises(ValueError):
        c.map_bits((0,))
    with pytest.raises(ValueError):
        c.map_bits((0, 1, 1))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("labeling", [Labeling.GRAY, Labeling.SET_PARTITION])
def test_bijection_and_demap_inverse(k, labeling):
    c = make_ask(k, labeling)
    seen = set()
    for bits in itertools.product((0, 1), repeat=k):
        x = c.map_bits(bits)
        assert x not in seen
        seen.add(x)
        assert c.demap_point(x) == bits
    assert len(seen) == 2**k


@pytest.mark.parametrize("k", [2, 3, 4])
def test_gray_adjacency(k):
    c = make_ask(k, Labeling.GRAY)
    lab = c.label_bits()
    for i in range(c.size - 1):
        assert np.sum(lab[i] != lab[i + 1]) == 1


@pytest.mark.parametrize("k", [2, 3, 4])
def test_sp_distance_doubling(k):
    c = make_ask(k, Labeling.SET_PARTITION)
    lab = c.label_bits()

    def min_dist(idx):
        pts = np.sort(c.amplitudes[idx])
        return np.min(np.diff(pts)) if len(pts) > 1 else np.inf

    base = min_dist(np.arange(c.size))
    for depth in range(1, k):
        dmins = []
        for prefix in itertools.product((0, 1), repeat=depth):
            sel = np.all(lab[:, :depth] == prefix, axis=1)
            dmins.append(min_dist(np.flatnonzero(sel)))
        assert np.allclose(dmins, base * 2**depth, rtol=1e-12)


def test_json_roundtrip():
    c = make_ask(3, Labeling.GRAY)
    c2 = Constellation.from_json(c.to_json())
    assert c2.k == c.k
    assert c2.labeling_kind == c.labeling_kind
    assert np.allclose(c2.amplitudes, c.amplitudes)
    assert np.array_equal(c2.label_table, c.label_table)
