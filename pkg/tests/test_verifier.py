import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from grew.partition import (PartitionConfig, SecretKey, derive_projection, green_mask,
                            semantic_coordinates, step_seed)
from grew.verifier import RecommendationList, count_green, p_value, verify, z_score

GAMMA_EFF = 1 / 3


@pytest.fixture(scope="module")
def coords():
    E = np.random.default_rng(0).normal(size=(400, 8))
    return semantic_coordinates(E, derive_projection(SecretKey(21), 8))


def build_list(coords, key, history, n_green, n_total, cfg=PartitionConfig()):
    bits = green_mask(coords, step_seed(key, history, cfg), cfg).bits
    g, r = np.flatnonzero(bits), np.flatnonzero(~bits)
    items = list(g[:n_green]) + list(r[:n_total - n_green])
    return RecommendationList(user_id=0, history=history, items=items)


def test_recommendation_list_validation():
    with pytest.raises(ValueError):
        RecommendationList(0, [1], [3, 3])
    r = RecommendationList(4, np.array([1, 2]), np.array([5, 6]))
    assert r.to_record() == {"user_id": 4, "history": [1, 2], "items": [5, 6]}


# ----------------------------------------------------------- count_green


def test_count_green_trivial(coords):
    key = SecretKey(21)
    assert count_green([], key, coords) == (0, 0)
    lst = RecommendationList(0, [3], list(range(20)))
    assert count_green([lst], key, coords, PartitionConfig(gamma=1.0)) == (20, 20)


def test_count_green_constructed_three_of_ten(coords):
    key = SecretKey(21)
    lst = build_list(coords, key, [17, 5], 3, 10)
    assert count_green([lst], key, coords) == (3, 10)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**64 - 1), st.lists(st.integers(0, 399), max_size=5),
       st.integers(0, 40), st.integers(0, 40))
def test_count_green_round_trip(coords, key, history, g, r):
    key = SecretKey(key)
    bits = green_mask(coords, step_seed(key, history)).bits
    g = min(g, int(bits.sum()))
    r = min(r, int((~bits).sum()))
    if g + r == 0:
        return
    lst = build_list(coords, key, history, g, g + r)
    assert count_green([lst], key, coords) == (g, g + r)


def test_count_green_is_additive(coords):
    key = SecretKey(21)
    lists = [build_list(coords, key, [i], i % 5, 10) for i in range(30)]
    a = count_green(lists[:11], key, coords)
    b = count_green(lists[11:], key, coords)
    assert count_green(lists, key, coords) == (a[0] + b[0], a[1] + b[1])


def test_count_green_out_of_range(coords):
    with pytest.raises(ValueError):
        count_green([RecommendationList(0, [1], [400])], SecretKey(21), coords)


# ----------------------------------------------------------------- z_score


def test_z_score_examples():
    assert z_score(4000, 12000, GAMMA_EFF) == pytest.approx(0.0, abs=1e-12)
    z = z_score(4800, 12000, GAMMA_EFF)
    assert z == pytest.approx(15.492, abs=5e-4)
    assert z_score(9600, 24000, GAMMA_EFF) == pytest.approx(math.sqrt(2) * z, rel=1e-12)
    # the exact binomial tail agrees on the direction of the deviation
    assert binom.sf(4799, 12000, GAMMA_EFF) < 1e-50


def test_z_score_errors():
    with pytest.raises(ValueError):
        z_score(0, 0, 0.3)
    for g in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            z_score(1, 10, g)


def test_z_score_matches_direct_formula():
    rng = np.random.default_rng(1)
    mp.mp.dps = 40
    for _ in range(1000):
        n = int(rng.integers(1, 10**6))
        g = int(rng.integers(0, n + 1))
        gam = float(rng.uniform(0.01, 0.99))
        ref = (mp.mpf(g) / n - gam) / mp.sqrt(mp.mpf(gam) * (1 - mp.mpf(gam)) / n)
        z = z_score(g, n, gam)
        assert abs(z - float(ref)) <= 1e-9 * max(1.0, abs(float(ref)))


@given(st.integers(1, 5000), st.floats(0.01, 0.99))
def test_z_score_strictly_increasing(n, gam):
    zs = [z_score(g, n, gam) for g in range(0, n + 1, max(1, n // 50))]
    assert all(a < b for a, b in zip(zs, zs[1:]))


def test_decisions_agree_with_exact_binomial_tail():
    checked = 0
    for n in range(1, 31):
        for g in range(n + 1):
            exact = binom.sf(g - 1, n, GAMMA_EFF)
            if 1e-6 <= exact <= 1e-2:
                continue
            checked += 1
            assert (z_score(g, n, GAMMA_EFF) > 4) == (exact < 1e-6), (g, n, exact)
    assert checked > 300


# ----------------------------------------------------------------- p_value


def test_p_value_examples():
    assert p_value(0.0) == 0.5
    assert 3.16e-5 < p_value(4.0) < 3.18e-5
    assert p_value(8.0) < 1e-15
    for bad in (math.inf, -math.inf, math.nan):
        with pytest.raises(ValueError):
            p_value(bad)


def test_p_value_high_precision():
    mp.mp.dps = 50
    for z in np.linspace(-8, 8, 1601):
        ref = mp.mpf(1) / 2 * mp.erfc(mp.mpf(float(z)) / mp.sqrt(2))
        assert abs(p_value(float(z)) - float(ref)) <= 1e-12


@given(st.floats(-40, 40), st.floats(-40, 40))
def test_p_value_monotone(a, b):
    lo, hi = sorted((a, b))
    assert p_value(hi) <= p_value(lo)


# ------------------------------------------------------------------ verify


def test_verify_report_fields(coords):
    key = SecretKey(21)
    lists = [build_list(coords, key, [i, i + 1], 8, 10) for i in range(50)]
    rep = verify(lists, key, coords)
    assert (rep.green_count, rep.total) == (400, 500)
    assert rep.empirical_rate == 0.8
    assert rep.null_rate == pytest.approx(GAMMA_EFF)
    assert rep.owned and rep.z_score > 4
    assert rep.p_value == p_value(rep.z_score)
    assert set(rep.to_dict()) == {"green_count", "total", "empirical_rate", "null_rate",
                                  "z_score", "p_value", "owned", "threshold"}
    calibrated = verify(lists, key, coords, null_rate=0.79)
    assert calibrated.null_rate == 0.79 and not calibrated.owned


def test_null_calibration_on_random_lists():
    rng = np.random.default_rng(5)
    key = SecretKey(8)
    E = rng.normal(size=(2000, 8))
    c = semantic_coordinates(E, derive_projection(key, 8))
    zs = []
    for _ in range(1000):
        lists = [RecommendationList(u, rng.integers(0, 10**6, 3), rng.choice(2000, 10, False))
                 for u in range(30)]
        zs.append(verify(lists, key, c).z_score)
    zs = np.array(zs)
    assert abs(zs.mean()) < 0.1
    assert 0.025 <= (np.abs(zs) > 1.96).mean() <= 0.075
