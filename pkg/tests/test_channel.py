import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bscfeedback.channel import binary_entropy, derive_params, transmit

valid_p = st.floats(min_value=1e-9, max_value=0.5, exclude_max=True)


def test_constants_at_p_005():
    # C=0.7136, C1=3.8231, C2=4.2479 are the published reference values
    c = derive_params(0.05)
    assert round(c.C, 4) == 0.7136
    assert round(c.C1, 4) == 3.8231
    assert round(c.C2, 4) == 4.2479


def test_llr_step_is_one_when_q_is_twice_p():
    assert derive_params(1 / 3).C2 == pytest.approx(1.0, abs=1e-15)


def test_quarter_matches_direct_evaluation():
    c = derive_params(0.25)
    log3 = math.log(3) / math.log(2)
    assert c.C2 == pytest.approx(log3, rel=1e-15)
    assert c.C1 == pytest.approx(0.5 * log3, rel=1e-15)
    assert c.C1 == pytest.approx((c.q - c.p) * c.C2, rel=1e-15)
    assert c.C == pytest.approx(1 - (0.25 * 2 + 0.75 * (2 - log3)), rel=1e-14)


@pytest.mark.parametrize("bad", [0.0, -0.1, 0.5, 0.7, math.nan, math.inf])
def test_rejects_out_of_range_p(bad):
    with pytest.raises(ValueError, match="p="):
        derive_params(bad)


@given(valid_p)
def test_identity_and_ordering(p):
    c = derive_params(p)
    assert c.q == 1.0 - c.p
    assert c.C1 == pytest.approx((c.q - c.p) * c.C2, abs=1e-12, rel=1e-12)
    assert 0 < c.C <= c.C1 <= c.C2 < math.inf


def test_identity_on_thousand_random_p():
    rng = np.random.default_rng(0)
    for p in rng.uniform(1e-6, 0.5, size=1000):
        c = derive_params(p)
        assert abs(c.C1 - (c.q - c.p) * c.C2) < 1e-12 * max(1.0, c.C2)


def test_capacity_monotone_and_limits():
    grid = np.linspace(1e-6, 0.5 - 1e-6, 400)
    caps = [derive_params(p).C for p in grid]
    assert all(a > b for a, b in zip(caps, caps[1:]))
    assert derive_params(1e-12).C == pytest.approx(1.0, abs=1e-9)
    assert binary_entropy(0.5) == 1.0


def test_transmit_examples():
    c = derive_params(0.05)
    assert transmit(0, 0.99, c) == 0
    assert transmit(1, 0.01, c) == 0
    assert transmit(1, 0.05, c) == 1
    with pytest.raises(ValueError):
        transmit(2, 0.5, c)


def test_flip_frequency_within_three_sigma():
    c = derive_params(0.05)
    draws = np.random.default_rng(7).random(10**6)
    flips = sum(transmit(0, d, c) for d in draws[:20000])
    assert flips == int(np.sum(draws[:20000] < c.p))
    n = draws.size
    freq = np.mean(draws < c.p)
    assert abs(freq - c.p) <= 3 * math.sqrt(c.p * c.q / n)
