import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetexplore.behavioral_entropy import (
    LOG2,
    BehaviorParam,
    behavioral_entropy,
    beta_from_alpha,
    max_entropy,
    prelec_weight,
    shannon_entropy,
    total_map_entropy,
)

# arbitrary-precision references (mpmath, 40 digits)
W_02_HALF = 0.34777173355977093
H_03_ALPHA2 = 0.41109693793787961
H_01_HALF = 0.56340338671713520

alphas = st.floats(0.05, 10.0)
probs = st.floats(0.0, 1.0)


def test_beta_values():
    assert beta_from_alpha(1.0) == 1.0
    assert beta_from_alpha(2.0) == pytest.approx(1.0 / math.log(2), rel=1e-15)
    assert beta_from_alpha(0.5) == pytest.approx(0.832554611157697756, rel=1e-15)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_beta_rejects_nonpositive(bad):
    with pytest.raises(ValueError):
        beta_from_alpha(bad)


def test_param_from_alpha():
    par = BehaviorParam.from_alpha(2.0)
    assert par.beta == beta_from_alpha(2.0)
    with pytest.raises(ValueError):
        BehaviorParam(1.0, 0.0)


def test_weight_examples():
    assert prelec_weight(0.0, 0.7) == 0.0
    assert prelec_weight(1.0, 0.7) == 1.0
    assert prelec_weight(0.2, 0.5) == pytest.approx(W_02_HALF, abs=1e-14)
    for a in (0.1, 0.5, 3.0):
        assert prelec_weight(0.5, a) == pytest.approx(0.5, abs=1e-15)


def test_entropy_examples():
    assert behavioral_entropy(0.0, 2.0) == 0.0
    assert behavioral_entropy(1.0, 0.3) == 0.0
    assert behavioral_entropy(0.3, 1.0) == pytest.approx(0.610864302054893463, abs=1e-15)
    assert behavioral_entropy(0.3, 2.0) == pytest.approx(H_03_ALPHA2, abs=1e-14)
    assert behavioral_entropy(0.1, 0.5) == pytest.approx(H_01_HALF, abs=1e-14)


def test_scalar_and_array_types():
    assert isinstance(behavioral_entropy(0.4, 1.0), float)
    out = behavioral_entropy(np.array([0.0, 0.5, 1.0]), 3.0)
    assert out.shape == (3,)
    assert out[1] == pytest.approx(LOG2)


def test_out_of_range_probability():
    with pytest.raises(ValueError):
        behavioral_entropy(1.2, 1.0)
    with pytest.raises(ValueError):
        prelec_weight(np.nan, 1.0)


def test_shannon_limit_dense_grid():
    p = np.linspace(0, 1, 10_001)
    assert np.max(np.abs(behavioral_entropy(p, 1.0) - shannon_entropy(p))) <= 1e-12


@given(st.integers(0, 2**30), alphas)
def test_symmetry(k, a):
    p = k / 2**30  # dyadic, so 1 - p is exact
    assert behavioral_entropy(p, a) == pytest.approx(behavioral_entropy(1.0 - p, a), abs=1e-12)


@given(alphas)
def test_half_is_log2(a):
    assert behavioral_entropy(0.5, a) == pytest.approx(LOG2, abs=1e-12)


@given(alphas, st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
def test_weight_monotone(a, p, q):
    lo, hi = sorted((p, q))
    assert prelec_weight(lo, a) <= prelec_weight(hi, a) + 1e-15


@settings(max_examples=50)
@given(probs, alphas)
def test_bounded_and_finite(p, a):
    h = behavioral_entropy(p, a)
    assert math.isfinite(h)
    assert 0.0 <= h <= max_entropy(a) + 1e-9


def test_peak_is_log2_for_every_alpha():
    for a in (0.2, 1.0, 5.0):
        assert max_entropy(a) == pytest.approx(LOG2, abs=1e-9)


def test_total_map_entropy():
    assert total_map_entropy(np.zeros((4, 4))) == 0.0
    assert total_map_entropy(np.full((3, 5), 50.0)) == pytest.approx(15 * LOG2)
    assert total_map_entropy(np.array([[0.0, 50.0, 100.0]])) == pytest.approx(LOG2)
