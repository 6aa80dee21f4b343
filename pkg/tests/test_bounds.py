import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsbandit.bounds import (
    BOUND_KINDS,
    BoundSpec,
    bound_curve,
    eq1_play_count_bound,
    evaluate_bound,
    lai_robbins_lower,
    remark1_bound,
    thm1_bound,
    thm2_bound,
    ucb1_auer_bound,
)
from tsbandit.numerics import kl_bernoulli

E = math.e


def test_two_arm_bound_values():
    assert thm1_bound(E, 1.0) == pytest.approx(106.0)
    assert thm1_bound(E ** 2, 1.0) - thm1_bound(E, 1.0) == pytest.approx(40.0)
    assert thm1_bound(1e5, 0.1) == pytest.approx(52606.97018598809, rel=1e-13)
    assert eq1_play_count_bound(E, 1.0) == pytest.approx(106.0)


def test_play_count_homogeneity():
    T, d = 1e4, 0.2
    log_part = lambda g: 40 * math.log(T) / g ** 2
    assert log_part(d / 2) == pytest.approx(4 * log_part(d))
    total_half = eq1_play_count_bound(T, d / 2)
    assert total_half == pytest.approx(4 * log_part(d) + 16 * 48 / d ** 4 + 18)


@settings(max_examples=100, deadline=None)
@given(T=st.floats(2, 1e9), d=st.floats(1e-3, 1))
def test_regret_is_gap_times_play_count(T, d):
    assert thm1_bound(T, d) == pytest.approx(d * eq1_play_count_bound(T, d), rel=1e-12)


@pytest.mark.parametrize("fn", [thm1_bound, eq1_play_count_bound])
def test_two_arm_bound_domain(fn):
    for d in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            fn(100, d)
    with pytest.raises(ValueError):
        fn(1.5, 0.5)


def test_n_arm_bound_values():
    assert thm2_bound(E, [1.0]) == pytest.approx(2000.0)
    T, g = 1e5, np.array([0.1, 0.15, 0.2, 0.3])
    lead = lambda gaps: 1152 * math.log(T) * sum(1 / gaps ** 2) ** 2
    assert lead(g / 2) == pytest.approx(16 * lead(g))
    with pytest.raises(ValueError):
        thm2_bound(100, [0.1, 0.0])


@settings(max_examples=200, deadline=None)
@given(T=st.floats(2, 1e12), d=st.floats(1e-3, 1))
def test_n_arm_bound_dominates_two_arm_bound(T, d):
    assert thm2_bound(T, [d]) > thm1_bound(T, d)


def test_remark1_shape():
    assert remark1_bound(E, [0.1, 0.2], 1.0) == pytest.approx(25000.0)
    assert remark1_bound(100, [0.25] * 3, 2.0) == pytest.approx(2.0 * 3 * math.log(100) / 0.25 ** 4)
    for c in (0.0, -1.0, math.inf):
        with pytest.raises(ValueError):
            remark1_bound(100, [0.1], c)


def test_lai_robbins():
    v = lai_robbins_lower(1000, [0.5, 0.499])
    assert math.isfinite(v) and v > 0
    assert lai_robbins_lower(E, [0.9, 0.1]) == pytest.approx(0.8 / kl_bernoulli(0.1, 0.9))
    assert lai_robbins_lower(1e4, [0.3, 0.6, 0.2]) == lai_robbins_lower(1e4, [0.3, 0.6, 0.2])
    with pytest.raises(ValueError, match="duplicates"):
        lai_robbins_lower(100, [0.5, 0.5, 0.2])
    with pytest.raises(ValueError):
        lai_robbins_lower(100, [1.0, 0.5])


def test_ucb1_auer():
    assert ucb1_auer_bound(E, [1.0]) == pytest.approx(9 + math.pi ** 2 / 3)
    assert ucb1_auer_bound(E, [1.0]) == pytest.approx(12.29, abs=5e-3)
    assert ucb1_auer_bound(E, [0.5, 0.25]) == pytest.approx(48 + (1 + math.pi ** 2 / 3) * 0.75)


def test_bound_spec_from_means():
    spec = BoundSpec("thm2_appendix", means=(0.6, 0.5, 0.3))
    assert spec.gaps == pytest.approx((0.1, 0.3))
    assert spec.label == "explicit"
    assert BoundSpec("remark1_shape", gaps=(0.1,)).label == "shape-only"
    assert BoundSpec("lai_robbins_lower", means=(0.6, 0.5)).label == "asymptotic"
    with pytest.raises(ValueError, match="two-armed"):
        BoundSpec("thm1", means=(0.6, 0.5, 0.3))
    with pytest.raises(ValueError):
        BoundSpec("thm1", means=(0.6, 0.6)).validate()
    with pytest.raises(ValueError):
        BoundSpec("bogus", gaps=(0.1,))
    with pytest.raises(ValueError):
        BoundSpec("thm1", gaps=(0.1,), constant=2.0)


@pytest.mark.parametrize("kind", BOUND_KINDS)
def test_curves_nondecreasing_in_horizon(kind):
    spec = BoundSpec(kind, gaps=(0.2,) if kind in ("thm1", "eq1_play_count") else None,
                     means=(0.7, 0.5, 0.45))
    curve = bound_curve(spec, [2, E, 10, 1e3, 1e5, 1e8])
    assert np.all(np.diff(curve.values) >= 0)
    assert curve.horizons[1] == E
    assert curve.values[-1] == evaluate_bound(spec, 1e8)
