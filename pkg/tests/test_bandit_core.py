import math

import numpy as np
import pytest

from tsbandit.bandit_core import (
    ArmModel,
    BanditInstance,
    PosteriorState,
    binarize,
    draw_reward,
    pseudo_regret_increment,
    update_posterior,
)


def sample_mean_ok(x, mu):
    x = np.asarray(x, dtype=float)
    return abs(x.mean() - mu) <= 3 * x.std(ddof=1) / math.sqrt(x.size)


@pytest.mark.parametrize("arm,mean", [
    (ArmModel.bernoulli(0.4), 0.4),
    (ArmModel.discrete([0.0, 0.5, 1.0], [0.2, 0.3, 0.5]), 0.65),
    (ArmModel.scaled_beta(2, 3), 0.4),
    (ArmModel.uniform(0.2, 0.6), 0.4),
    (ArmModel.constant(0.7), 0.7),
])
def test_analytic_means(arm, mean):
    assert arm.mean == pytest.approx(mean)


@pytest.mark.parametrize("build", [
    lambda: ArmModel.bernoulli(1.5),
    lambda: ArmModel.discrete([0.0, 1.2], [0.5, 0.5]),
    lambda: ArmModel.discrete([0.0, 1.0], [0.5, 0.6]),
    lambda: ArmModel.scaled_beta(0, 1),
    lambda: ArmModel.uniform(0.8, 0.2),
    lambda: ArmModel.constant(-0.1),
    lambda: ArmModel("gaussian", (0.5,)),
])
def test_invalid_arms_rejected(build):
    with pytest.raises(ValueError):
        build()


def test_arm_dict_round_trip():
    for arm in (ArmModel.bernoulli(0.3), ArmModel.discrete([0, 1], [0.1, 0.9]), ArmModel.uniform()):
        assert ArmModel.from_dict(arm.to_dict()) == arm
    with pytest.raises(ValueError, match="unknown parameter"):
        ArmModel.from_dict({"law": "bernoulli", "mu": 0.2, "sigma": 1})


def test_instance_gaps_and_optimum():
    inst = BanditInstance.from_means([0.9, 0.8, 0.5])
    assert inst.n_arms == 3
    assert inst.mu_star == 0.9
    assert inst.optimal_arms == (0,)
    assert np.allclose(inst.gaps, [0.0, 0.1, 0.4])
    assert pseudo_regret_increment(inst, 2) == pytest.approx(0.4)
    assert pseudo_regret_increment(inst, 0) == 0.0
    assert pseudo_regret_increment(BanditInstance.from_means([0.5, 0.4]), 1) == pytest.approx(0.1)


def test_unique_optimum_violation_names_the_arm():
    with pytest.raises(ValueError, match="arm 2 has gap 0"):
        BanditInstance.from_means([0.5, 0.4, 0.5], unique_optimum=True)
    BanditInstance.from_means([0.5, 0.4, 0.5])


def test_instance_needs_two_arms():
    with pytest.raises(ValueError):
        BanditInstance.from_means([0.5])


def test_constant_arm_is_deterministic():
    inst = BanditInstance((ArmModel.constant(0.7), ArmModel.bernoulli(0.1)))
    rng = np.random.default_rng(0)
    assert {draw_reward(inst, 0, rng) for _ in range(50)} == {0.7}


@pytest.mark.parametrize("arm,mu", [(ArmModel.bernoulli(0.4), 0.4), (ArmModel.scaled_beta(2, 2), 0.5),
                                    (ArmModel.discrete([0.1, 0.9], [0.25, 0.75]), 0.7),
                                    (ArmModel.uniform(0.0, 1.0), 0.5)])
def test_reward_sample_means(arm, mu):
    inst = BanditInstance((arm, ArmModel.constant(0.0)))
    rng = np.random.default_rng(42)
    x = [draw_reward(inst, 0, rng) for _ in range(100_000)]
    assert min(x) >= 0.0 and max(x) <= 1.0
    assert sample_mean_ok(x, mu)


def test_draw_reward_index_error():
    inst = BanditInstance.from_means([0.5, 0.4])
    with pytest.raises(IndexError):
        draw_reward(inst, 2, np.random.default_rng(0))
    with pytest.raises(IndexError):
        pseudo_regret_increment(inst, -1)


def test_binarize():
    rng = np.random.default_rng(1)
    assert binarize(1.0, rng) == 1
    assert binarize(0.0, rng) == 0
    with pytest.raises(ValueError):
        binarize(1.2, rng)


def test_binarized_uniform_arm_succeeds_half_the_time():
    inst = BanditInstance((ArmModel.uniform(), ArmModel.constant(0.0)))
    rng = np.random.default_rng(7)
    x = [binarize(draw_reward(inst, 0, rng), rng) for _ in range(100_000)]
    assert sample_mean_ok(x, 0.5)


def test_update_posterior():
    s = PosteriorState(2)
    update_posterior(s, 1, 1)
    assert s.successes.tolist() == [0, 1] and s.failures.tolist() == [0, 0]
    s = PosteriorState(1)
    for _ in range(10):
        update_posterior(s, 0, 1)
    for _ in range(5):
        update_posterior(s, 0, 0)
    assert (s.successes[0], s.failures[0]) == (10, 5)
    with pytest.raises(ValueError):
        update_posterior(s, 0, 2)


def test_posterior_state_validation_and_copy():
    with pytest.raises(ValueError):
        PosteriorState(successes=[1, -1], failures=[0, 0])
    with pytest.raises(ValueError):
        PosteriorState(successes=[1], failures=[0, 0])
    a = PosteriorState(successes=[3, 4], failures=[1, 2])
    b = a.copy()
    assert a == b
    update_posterior(b, 0, 1)
    assert a != b
