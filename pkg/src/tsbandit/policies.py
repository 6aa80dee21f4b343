"""Arm-selection policies: Thompson Sampling, UCB1 and uniform random play.

Each policy is available two ways. The module-level functions
(``ts_select``, ``ucb1_select``, ``policy_observe``) act on explicit state
objects and are what the simulator's compiled loop mirrors. The estimator
classes wrap the same logic behind the scikit-learn parameter protocol, so
they can be cloned, grid-searched and driven incrementally with
``partial_fit``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .bandit_core import PosteriorState, update_posterior
from .validation import check_generator, check_probability

__all__ = [
    "POLICY_KINDS",
    "Ucb1State",
    "ts_select",
    "ucb1_select",
    "uniform_select",
    "policy_observe",
    "ThompsonSampling",
    "UCB1",
    "UniformRandom",
    "make_policy",
]

THOMPSON, UCB1_CODE, UNIFORM_RANDOM = range(3)
POLICY_KINDS = {"thompson": THOMPSON, "ucb1": UCB1_CODE, "uniform_random": UNIFORM_RANDOM}


# ---------------------------------------------------------------------------
# compiled kernels

@numba.njit(cache=True, nogil=True)
def _ts_sample(successes, failures, rng, theta):
    # arms sampled in index order; this fixes the stream consumption
    for i in range(successes.size):
        theta[i] = rng.beta(successes[i] + 1.0, failures[i] + 1.0)


@numba.njit(cache=True, nogil=True)
def _argmax_low(values):
    best = 0
    for i in range(1, values.size):
        if values[i] > values[best]:
            best = i
    return best


@numba.njit(cache=True, nogil=True)
def _ucb1_select(counts, means, t):
    n = counts.size
    if t <= n:
        return t - 1
    # arms with no delivered feedback yet have an infinite index
    for i in range(n):
        if counts[i] == 0:
            return i
    log_t = math.log(t)
    best = 0
    best_val = -1.0
    for i in range(n):
        val = means[i] + math.sqrt(2.0 * log_t / counts[i])
        if val > best_val:
            best_val = val
            best = i
    return best


# ---------------------------------------------------------------------------
# functional API

@dataclass
class Ucb1State:
    """Play counts, running means of raw rewards and the current step ``t``.

    ``t`` is the 1-based index of the step about to be decided.
    """

    counts: np.ndarray
    means: np.ndarray
    t: int = 1

    @classmethod
    def empty(cls, n_arms):
        return cls(np.zeros(n_arms, dtype=np.int64), np.zeros(n_arms), 1)


def ts_select(state, rng):
    """Sample every arm's Beta posterior and play the largest draw."""
    theta = np.empty(state.n_arms)
    _ts_sample(state.successes, state.failures, rng, theta)
    return int(_argmax_low(theta))


def ucb1_select(state):
    if state.t < 1:
        raise ValueError(f"UCB1 time index starts at 1, got {state.t}")
    return int(_ucb1_select(state.counts, state.means, int(state.t)))


def uniform_select(n_arms, rng):
    return int(rng.integers(0, n_arms))


def policy_observe(kind, state, arm, raw, binarized):
    """Feed one delivered outcome to the policy state and return the state.

    Thompson Sampling consumes the binarized outcome, UCB1 the raw reward,
    and uniform random play ignores feedback.
    """
    if kind == "thompson":
        return update_posterior(state, arm, binarized)
    if kind == "ucb1":
        check_probability(raw, "raw reward")
        state.counts[arm] += 1
        state.means[arm] += (raw - state.means[arm]) / state.counts[arm]
        return state
    if kind == "uniform_random":
        return state
    raise ValueError(f"unknown policy kind {kind!r}; expected one of {sorted(POLICY_KINDS)}")


# ---------------------------------------------------------------------------
# estimator wrappers

class _BasePolicy(BaseEstimator):
    kind = None

    def __init__(self, n_arms=2, random_state=None):
        self.n_arms = n_arms
        self.random_state = random_state

    def fit(self, arms=None, rewards=None, binarized=None):
        """Reset to the prior, then replay an optional feedback history."""
        if self.n_arms < 1:
            raise ValueError(f"n_arms must be >= 1, got {self.n_arms}")
        self.rng_ = check_generator(self.random_state)
        self.state_ = self._initial_state()
        self.t_ = 1
        if arms is not None:
            self.partial_fit(arms, rewards, binarized)
        return self

    def partial_fit(self, arms, rewards, binarized=None):
        if not hasattr(self, "state_"):
            self.fit()
        arms = np.atleast_1d(np.asarray(arms, dtype=np.int64))
        rewards = np.atleast_1d(np.asarray(rewards, dtype=float))
        if binarized is None:
            binarized = rewards
        binarized = np.atleast_1d(np.asarray(binarized))
        if not (arms.shape == rewards.shape == binarized.shape):
            raise ValueError("arms, rewards and binarized must have the same length")
        if np.any((arms < 0) | (arms >= self.n_arms)):
            raise IndexError("arm index out of range")
        for a, r, b in zip(arms, rewards, binarized):
            policy_observe(self.kind, self.state_, int(a), float(r), int(b))
        return self

    def select(self):
        """Choose the arm for the next step and advance the step counter."""
        check_is_fitted(self, "state_")
        arm = self._select()
        self.t_ += 1
        return arm

    def predict(self, n_steps=1):
        """Selections for ``n_steps`` steps without feedback in between."""
        return np.array([self.select() for _ in range(n_steps)], dtype=np.int64)


class ThompsonSampling(_BasePolicy):
    """Thompson Sampling with Beta(1, 1) priors on binarized feedback."""

    kind = "thompson"

    def _initial_state(self):
        return PosteriorState(self.n_arms)

    def _select(self):
        return ts_select(self.state_, self.rng_)

    @property
    def successes_(self):
        return self.state_.successes

    @property
    def failures_(self):
        return self.state_.failures


class UCB1(_BasePolicy):
    kind = "ucb1"

    def _initial_state(self):
        return Ucb1State.empty(self.n_arms)

    def _select(self):
        self.state_.t = self.t_
        return ucb1_select(self.state_)


class UniformRandom(_BasePolicy):
    kind = "uniform_random"

    def _initial_state(self):
        return None

    def _select(self):
        return uniform_select(self.n_arms, self.rng_)


_ESTIMATORS = {"thompson": ThompsonSampling, "ucb1": UCB1, "uniform_random": UniformRandom}


def make_policy(kind, n_arms=2, random_state=None):
    try:
        cls = _ESTIMATORS[kind]
    except KeyError:
        raise ValueError(f"unknown policy kind {kind!r}; expected one of {sorted(_ESTIMATORS)}") from None
    return cls(n_arms=n_arms, random_state=random_state)
