"""Bandit instances, reward laws, the Bernoulli-trial reduction and posterior counters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numba
import numpy as np

from .validation import check_probability

__all__ = [
    "LAWS",
    "ArmModel",
    "BanditInstance",
    "PosteriorState",
    "FeedbackEvent",
    "draw_reward",
    "binarize",
    "update_posterior",
    "pseudo_regret_increment",
]

# law codes understood by the compiled reward sampler
BERNOULLI, DISCRETE, SCALED_BETA, UNIFORM, CONSTANT = range(5)
LAWS = {
    "bernoulli": BERNOULLI,
    "discrete": DISCRETE,
    "scaled_beta": SCALED_BETA,
    "uniform": UNIFORM,
    "constant": CONSTANT,
}

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ArmModel:
    """Reward law of one arm, supported on [0, 1], with its analytic mean.

    Build arms with the named constructors, e.g. ``ArmModel.bernoulli(0.4)``
    or ``ArmModel.discrete([0, 0.5, 1], [0.2, 0.3, 0.5])``.
    """

    law: str
    params: tuple
    mean: float = field(init=False)

    def __post_init__(self):
        if self.law not in LAWS:
            raise ValueError(f"unknown reward law {self.law!r}; expected one of {sorted(LAWS)}")
        params = tuple(tuple(float(v) for v in p) if isinstance(p, (list, tuple, np.ndarray))
                       else float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "mean", _analytic_mean(self.law, params))

    @classmethod
    def bernoulli(cls, mu):
        return cls("bernoulli", (mu,))

    @classmethod
    def discrete(cls, support, probs):
        return cls("discrete", (tuple(support), tuple(probs)))

    @classmethod
    def scaled_beta(cls, a, b):
        return cls("scaled_beta", (a, b))

    @classmethod
    def uniform(cls, lo=0.0, hi=1.0):
        return cls("uniform", (lo, hi))

    @classmethod
    def constant(cls, c):
        return cls("constant", (c,))

    def to_dict(self):
        names = _PARAM_NAMES[self.law]
        out = {"law": self.law}
        for name, value in zip(names, self.params):
            out[name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, spec):
        spec = dict(spec)
        law = spec.pop("law", None)
        if law not in LAWS:
            raise ValueError(f"unknown reward law {law!r}; expected one of {sorted(LAWS)}")
        names = _PARAM_NAMES[law]
        unknown = set(spec) - set(names)
        if unknown:
            raise ValueError(f"unknown parameter(s) {sorted(unknown)} for law {law!r}")
        missing = [n for n in names if n not in spec and n not in _PARAM_DEFAULTS.get(law, {})]
        if missing:
            raise ValueError(f"law {law!r} needs parameter(s) {missing}")
        values = [spec.get(n, _PARAM_DEFAULTS.get(law, {}).get(n)) for n in names]
        return cls(law, tuple(values))


_PARAM_NAMES = {
    "bernoulli": ("mu",),
    "discrete": ("support", "probs"),
    "scaled_beta": ("a", "b"),
    "uniform": ("lo", "hi"),
    "constant": ("c",),
}
_PARAM_DEFAULTS = {"uniform": {"lo": 0.0, "hi": 1.0}}


def _analytic_mean(law, params):
    if law == "bernoulli":
        (mu,) = params
        return check_probability(mu, "mu")
    if law == "constant":
        (c,) = params
        return check_probability(c, "c")
    if law == "uniform":
        lo, hi = params
        check_probability(lo, "lo")
        check_probability(hi, "hi")
        if lo > hi:
            raise ValueError(f"uniform law needs lo <= hi, got ({lo}, {hi})")
        return 0.5 * (lo + hi)
    if law == "scaled_beta":
        a, b = params
        if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
            raise ValueError(f"scaled_beta shapes must be positive, got ({a}, {b})")
        return a / (a + b)
    support, probs = params
    if not isinstance(support, tuple) or not isinstance(probs, tuple):
        raise ValueError("discrete law needs sequences for support and probs")
    if len(support) != len(probs) or not support:
        raise ValueError("discrete support and probs must be non-empty and of equal length")
    for v in support:
        check_probability(v, "support value")
    if any(q < 0 for q in probs):
        raise ValueError("discrete probabilities must be non-negative")
    if abs(math.fsum(probs) - 1.0) > _SUM_TOL:
        raise ValueError(f"discrete probabilities sum to {math.fsum(probs)!r}, not 1")
    return math.fsum(v * q for v, q in zip(support, probs))


@dataclass(frozen=True)
class BanditInstance:
    """An ordered, immutable collection of arms.

    ``unique_optimum=True`` declares that exactly one arm attains the best
    mean; construction fails, naming the offending arm, if that is false.
    """

    arms: tuple
    unique_optimum: bool = False

    def __post_init__(self):
        arms = tuple(self.arms)
        if len(arms) < 2:
            raise ValueError("a bandit instance needs at least 2 arms")
        for i, arm in enumerate(arms):
            if not isinstance(arm, ArmModel):
                raise TypeError(f"arm {i} is not an ArmModel")
        object.__setattr__(self, "arms", arms)
        if self.unique_optimum:
            opt = self.optimal_arms
            if len(opt) > 1:
                raise ValueError(
                    f"arm {opt[1]} has gap 0 (mean {self.means[opt[1]]!r} equals the best mean) "
                    "but the instance declares a unique optimum")

    @classmethod
    def from_means(cls, means, unique_optimum=False):
        return cls(tuple(ArmModel.bernoulli(m) for m in means), unique_optimum)

    @property
    def n_arms(self):
        return len(self.arms)

    @property
    def means(self):
        return np.array([a.mean for a in self.arms])

    @property
    def mu_star(self):
        return float(max(a.mean for a in self.arms))

    @property
    def gaps(self):
        return self.mu_star - self.means

    @property
    def optimal_arms(self):
        return tuple(int(i) for i in np.flatnonzero(self.means == self.mu_star))

    def suboptimal_gaps(self):
        g = self.gaps
        return g[g > 0]

    def to_dict(self):
        out = {"arms": [a.to_dict() for a in self.arms]}
        if self.unique_optimum:
            out["unique_optimum"] = True
        return out

    def encode(self):
        """Flat arrays consumed by the compiled simulation loop."""
        n = self.n_arms
        width = max([len(a.params[0]) for a in self.arms if a.law == "discrete"], default=1)
        law = np.empty(n, dtype=np.int64)
        params = np.zeros((n, 2))
        support = np.zeros((n, width))
        cumprob = np.ones((n, width))
        for i, arm in enumerate(self.arms):
            law[i] = LAWS[arm.law]
            if arm.law == "discrete":
                s, q = arm.params
                support[i, :len(s)] = s
                c = np.cumsum(q)
                c[-1] = 1.0
                cumprob[i, :len(c)] = c
                # padding slots are never reached
                support[i, len(s):] = s[-1]
            else:
                params[i, :len(arm.params)] = arm.params
        return law, params, support, cumprob


class PosteriorState:
    """Per-arm success/failure counters behind Beta(S + 1, F + 1) posteriors."""

    def __init__(self, n_arms=None, successes=None, failures=None):
        if successes is None:
            if n_arms is None:
                raise ValueError("give n_arms or explicit counters")
            successes = np.zeros(n_arms, dtype=np.int64)
            failures = np.zeros(n_arms, dtype=np.int64)
        self.successes = np.array(successes, dtype=np.int64)
        self.failures = np.array(failures, dtype=np.int64)
        if self.successes.shape != self.failures.shape or self.successes.ndim != 1:
            raise ValueError("successes and failures must be 1-d and the same length")
        if np.any(self.successes < 0) or np.any(self.failures < 0):
            raise ValueError("posterior counters must be non-negative")

    @property
    def n_arms(self):
        return self.successes.size

    def copy(self):
        return PosteriorState(successes=self.successes.copy(), failures=self.failures.copy())

    def __eq__(self, other):
        return (isinstance(other, PosteriorState)
                and np.array_equal(self.successes, other.successes)
                and np.array_equal(self.failures, other.failures))

    def __repr__(self):
        return f"PosteriorState(S={self.successes.tolist()}, F={self.failures.tolist()})"


class FeedbackEvent(NamedTuple):
    t_played: int
    arm: int
    raw_reward: float
    binarized: int


# ---------------------------------------------------------------------------
# compiled pieces shared with the simulator

@numba.njit(cache=True, nogil=True)
def _draw_reward(law, params, support, cumprob, arm, rng):
    code = law[arm]
    if code == BERNOULLI:
        return 1.0 if rng.random() < params[arm, 0] else 0.0
    if code == DISCRETE:
        u = rng.random()
        row = cumprob[arm]
        for k in range(row.size):
            if u < row[k]:
                return support[arm, k]
        return support[arm, row.size - 1]
    if code == SCALED_BETA:
        return rng.beta(params[arm, 0], params[arm, 1])
    if code == UNIFORM:
        lo = params[arm, 0]
        return lo + (params[arm, 1] - lo) * rng.random()
    return params[arm, 0]


@numba.njit(cache=True, nogil=True)
def _binarize(raw, rng):
    return 1 if rng.random() < raw else 0


def draw_reward(instance, arm, rng):
    """One i.i.d. reward from arm ``arm`` of ``instance``."""
    if not 0 <= arm < instance.n_arms:
        raise IndexError(f"arm index {arm} out of range for {instance.n_arms} arms")
    law, params, support, cumprob = _encoded(instance)
    return float(_draw_reward(law, params, support, cumprob, int(arm), rng))


def _encoded(instance):
    # cached on the (frozen) instance to avoid re-encoding per draw
    enc = instance.__dict__.get("_encoded")
    if enc is None:
        enc = instance.encode()
        object.__setattr__(instance, "_encoded", enc)
    return enc


def binarize(raw, rng):
    """Bernoulli trial with success probability ``raw``; consumes one uniform."""
    check_probability(raw, "raw reward")
    return int(_binarize(float(raw), rng))


def update_posterior(state, arm, outcome):
    """Count one success (``outcome == 1``) or failure on ``arm``, in place."""
    if outcome == 1:
        state.successes[arm] += 1
    elif outcome == 0:
        state.failures[arm] += 1
    else:
        raise ValueError(f"outcome must be 0 or 1, got {outcome!r}")
    return state


def pseudo_regret_increment(instance, arm):
    if not 0 <= arm < instance.n_arms:
        raise IndexError(f"arm index {arm} out of range for {instance.n_arms} arms")
    return float(instance.gaps[arm])
