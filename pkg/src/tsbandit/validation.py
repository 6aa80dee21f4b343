"""Input validation helpers shared by the estimators and the config loader."""

import math
import numbers

import numpy as np
from sklearn.utils import check_random_state as _sk_check_random_state
from sklearn.utils.validation import check_scalar

__all__ = [
    "check_probability",
    "check_gaps",
    "check_means",
    "check_horizon",
    "check_generator",
    "check_scalar",
]


def check_probability(p, name="p"):
    """Raise ``ValueError`` unless ``p`` is a real number in [0, 1]."""
    if isinstance(p, bool) or not isinstance(p, (numbers.Real, np.floating, np.integer)):
        raise TypeError(f"{name} must be a real number, got {type(p).__name__}")
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {p!r}")
    return float(p)


def check_gaps(gaps, name="gaps"):
    """Return ``gaps`` as a 1-d float array with every entry in (0, 1]."""
    arr = np.atleast_1d(np.asarray(gaps, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d sequence")
    bad = np.flatnonzero(~((arr > 0.0) & (arr <= 1.0)))
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"{name}[{i}] = {arr[i]!r} is not in (0, 1]")
    return arr


def check_means(means, name="means", open_interval=False):
    arr = np.atleast_1d(np.asarray(means, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d sequence")
    if open_interval:
        bad = np.flatnonzero(~((arr > 0.0) & (arr < 1.0)))
        interval = "(0, 1)"
    else:
        bad = np.flatnonzero(~((arr >= 0.0) & (arr <= 1.0)))
        interval = "[0, 1]"
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"{name}[{i}] = {arr[i]!r} is not in {interval}")
    return arr


def check_horizon(T, name="T", min_val=1):
    if isinstance(T, float) and T.is_integer():
        T = int(T)
    return check_scalar(T, name, numbers.Integral, min_val=min_val)


def check_log_horizon(T, name="T", min_val=1.0):
    """Horizon for closed-form bounds: any real ``T >= min_val`` (``math.e`` is allowed)."""
    T = check_scalar(T, name, numbers.Real, min_val=min_val)
    if not math.isfinite(T):
        raise ValueError(f"{name} must be finite, got {T!r}")
    return float(T)


def check_generator(random_state):
    """Coerce ``random_state`` to a ``numpy.random.Generator``.

    Accepts ``None``, an integer seed, a ``SeedSequence`` or an existing
    ``Generator`` (returned as is, so callers share the stream).
    """
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(random_state, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(random_state)
    if isinstance(random_state, np.random.RandomState):
        # legacy streams are routed through a derived seed
        return np.random.default_rng(_sk_check_random_state(random_state).randint(2**63 - 1))
    raise TypeError(f"cannot build a Generator from {type(random_state).__name__}")
