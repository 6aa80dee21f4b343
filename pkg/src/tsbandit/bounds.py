"""Closed-form regret bounds for overlay curves and dominance checks.

All functions take the horizon ``T`` as a real number (``T = e`` is a
convenient test point) and the instance either as a single gap, a vector
of suboptimal-arm gaps, or a vector of means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import kl_bernoulli
from .validation import check_gaps, check_log_horizon, check_means

__all__ = [
    "BOUND_KINDS",
    "BOUND_LABELS",
    "BoundSpec",
    "BoundCurve",
    "thm1_bound",
    "eq1_play_count_bound",
    "thm2_bound",
    "remark1_bound",
    "lai_robbins_lower",
    "ucb1_auer_bound",
    "evaluate_bound",
    "bound_curve",
]

BOUND_KINDS = ("thm1", "thm2_appendix", "remark1_shape", "lai_robbins_lower", "ucb1_auer", "eq1_play_count")

BOUND_LABELS = {
    "thm1": "explicit",
    "thm2_appendix": "explicit",
    "remark1_shape": "shape-only",
    "lai_robbins_lower": "asymptotic",
    "ucb1_auer": "explicit",
    "eq1_play_count": "explicit",
}


def _single_gap(delta):
    return float(check_gaps([delta], "delta")[0])


def thm1_bound(T, delta):
    """Two-armed Thompson Sampling regret bound ``40 ln T / d + 48 / d^3 + 18 d``."""
    T = check_log_horizon(T, min_val=2.0)
    d = _single_gap(delta)
    return 40.0 * math.log(T) / d + 48.0 / d ** 3 + 18.0 * d


def eq1_play_count_bound(T, delta):
    """Bound on the expected plays of the worse arm: ``40 ln T / d^2 + 48 / d^4 + 18``."""
    T = check_log_horizon(T, min_val=2.0)
    d = _single_gap(delta)
    return 40.0 * math.log(T) / d ** 2 + 48.0 / d ** 4 + 18.0


def thm2_bound(T, gaps):
    """N-armed bound with explicit constants; ``gaps`` excludes the optimal arm.

    Sum of the saturated-arm part

        1152 ln T (S2)^2 + 288 ln T S2 + 48 ln T S1 + 192 N S2 + 96 (N-1) + 8 (N-1)

    and the unsaturated part ``24 ln T S1``, where ``S1 = sum 1/gap`` and
    ``S2 = sum 1/gap^2``.
    """
    T = check_log_horizon(T)
    g = check_gaps(gaps)
    log_t = math.log(T)
    n_arms = g.size + 1
    s1 = math.fsum(1.0 / g)
    s2 = math.fsum(1.0 / g ** 2)
    saturated = (1152.0 * log_t * s2 ** 2 + 288.0 * log_t * s2 + 48.0 * log_t * s1
                 + 192.0 * n_arms * s2 + 96.0 * (n_arms - 1) + 8.0 * (n_arms - 1))
    unsaturated = 24.0 * log_t * s1
    return saturated + unsaturated


def remark1_bound(T, gaps, c=1.0):
    """``c (gap_max / gap_min^3) (sum 1/gap^2) ln T``. Shape only: ``c`` is not known."""
    T = check_log_horizon(T)
    g = check_gaps(gaps)
    if not (c > 0 and math.isfinite(c)):
        raise ValueError(f"constant c must be positive and finite, got {c!r}")
    return c * (g.max() / g.min() ** 3) * math.fsum(1.0 / g ** 2) * math.log(T)


def lai_robbins_lower(T, means):
    """Asymptotic main term ``sum_i gap_i / D(mu_i || mu*) ln T`` (the o(1) is dropped)."""
    T = check_log_horizon(T)
    mu = check_means(means, "means", open_interval=True)
    if mu.size < 2:
        raise ValueError("need at least two means")
    best = mu.max()
    top = np.flatnonzero(mu == best)
    if top.size > 1:
        raise ValueError(f"means[{int(top[1])}] duplicates the maximum {best!r}; a unique best arm is required")
    total = math.fsum((best - m) / kl_bernoulli(m, best) for m in mu if m != best)
    return total * math.log(T)


def ucb1_auer_bound(T, gaps):
    """``8 (sum 1/gap) ln T + (1 + pi^2 / 3) sum gap``."""
    T = check_log_horizon(T)
    g = check_gaps(gaps)
    return 8.0 * math.fsum(1.0 / g) * math.log(T) + (1.0 + math.pi ** 2 / 3.0) * math.fsum(g)


@dataclass(frozen=True)
class BoundSpec:
    """A bound kind plus the instance it is evaluated on.

    ``gaps`` (suboptimal arms only) serve every kind except
    ``lai_robbins_lower``, which needs ``means``. ``thm1`` and
    ``eq1_play_count`` need exactly one gap.
    """

    kind: str
    gaps: tuple = None
    means: tuple = None
    constant: float = None

    def __post_init__(self):
        if self.kind not in BOUND_KINDS:
            raise ValueError(f"unknown bound kind {self.kind!r}; expected one of {list(BOUND_KINDS)}")
        if self.constant is not None and self.kind != "remark1_shape":
            raise ValueError(f"constant override only applies to remark1_shape, not {self.kind!r}")
        if self.kind == "lai_robbins_lower":
            if self.means is None:
                raise ValueError("lai_robbins_lower needs the vector of means")
        elif self.gaps is None:
            if self.means is None:
                raise ValueError(f"{self.kind} needs gaps or means")
            mu = np.asarray(self.means, dtype=float)
            g = mu.max() - mu
            # drop exactly one optimal arm; any further zero gap is invalid for the kind
            g = np.delete(g, int(np.argmax(mu)))
            object.__setattr__(self, "gaps", tuple(float(x) for x in g))
        if self.gaps is not None:
            object.__setattr__(self, "gaps", tuple(float(x) for x in np.atleast_1d(self.gaps)))
        if self.kind in ("thm1", "eq1_play_count") and len(self.gaps) != 1:
            raise ValueError(f"{self.kind} is a two-armed bound; got {len(self.gaps)} suboptimal gaps")

    @property
    def label(self):
        return BOUND_LABELS[self.kind]

    def validate(self):
        """Evaluate once at a nominal horizon so invalid parameters surface early."""
        evaluate_bound(self, math.e)


def evaluate_bound(spec, T):
    if spec.kind == "thm1":
        return thm1_bound(T, spec.gaps[0])
    if spec.kind == "eq1_play_count":
        return eq1_play_count_bound(T, spec.gaps[0])
    if spec.kind == "thm2_appendix":
        return thm2_bound(T, spec.gaps)
    if spec.kind == "remark1_shape":
        return remark1_bound(T, spec.gaps, 1.0 if spec.constant is None else spec.constant)
    if spec.kind == "ucb1_auer":
        return ucb1_auer_bound(T, spec.gaps)
    return lai_robbins_lower(T, spec.means)


@dataclass(frozen=True)
class BoundCurve:
    kind: str
    label: str
    points: tuple

    @property
    def horizons(self):
        return np.array([p[0] for p in self.points])

    @property
    def values(self):
        return np.array([p[1] for p in self.points])


def bound_curve(spec, horizons):
    pts = tuple((float(T), evaluate_bound(spec, T)) for T in horizons)
    return BoundCurve(spec.kind, spec.label, pts)
