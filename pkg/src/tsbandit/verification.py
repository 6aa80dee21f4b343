"""Executable checks of the probability facts and regret properties.

Each check returns a :class:`CheckResult`. Checks are grouped into suites
(``identities``, ``samplers``, ``lemmas``, ``regret``) and each suite has a
cheap ``smoke`` budget and a ``full`` budget. A check that cannot run
meaningfully at the requested budget reports ``skipped(budget)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from . import bounds, numerics
from .bandit_core import ArmModel, BanditInstance
from .simulator import DelayModel, RunConfig, run_monte_carlo

__all__ = ["CheckResult", "SUITES", "BUDGETS", "run_suite", "CHECKS"]

BUDGETS = ("smoke", "full")
PASS, FAIL, SKIPPED = "pass", "fail", "skipped(budget)"


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    observed: float
    threshold: float
    detail: str = ""

    @property
    def ok(self):
        return self.status != FAIL


def _result(name, passed, observed, threshold, detail=""):
    return CheckResult(name, PASS if passed else FAIL, float(observed), float(threshold), detail)


def _grid(lo, hi, step):
    return np.round(np.arange(lo, hi + step / 2, step), 10)


# ---------------------------------------------------------------------------
# identities

def check_fact1(budget="full", max_shape=None):
    """Max |beta_cdf - beta_cdf_oracle| over integer shapes and a y-grid."""
    max_shape = max_shape or (100 if budget == "full" else 20)
    y = _grid(0.01, 0.99, 0.01)
    worst = 0.0
    for a in range(1, max_shape + 1):
        for b in range(1, max_shape + 1):
            diff = np.abs(numerics.beta_cdf((a, b), y) - numerics.beta_cdf_oracle((a, b), y))
            worst = max(worst, float(diff.max()))
    return _result("fact1_beta_binomial", worst < 1e-10, worst, 1e-10, f"shapes 1..{max_shape}")


def check_beta_cdf_monotone(budget="full"):
    y = np.linspace(0.0, 1.0, 1001)
    worst_drop = 0.0
    endpoint_err = 0.0
    shapes = range(1, 101, 3) if budget == "full" else range(1, 30, 7)
    for a in shapes:
        for b in shapes:
            f = numerics.beta_cdf((a, b), y)
            worst_drop = max(worst_drop, float(-np.min(np.diff(f))))
            endpoint_err = max(endpoint_err, abs(f[0]), abs(f[-1] - 1.0))
    observed = max(worst_drop, endpoint_err)
    return _result("beta_cdf_monotone", observed <= 0.0, observed, 0.0)


def check_binomial_median(budget="full"):
    violations = 0
    for n in range(0, 61):
        for p in _grid(0.05, 0.95, 0.05):
            m = numerics.binomial_median((n, p))
            le = numerics.binomial_cdf((n, p), m)
            ge = 1.0 - numerics.binomial_cdf((n, p), m - 1)
            if not (le >= 0.5 and ge >= 0.5 and m in (math.floor(n * p), math.ceil(n * p))):
                violations += 1
    return _result("fact2_binomial_median", violations == 0, violations, 0)


def check_chernoff(budget="full"):
    worst = -math.inf
    for n in (10, 50, 100, 500):
        for p in _grid(0.1, 0.9, 0.1):
            for delta in _grid(0.01, 0.3, 0.01):
                for side in numerics.TAIL_SIDES:
                    q = numerics.TailBoundQuery(n, p, delta, side)
                    worst = max(worst, numerics.exact_tail(q) - numerics.chernoff_tail_bound(q))
    return _result("chernoff_dominance", worst <= 0.0, worst, 0.0, "max(exact tail - bound)")


def check_pinsker(budget="full"):
    grid = np.linspace(0.0, 1.0, 201 if budget == "full" else 51)
    worst = -math.inf
    for y in grid:
        for mu in grid:
            d = numerics.kl_bernoulli(y, mu)
            if math.isinf(d):
                continue
            worst = max(worst, 2.0 * (mu - y) ** 2 - d)
    # both sides are O(1) sums of logs; allow rounding at the equality points
    return _result("pinsker", worst <= 1e-12, worst, 1e-12, "max(2 gap^2 - D)")


def check_binomial_routes(budget="full"):
    """Summation and continued-fraction CDF routes agree on the overlap band."""
    worst = 0.0
    ns = (1000, 2500, 5000, 10_000) if budget == "full" else (1000, 10_000)
    for n in ns:
        for p in (0.001, 0.05, 0.3, 0.5, 0.8, 0.99):
            for k in np.unique(np.linspace(0, n, 101).astype(int)):
                a = numerics.binomial_cdf_summation((n, p), int(k))
                b = numerics.binomial_cdf_incbeta((n, p), int(k))
                worst = max(worst, abs(a - b))
    return _result("binomial_cdf_routes", worst <= 1e-12, worst, 1e-12)


# ---------------------------------------------------------------------------
# samplers

KS_SHAPES = ((1, 1), (2, 5), (30, 70), (100, 3))


def check_sample_beta_ks(budget="full", seed=20240601):
    n = 100_000 if budget == "full" else 20_000
    crit = numerics.ks_critical_value(n, 1e-3)
    worst = 0.0
    for i, (a, b) in enumerate(KS_SHAPES):
        rng = np.random.default_rng([seed, i])
        draws = numerics.sample_beta((a, b), rng, size=n)
        worst = max(worst, numerics.ks_statistic(draws, lambda x, a=a, b=b: numerics.beta_cdf((a, b), x)))
    return _result("sample_beta_ks", worst < crit, worst, crit, f"{n} draws per shape")


def check_order_statistic_ks(budget="full", seed=20240602):
    n = 100_000 if budget == "full" else 20_000
    crit = numerics.ks_critical_value(n, 1e-3)
    worst = 0.0
    for i, (a, b) in enumerate(((1, 1), (2, 5), (30, 30), (60, 3))):
        rng = np.random.default_rng([seed, i])
        draws = numerics.sample_beta_order_statistic((a, b), rng, size=n)
        worst = max(worst, numerics.ks_statistic(draws, lambda x, a=a, b=b: numerics.beta_cdf((a, b), x)))
    return _result("order_statistic_sampler_ks", worst < crit, worst, crit)


def check_binarize_reduction(budget="full", seed=20240603):
    """Binarized uniform(0, 1) rewards succeed at rate 1/2."""
    from .bandit_core import binarize, draw_reward

    n = 100_000 if budget == "full" else 20_000
    inst = BanditInstance((ArmModel.uniform(0.0, 1.0), ArmModel.bernoulli(0.5)))
    rng = np.random.default_rng(seed)
    hits = sum(binarize(draw_reward(inst, 0, rng), rng) for _ in range(n))
    rate = hits / n
    z = abs(rate - 0.5) / math.sqrt(0.25 / n)
    return _result("binarize_success_rate", z <= 3.0, z, 3.0, "z-score vs 0.5")


# ---------------------------------------------------------------------------
# lemmas

LEMMA1_TRIPLES = ((0, 0, 0.5), (2, 1, 0.5), (10, 9, 0.3), (50, 25, 0.6))


@numba.njit(cache=True, nogil=True)
def _threshold_trials(j, s, y, reps, cap, rng, out):
    # fresh Beta(s + 1, j - s + 1) draws until one exceeds y; count the failures
    a = s + 1.0
    b = j - s + 1.0
    for r in range(reps):
        k = 0
        while k < cap and rng.beta(a, b) <= y:
            k += 1
        out[r] = k


def lemma1_monte_carlo(j, s, y, reps, rng):
    """Sample mean and standard error of the failure count X(j, s, y)."""
    out = np.empty(reps, dtype=np.int64)
    _threshold_trials(j, s, y, reps, np.iinfo(np.int64).max, rng, out)
    return out.mean(), out.std(ddof=1) / math.sqrt(reps)


def check_lemma1(budget="full", seed=20240604):
    reps = 100_000 if budget == "full" else 10_000
    worst = 0.0
    for i, (j, s, y) in enumerate(LEMMA1_TRIPLES):
        mean, se = lemma1_monte_carlo(j, s, y, reps, np.random.default_rng([seed, i]))
        expected = numerics.expected_interplay_gap(j, s, y)
        worst = max(worst, abs(mean - expected) / se)
    return _result("lemma1_geometric_mean", worst <= 3.0, worst, 3.0, "max |z| over triples")


def lemma3_monte_carlo(j, y, mu1, T, reps, rng):
    """Estimate E[min(X(j, s, y), T)] with s ~ Binomial(j, mu1)."""
    s_draws = rng.binomial(j, mu1, size=reps)
    values, counts = np.unique(s_draws, return_counts=True)
    total = np.empty(reps, dtype=np.int64)
    pos = 0
    for s, c in zip(values, counts):
        _threshold_trials(j, int(s), y, int(c), T, rng, total[pos:pos + c])
        pos += c
    return total.mean(), total.std(ddof=1) / math.sqrt(reps)


LEMMA3_POINTS = tuple(
    (j, y, mu1, 100)
    for mu1, y in ((0.6, 0.5), (0.6, 0.3), (0.8, 0.7), (0.8, 0.5), (0.9, 0.85))
    for j in (0, 1, 3, 10, 30, 100, 300)
)


def check_lemma3(budget="full", seed=20240605):
    reps = 20_000 if budget == "full" else 2_000
    worst = -math.inf
    for i, (j, y, mu1, T) in enumerate(LEMMA3_POINTS):
        mean, se = lemma3_monte_carlo(j, y, mu1, T, reps, np.random.default_rng([seed, i]))
        env = numerics.lemma3_envelope(j, y, mu1, T)
        worst = max(worst, mean - env - 3.0 * se)
    return _result("lemma3_envelope_soundness", worst <= 0.0, worst, 0.0, "max(MC - envelope - 3 SE)")


def lemma2_experiment(runs=100_000, T=100, seed=20240606, workers=1):
    inst = BanditInstance.from_means([0.5, 0.4])
    config = RunConfig(T, seed, "thompson", diagnostics=True)
    return run_monte_carlo(config, inst, runs, workers)


def lemma2_verdict(summary, T=100):
    runs = summary.runs
    p = 2.0 / T ** 2
    threshold = p + 3.0 * math.sqrt(p * (1.0 - p) / runs)
    observed = float(summary.e2_step_counts.max()) / runs
    return observed, threshold


def check_lemma2(budget="full", workers=1):
    if budget != "full":
        return CheckResult("lemma2_e2_frequency", SKIPPED, math.nan, math.nan, "needs --budget full")
    observed, threshold = lemma2_verdict(lemma2_experiment(workers=workers))
    return _result("lemma2_e2_frequency", observed <= threshold, observed, threshold,
                   "max per-step violation frequency")


# ---------------------------------------------------------------------------
# regret

def regret_experiment(means, T, runs, seed, checkpoints=None, delay=None, workers=1, arms=None):
    inst = BanditInstance(tuple(arms)) if arms is not None else BanditInstance.from_means(means)
    config = RunConfig(T, seed, "thompson", delay or DelayModel(), checkpoints)
    return run_monte_carlo(config, inst, runs, workers)


def thm1_verdict(summary, delta=0.1):
    T = int(summary.checkpoints[-1])
    upper = summary.mean_regret[-1] + 3.0 * summary.stderr[-1]
    return upper, bounds.thm1_bound(T, delta)


def decade_ratio(summary):
    """Ratio of the larger to the smaller per-decade regret increment."""
    r = dict(zip(summary.checkpoints.tolist(), summary.mean_regret))
    inc = (r[10_000] - r[1_000], r[100_000] - r[10_000])
    return max(inc) / min(inc)


def check_thm1(budget="full", workers=1, seed=1001):
    T, runs = (100_000, 1000) if budget == "full" else (10_000, 50)
    cps = (1_000, 10_000, 100_000) if budget == "full" else (1_000, 10_000)
    s = regret_experiment((0.5, 0.4), T, runs, seed, cps, workers=workers)
    upper, bound = thm1_verdict(s)
    return _result("thm1_dominance", upper <= bound, upper, bound, "mean + 3 SE vs bound")


def check_thm2(budget="full", workers=1, seed=1002):
    means = (0.6, 0.5, 0.45, 0.4, 0.3)
    T, runs = (100_000, 500) if budget == "full" else (10_000, 30)
    s = regret_experiment(means, T, runs, seed, workers=workers)
    upper = s.mean_regret[-1] + 3.0 * s.stderr[-1]
    bound = bounds.thm2_bound(T, [0.1, 0.15, 0.2, 0.3])
    return _result("thm2_dominance", upper <= bound, upper, bound, "mean + 3 SE vs bound")


def appendix_a_verdict(base, extra):
    se = math.sqrt(base.stderr[-1] ** 2 + extra.stderr[-1] ** 2)
    return extra.mean_regret[-1] - base.mean_regret[-1], 3.0 * se


def check_appendix_a(budget="full", workers=1, seed=1003):
    T, runs = (10_000, 2000) if budget == "full" else (2_000, 200)
    base = regret_experiment((0.5, 0.4), T, runs, seed, workers=workers)
    extra = regret_experiment((0.5, 0.4, 0.5), T, runs, seed + 1, workers=workers)
    diff, margin = appendix_a_verdict(base, extra)
    return _result("appendix_a_extra_optimal_arm", diff <= margin, diff, margin,
                   "regret(with extra optimal arm) - regret(base)")


def reduction_verdict(bern, beta):
    se = np.sqrt(bern.counts_stderr[-1] ** 2 + beta.counts_stderr[-1] ** 2)
    z = np.abs(bern.mean_counts[-1] - beta.mean_counts[-1]) / se
    return float(z.max())


def check_reduction(budget="full", workers=1, seed=1004):
    T, runs = (10_000, 2000) if budget == "full" else (2_000, 200)
    bern = regret_experiment(None, T, runs, seed, workers=workers,
                             arms=(ArmModel.bernoulli(0.5), ArmModel.bernoulli(0.4)))
    beta = regret_experiment(None, T, runs, seed + 1, workers=workers,
                             arms=(ArmModel.scaled_beta(2, 2), ArmModel.bernoulli(0.4)))
    z = reduction_verdict(bern, beta)
    return _result("algorithm2_reduction", z <= 3.0, z, 3.0, "max |z| of per-arm play counts")


def delay_verdict(summary):
    r = dict(zip(summary.checkpoints.tolist(), summary.mean_regret))
    return (r[100_000] / 100_000) / (r[10_000] / 10_000)


def check_delay(budget="full", workers=1, seed=1005):
    if budget != "full":
        return CheckResult("delay_sublinearity", SKIPPED, math.nan, math.nan, "needs --budget full")
    worst = 0.0
    for i, d in enumerate((10, 100)):
        s = regret_experiment((0.5, 0.4), 100_000, 200, seed + i, (10_000, 100_000),
                              DelayModel.fixed(d), workers)
        worst = max(worst, delay_verdict(s))
    return _result("delay_sublinearity", worst < 0.5, worst, 0.5, "per-step regret ratio T=1e5 vs 1e4")


CHECKS = {
    "identities": (check_fact1, check_beta_cdf_monotone, check_binomial_median, check_chernoff,
                   check_pinsker, check_binomial_routes),
    "samplers": (check_sample_beta_ks, check_order_statistic_ks, check_binarize_reduction),
    "lemmas": (check_lemma1, check_lemma3, check_lemma2),
    "regret": (check_thm1, check_thm2, check_appendix_a, check_reduction, check_delay),
}
SUITES = tuple(CHECKS) + ("all",)


def run_suite(suite, budget="smoke", workers=1):
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; expected one of {SUITES}")
    if budget not in BUDGETS:
        raise ValueError(f"unknown budget {budget!r}; expected one of {BUDGETS}")
    names = list(CHECKS) if suite == "all" else [suite]
    results = []
    for name in names:
        for check in CHECKS[name]:
            if "workers" in check.__code__.co_varnames:
                results.append(check(budget, workers=workers))
            else:
                results.append(check(budget))
    return results
