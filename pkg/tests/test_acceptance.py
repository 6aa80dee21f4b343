"""Acceptance suite: one test per criterion, run at full size and full tolerance.

Monte Carlo experiments are computed once per session with 8 workers; the
determinism criterion re-runs every one of them with 1 worker and compares
the CSV bytes.
"""

import math
import time

import mpmath as mp
import numpy as np
import pytest
from scipy import stats

from tsbandit import numerics as nm
from tsbandit.bandit_core import ArmModel, BanditInstance
from tsbandit.bounds import thm1_bound, thm2_bound
from tsbandit.cli import DIAGNOSTICS_COLUMNS, REGRET_COLUMNS, csv_text, diagnostics_rows, regret_rows
from tsbandit.simulator import DelayModel, RunConfig, run_monte_carlo

pytestmark = pytest.mark.acceptance

WORKERS = 8


def grid(lo, hi, step):
    return np.round(np.arange(lo, hi + step / 2, step), 10)


def summary_csv(name, config, summary):
    text = csv_text(REGRET_COLUMNS, regret_rows(name, config.policy, summary, config.seed))
    if config.diagnostics:
        text += csv_text(DIAGNOSTICS_COLUMNS, diagnostics_rows(name, summary))
    return text.encode()


def two_arm(mu2=0.4):
    return BanditInstance.from_means([0.5, mu2])


# every Monte Carlo experiment of the suite: name -> (instance, config, runs)
EXPERIMENTS = {
    "thm1": (two_arm(), RunConfig(100_000, 5001, checkpoints=(1_000, 10_000, 100_000)), 1000),
    "thm2": (BanditInstance.from_means([0.6, 0.5, 0.45, 0.4, 0.3]), RunConfig(100_000, 5002), 500),
    "appendix_base": (two_arm(), RunConfig(10_000, 5003), 2000),
    "appendix_extra": (BanditInstance.from_means([0.5, 0.4, 0.5]), RunConfig(10_000, 5004), 2000),
    "reduction_bernoulli": (BanditInstance((ArmModel.bernoulli(0.5), ArmModel.bernoulli(0.4))),
                            RunConfig(10_000, 5005), 2000),
    "reduction_beta": (BanditInstance((ArmModel.scaled_beta(2, 2), ArmModel.bernoulli(0.4))),
                       RunConfig(10_000, 5006), 2000),
    "lemma2": (two_arm(), RunConfig(100, 5007, diagnostics=True), 100_000),
    "delay10": (two_arm(), RunConfig(100_000, 5008, delay=DelayModel.fixed(10), checkpoints=(10_000, 100_000)), 200),
    "delay100": (two_arm(), RunConfig(100_000, 5009, delay=DelayModel.fixed(100), checkpoints=(10_000, 100_000)),
                 200),
}


class _Results:
    def __init__(self):
        self.cache = {}

    def get(self, name):
        if name not in self.cache:
            inst, config, runs = EXPERIMENTS[name]
            start = time.perf_counter()
            summary = run_monte_carlo(config, inst, runs, workers=WORKERS)
            elapsed = time.perf_counter() - start
            self.cache[name] = (summary, summary_csv(name, config, summary), elapsed)
        return self.cache[name]


@pytest.fixture(scope="session")
def mc():
    return _Results()


LEMMA1_TRIPLES = ((0, 0, 0.5), (2, 1, 0.5), (10, 9, 0.3), (50, 25, 0.6))
LEMMA1_REPS = 100_000


def lemma1_counts(j, s, y, reps, seed):
    """Failures before a fresh Beta(s + 1, j - s + 1) draw exceeds y, ``reps`` times."""
    rng = np.random.default_rng([seed, j, s])
    a, b = s + 1, j - s + 1
    out = np.zeros(reps, dtype=np.int64)
    active = np.arange(reps)
    while active.size:
        draws = nm.sample_beta((a, b), rng, size=active.size)
        failed = draws <= y
        out[active[failed]] += 1
        active = active[failed]
    return out


def lemma1_csv(seed):
    rows = []
    for j, s, y in LEMMA1_TRIPLES:
        x = lemma1_counts(j, s, y, LEMMA1_REPS, seed)
        rows.append((j, s, y, x.mean(), x.std(ddof=1) / math.sqrt(x.size)))
    return rows, csv_text(("j", "s", "y", "mean", "stderr"), rows).encode()


# ---------------------------------------------------------------------------

def test_criterion_01_beta_binomial_sweep(acceptance_log):
    start = time.perf_counter()
    y = grid(0.01, 0.99, 0.01)
    worst = 0.0
    for a in range(1, 101):
        for b in range(1, 101):
            err = np.abs(nm.beta_cdf((a, b), y) - nm.beta_cdf_oracle((a, b), y)).max()
            worst = max(worst, float(err))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 60
    acceptance_log(1, "beta-binomial identity sweep", ok, f"max abs error {worst:.3g} < 1e-10, {elapsed:.1f}s < 60s")
    assert ok


def test_criterion_02_threshold_trials_monte_carlo(acceptance_log):
    start = time.perf_counter()
    rows, _ = lemma1_csv(seed=6001)
    elapsed = time.perf_counter() - start
    worst = 0.0
    for j, s, y, mean, se in rows:
        yy = mp.mpf(y)
        f = mp.fsum(mp.binomial(j + 1, k) * yy ** k * (1 - yy) ** (j + 1 - k) for k in range(s + 1))
        expected = float(1 / f - 1)
        assert nm.expected_interplay_gap(j, s, y) == pytest.approx(expected, rel=1e-12)
        worst = max(worst, abs(mean - expected) / se)
    ok = worst <= 3.0 and elapsed < 60
    acceptance_log(2, "threshold-trial Monte Carlo", ok, f"max |z| {worst:.2f} <= 3, {elapsed:.1f}s < 60s")
    assert ok


def test_criterion_03_binomial_median(acceptance_log):
    violations = []
    with mp.workdps(30):
        for n in range(0, 61):
            for p in grid(0.05, 0.95, 0.05):
                m = nm.binomial_median((n, float(p)))
                pmf = [mp.binomial(n, k) * mp.mpf(p) ** k * (1 - mp.mpf(p)) ** (n - k) for k in range(n + 1)]
                below = mp.fsum(pmf[:m + 1])
                above = mp.fsum(pmf[m:])
                if m not in (math.floor(n * p), math.ceil(n * p)) or below < 0.5 or above < 0.5:
                    violations.append((n, p, m))
    ok = not violations
    acceptance_log(3, "binomial median brute force", ok, f"{len(violations)} violations over 61 x 19 cases")
    assert ok, violations[:5]


def test_criterion_04_chernoff_grid(acceptance_log):
    worst = -math.inf
    cases = 0
    for n in (10, 50, 100, 500):
        for p in grid(0.1, 0.9, 0.1):
            for delta in grid(0.01, 0.3, 0.01):
                for side in nm.TAIL_SIDES:
                    q = nm.TailBoundQuery(n, float(p), float(delta), side)
                    tail = nm.exact_tail(q)
                    # independent evaluation of the same tail
                    if side == "lower":
                        ref = stats.binom.cdf(math.floor(round(n * p - n * delta, 9)), n, p)
                    else:
                        m = n + 1 if side == "upper_shifted" else n
                        ref = stats.binom.sf(math.floor(round(n * p + n * delta, 9)), m, p)
                    assert abs(tail - ref) < 1e-12
                    worst = max(worst, tail - nm.chernoff_tail_bound(q))
                    cases += 1
    ok = worst <= 0.0
    acceptance_log(4, "Chernoff dominance grid", ok, f"max(exact - bound) = {worst:.3g} <= 0 over {cases} cases")
    assert ok


def test_criterion_05_two_arm_regret(acceptance_log, mc):
    s, _, elapsed = mc.get("thm1")
    upper = s.mean_regret[-1] + 3 * s.stderr[-1]
    bound = thm1_bound(100_000, 0.1)
    r = dict(zip(s.checkpoints.tolist(), s.mean_regret))
    inc = (r[10_000] - r[1_000], r[100_000] - r[10_000])
    ratio = max(inc) / min(inc)
    ok = upper <= bound and ratio <= 2.5 and elapsed < 600
    acceptance_log(5, "two-arm regret vs bound", ok,
                   f"mean + 3 SE {upper:.2f} <= {bound:.2f}; decade increments {inc[0]:.2f}, {inc[1]:.2f} "
                   f"(ratio {ratio:.2f} <= 2.5); {elapsed:.0f}s")
    assert ok


def test_criterion_06_n_arm_regret(acceptance_log, mc):
    s, _, _ = mc.get("thm2")
    upper = s.mean_regret[-1] + 3 * s.stderr[-1]
    bound = thm2_bound(100_000, [0.1, 0.15, 0.2, 0.3])
    ok = upper <= bound
    acceptance_log(6, "N-arm regret vs bound", ok, f"mean + 3 SE {upper:.2f} <= {bound:.6g}")
    assert ok


def test_criterion_07_extra_optimal_arm(acceptance_log, mc):
    base, _, _ = mc.get("appendix_base")
    extra, _, _ = mc.get("appendix_extra")
    margin = 3 * math.hypot(base.stderr[-1], extra.stderr[-1])
    diff = extra.mean_regret[-1] - base.mean_regret[-1]
    ok = diff <= margin
    acceptance_log(7, "duplicated optimal arm", ok,
                   f"regret {extra.mean_regret[-1]:.2f} vs {base.mean_regret[-1]:.2f}, diff {diff:.2f} <= {margin:.2f}")
    assert ok


def test_criterion_08_binarized_rewards(acceptance_log, mc):
    bern, _, _ = mc.get("reduction_bernoulli")
    beta, _, _ = mc.get("reduction_beta")
    se = np.hypot(bern.counts_stderr[-1], beta.counts_stderr[-1])
    z = np.abs(bern.mean_counts[-1] - beta.mean_counts[-1]) / se
    ok = bool(np.all(z <= 3))
    acceptance_log(8, "binarized rewards reduction", ok,
                   f"plays {bern.mean_counts[-1].round(1).tolist()} vs {beta.mean_counts[-1].round(1).tolist()}, "
                   f"max |z| {z.max():.2f} <= 3")
    assert ok


def test_criterion_09_saturated_overshoot_frequency(acceptance_log, mc):
    s, _, _ = mc.get("lemma2")
    T, runs = 100, s.runs
    p = 2 / T ** 2
    threshold = p + 3 * math.sqrt(p * (1 - p) / runs)
    observed = s.e2_step_counts.max() / runs
    ok = observed <= threshold and s.e2_step_counts.size == T
    acceptance_log(9, "saturated-arm overshoot frequency", ok,
                   f"max per-step frequency {observed:.3g} <= {threshold:.3g} ({runs} runs)")
    assert ok


def test_criterion_10_delay_sublinear(acceptance_log, mc):
    ratios = {}
    for name in ("delay10", "delay100"):
        s, _, _ = mc.get(name)
        r = dict(zip(s.checkpoints.tolist(), s.mean_regret))
        ratios[name] = (r[100_000] / 100_000) / (r[10_000] / 10_000)
    ok = all(v < 0.5 for v in ratios.values())
    acceptance_log(10, "delayed-feedback sublinearity", ok,
                   ", ".join(f"d={n[5:]}: {v:.3f} < 0.5" for n, v in ratios.items()))
    assert ok


def test_criterion_11_determinism(acceptance_log, mc):
    mismatched = []
    for name, (inst, config, runs) in EXPERIMENTS.items():
        _, csv8, _ = mc.get(name)
        csv1 = summary_csv(name, config, run_monte_carlo(config, inst, runs, workers=1))
        if csv1 != csv8:
            mismatched.append(name)
    if lemma1_csv(6001)[1] != lemma1_csv(6001)[1]:
        mismatched.append("lemma1")
    ok = not mismatched
    acceptance_log(11, "determinism", ok,
                   f"{len(EXPERIMENTS) + 1} experiments, workers 1 vs {WORKERS}: "
                   + ("byte-identical CSV" if ok else f"differ: {mismatched}"))
    assert ok
