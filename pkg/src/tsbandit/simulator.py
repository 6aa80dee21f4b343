"""Seeded bandit runs, Monte Carlo ensembles, delayed feedback and run diagnostics.

One run is a compiled loop over ``T`` steps. Every step does, in order:

1. select an arm (Thompson Sampling draws one Beta variate per arm, arm 0
   first; UCB1 draws nothing; uniform play draws one integer),
2. draw the arm's raw reward,
3. binarize it with one further uniform (Thompson Sampling only),
4. enqueue the feedback and deliver whatever the delay model releases,
5. add the arm's gap to the pseudo-regret.

Run ``i`` of an ensemble with base seed ``s`` uses the stream
``PCG64(SeedSequence(s, spawn_key=(i,)))``, so results depend only on
``(s, i)`` and never on scheduling.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
from sklearn.base import BaseEstimator

from .bandit_core import (
    BanditInstance,
    FeedbackEvent,
    PosteriorState,
    _binarize,
    _draw_reward,
)
from .policies import (
    POLICY_KINDS,
    THOMPSON,
    UCB1_CODE,
    Ucb1State,
    _argmax_low,
    _ts_sample,
    _ucb1_select,
)
from .validation import check_horizon

__all__ = [
    "DelayModel",
    "RunConfig",
    "Trace",
    "DiagnosticsRecord",
    "RegretSummary",
    "run_generator",
    "saturation_thresholds",
    "run_single",
    "run_single_reference",
    "run_monte_carlo",
    "delayed_feedback_step",
    "collect_diagnostics",
    "BanditExperiment",
]

NO_DELAY, FIXED_DELAY, BATCH_DELAY = range(3)
_DELAY_CODES = {"none": NO_DELAY, "fixed": FIXED_DELAY, "batch": BATCH_DELAY}


@dataclass(frozen=True)
class DelayModel:
    """Feedback latency: ``none``, ``fixed`` (``d`` steps) or ``batch`` (every ``B`` steps).

    ``fixed`` with ``d = 0`` and ``batch`` with ``B = 1`` normalise to ``none``.
    """

    kind: str = "none"
    param: int = 0

    def __post_init__(self):
        if self.kind not in _DELAY_CODES:
            raise ValueError(f"delay kind must be one of {sorted(_DELAY_CODES)}, got {self.kind!r}")
        param = int(self.param)
        if param != self.param:
            raise ValueError(f"delay parameter must be an integer, got {self.param!r}")
        if self.kind == "fixed" and param < 0:
            raise ValueError(f"fixed delay must be >= 0, got {param}")
        if self.kind == "batch" and param < 1:
            raise ValueError(f"batch size must be >= 1, got {param}")
        if self.kind == "none" or (self.kind == "fixed" and param == 0) or (self.kind == "batch" and param == 1):
            object.__setattr__(self, "kind", "none")
            param = 0
        object.__setattr__(self, "param", param)

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def fixed(cls, d):
        return cls("fixed", d)

    @classmethod
    def batch(cls, size):
        return cls("batch", size)

    def to_dict(self):
        if self.kind == "fixed":
            return {"kind": "fixed", "d": self.param}
        if self.kind == "batch":
            return {"kind": "batch", "size": self.param}
        return {"kind": "none"}

    @classmethod
    def from_dict(cls, spec):
        spec = dict(spec)
        kind = spec.pop("kind", "none")
        key = {"fixed": "d", "batch": "size"}.get(kind)
        allowed = {key} if key else set()
        unknown = set(spec) - allowed
        if unknown:
            raise ValueError(f"unknown delay key(s) {sorted(unknown)} for kind {kind!r}")
        if key and key not in spec:
            raise ValueError(f"delay kind {kind!r} needs {key!r}")
        return cls(kind, spec.get(key, 0))


@dataclass(frozen=True)
class RunConfig:
    horizon: int
    seed: int = 0
    policy: str = "thompson"
    delay: DelayModel = field(default_factory=DelayModel)
    checkpoints: tuple = None
    diagnostics: bool = False

    def __post_init__(self):
        T = check_horizon(self.horizon, "horizon")
        object.__setattr__(self, "horizon", int(T))
        if self.policy not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {sorted(POLICY_KINDS)}")
        if int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2**64:
            raise ValueError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))
        cps = (T,) if self.checkpoints is None else tuple(int(c) for c in self.checkpoints)
        if not cps:
            raise ValueError("at least one checkpoint is required")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ValueError(f"checkpoints must be strictly increasing, got {list(cps)}")
        if cps[0] < 1 or cps[-1] > T:
            raise ValueError(f"checkpoints must lie in [1, {T}], got {list(cps)}")
        object.__setattr__(self, "checkpoints", cps)
        if self.diagnostics and self.policy != "thompson":
            raise ValueError("diagnostics need posterior samples and are only defined for policy 'thompson'")


@dataclass
class DiagnosticsRecord:
    """Per-run saturation and posterior-sample diagnostics.

    saturation_time[i]
        First step ``t`` at which arm ``i`` has been played at least
        ``thresholds[i]`` times before ``t``; ``-1`` if never (and always for
        optimal arms).
    e2_steps / e_steps
        Per-step indicators. ``e2`` flags a saturated suboptimal arm whose
        sample exceeds ``mu_i + gap_i / 2``; ``e`` flags one whose sample
        leaves ``[mu_i - gap_i / 2, mu_i + gap_i / 2]``.
    optimal_head, interplay_gaps
        Steps before the first play of an optimal arm, and the numbers of
        steps strictly between consecutive optimal plays. The last gap runs
        to the horizon and is censored.
    """

    thresholds: np.ndarray
    saturation_time: np.ndarray
    e2_steps: np.ndarray
    e_steps: np.ndarray
    optimal_head: int
    interplay_gaps: np.ndarray

    @property
    def e2_violations(self):
        return int(self.e2_steps.sum())

    @property
    def e_violations(self):
        return int(self.e_steps.sum())


@dataclass
class Trace:
    checkpoints: np.ndarray
    regret: np.ndarray
    counts: np.ndarray
    posterior: PosteriorState = None
    ucb1: Ucb1State = None
    diagnostics: DiagnosticsRecord = None

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        same = (np.array_equal(self.checkpoints, other.checkpoints)
                and np.array_equal(self.regret, other.regret)
                and np.array_equal(self.counts, other.counts)
                and self.posterior == other.posterior)
        if not same or (self.diagnostics is None) != (other.diagnostics is None):
            return False
        if self.diagnostics is None:
            return True
        a, b = self.diagnostics, other.diagnostics
        return (np.array_equal(a.saturation_time, b.saturation_time)
                and np.array_equal(a.e2_steps, b.e2_steps)
                and np.array_equal(a.e_steps, b.e_steps)
                and a.optimal_head == b.optimal_head
                and np.array_equal(a.interplay_gaps, b.interplay_gaps))


@dataclass
class RegretSummary:
    """Cross-run aggregate. ``stderr`` is NaN when only one run was made."""

    checkpoints: np.ndarray
    mean_regret: np.ndarray
    stderr: np.ndarray
    runs: int
    mean_counts: np.ndarray
    counts_stderr: np.ndarray
    e2_step_counts: np.ndarray = None
    e_step_counts: np.ndarray = None
    saturated_runs: np.ndarray = None


def run_generator(seed, run_index=0):
    """The random stream owned by run ``run_index`` of an ensemble seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(run_index,))))


def saturation_thresholds(instance, T):
    """``ceil(24 ln T / gap_i**2)`` per suboptimal arm; optimal arms get an unreachable value."""
    gaps = instance.gaps
    out = np.full(instance.n_arms, np.iinfo(np.int64).max, dtype=np.int64)
    for i, g in enumerate(gaps):
        if g > 0:
            out[i] = math.ceil(24.0 * math.log(T) / g ** 2)
    return out


# ---------------------------------------------------------------------------
# compiled run loop

@numba.njit(cache=True, nogil=True)
def _run_kernel(policy, law, params, support, cumprob, means, gaps, T,
                delay_kind, delay_param, checkpoints, diag, thresholds, rng):
    n = means.size
    n_ck = checkpoints.size
    regret_ck = np.zeros(n_ck)
    counts_ck = np.zeros((n_ck, n), dtype=np.int64)

    plays = np.zeros(n, dtype=np.int64)
    succ = np.zeros(n, dtype=np.int64)
    fail = np.zeros(n, dtype=np.int64)
    ucb_counts = np.zeros(n, dtype=np.int64)
    ucb_means = np.zeros(n)
    theta = np.zeros(n)

    if delay_kind == 1:
        cap = delay_param + 1
    elif delay_kind == 2:
        cap = delay_param
    else:
        cap = 1
    q_arm = np.zeros(cap, dtype=np.int64)
    q_raw = np.zeros(cap)
    q_bin = np.zeros(cap, dtype=np.int64)
    q_len = 0

    diag_len = T if diag else 0
    sat_time = np.full(n, -1, dtype=np.int64)
    e2_steps = np.zeros(diag_len, dtype=np.uint8)
    e_steps = np.zeros(diag_len, dtype=np.uint8)
    opt_times = np.zeros(diag_len, dtype=np.int64)
    n_opt = 0

    regret = 0.0
    ck = 0
    for t in range(1, T + 1):
        if policy == 0:
            _ts_sample(succ, fail, rng, theta)
            arm = _argmax_low(theta)
        elif policy == 1:
            arm = _ucb1_select(ucb_counts, ucb_means, t)
        else:
            arm = rng.integers(0, n)

        if diag:
            for i in range(n):
                if gaps[i] > 0.0 and plays[i] >= thresholds[i]:
                    if sat_time[i] < 0:
                        sat_time[i] = t
                    half = 0.5 * gaps[i]
                    if theta[i] > means[i] + half:
                        e2_steps[t - 1] = 1
                        e_steps[t - 1] = 1
                    elif theta[i] < means[i] - half:
                        e_steps[t - 1] = 1
            if gaps[arm] == 0.0:
                opt_times[n_opt] = t
                n_opt += 1

        raw = _draw_reward(law, params, support, cumprob, arm, rng)
        if policy == 0:
            outcome = _binarize(raw, rng)
        else:
            outcome = 0
        plays[arm] += 1
        regret += gaps[arm]

        # enqueue, then release what is due at this step
        if delay_kind == 1:
            slot = t % cap
            q_arm[slot] = arm
            q_raw[slot] = raw
            q_bin[slot] = outcome
            first = t - delay_param
            if first >= 1:
                slot = first % cap
                _deliver(policy, q_arm[slot], q_raw[slot], q_bin[slot], succ, fail, ucb_counts, ucb_means)
        elif delay_kind == 2:
            q_arm[q_len] = arm
            q_raw[q_len] = raw
            q_bin[q_len] = outcome
            q_len += 1
            if t % delay_param == 0:
                for k in range(q_len):
                    _deliver(policy, q_arm[k], q_raw[k], q_bin[k], succ, fail, ucb_counts, ucb_means)
                q_len = 0
        else:
            _deliver(policy, arm, raw, outcome, succ, fail, ucb_counts, ucb_means)

        if ck < n_ck and t == checkpoints[ck]:
            regret_ck[ck] = regret
            for i in range(n):
                counts_ck[ck, i] = plays[i]
            ck += 1

    return (regret_ck, counts_ck, succ, fail, ucb_counts, ucb_means,
            sat_time, e2_steps, e_steps, opt_times[:n_opt])


@numba.njit(cache=True, nogil=True)
def _deliver(policy, arm, raw, outcome, succ, fail, ucb_counts, ucb_means):
    if policy == 0:
        if outcome == 1:
            succ[arm] += 1
        else:
            fail[arm] += 1
    elif policy == 1:
        ucb_counts[arm] += 1
        ucb_means[arm] += (raw - ucb_means[arm]) / ucb_counts[arm]


# ---------------------------------------------------------------------------
# single runs

class _Prepared:
    """Per-(config, instance) arrays, built once and shared by every run."""

    def __init__(self, config, instance):
        self.config = config
        self.instance = instance
        self.encoded = instance.encode()
        self.means = instance.means
        self.gaps = instance.gaps
        self.thresholds = saturation_thresholds(instance, config.horizon)
        self.checkpoints = np.asarray(config.checkpoints, dtype=np.int64)
        self.policy = POLICY_KINDS[config.policy]
        self.delay_kind = _DELAY_CODES[config.delay.kind]

    def raw(self, rng):
        c = self.config
        law, params, support, cumprob = self.encoded
        return _run_kernel(self.policy, law, params, support, cumprob, self.means, self.gaps,
                           c.horizon, self.delay_kind, c.delay.param, self.checkpoints,
                           c.diagnostics, self.thresholds, rng)

    def trace(self, out):
        regret_ck, counts_ck, succ, fail, ucb_counts, ucb_means = out[:6]
        c = self.config
        trace = Trace(self.checkpoints.copy(), regret_ck, counts_ck)
        if self.policy == THOMPSON:
            trace.posterior = PosteriorState(successes=succ, failures=fail)
        elif self.policy == UCB1_CODE:
            trace.ucb1 = Ucb1State(ucb_counts, ucb_means, c.horizon + 1)
        if c.diagnostics:
            internals = {"sat_time": out[6], "e2_steps": out[7], "e_steps": out[8], "optimal_play_times": out[9]}
            trace.diagnostics = collect_diagnostics(internals, self.instance, c.horizon, self.thresholds)
        return trace


def run_single(config, instance, run_index=0):
    """Execute one seeded run and return its trace.

    The result is a pure function of ``(config, instance, run_index)``.
    """
    prepared = _Prepared(config, instance)
    return prepared.trace(prepared.raw(run_generator(config.seed, run_index)))


def collect_diagnostics(internals, instance, T, thresholds=None):
    """Assemble a :class:`DiagnosticsRecord` from a run's raw per-step records.

    ``internals`` maps ``sat_time``, ``e2_steps``, ``e_steps`` and
    ``optimal_play_times`` (1-based steps at which an optimal arm was played).
    """
    if thresholds is None:
        thresholds = saturation_thresholds(instance, T)
    times = np.asarray(internals["optimal_play_times"], dtype=np.int64)
    if times.size == 0:
        head = T
        gaps = np.zeros(0, dtype=np.int64)
    else:
        head = int(times[0] - 1)
        # the final gap is censored at the horizon
        gaps = np.diff(np.append(times, T + 1)) - 1
    return DiagnosticsRecord(
        thresholds=np.asarray(thresholds),
        saturation_time=np.asarray(internals["sat_time"], dtype=np.int64),
        e2_steps=np.asarray(internals["e2_steps"], dtype=bool),
        e_steps=np.asarray(internals["e_steps"], dtype=bool),
        optimal_head=head,
        interplay_gaps=gaps,
    )


def delayed_feedback_step(queue, t, delay):
    """Remove and return the events of ``queue`` that ``delay`` releases at step ``t``.

    ``queue`` is a deque of :class:`FeedbackEvent` in play order; events
    played at step ``t`` itself must already be in it.
    """
    if delay.kind == "none":
        due = list(queue)
        queue.clear()
        return due
    if delay.kind == "fixed":
        due = []
        while queue and queue[0].t_played <= t - delay.param:
            due.append(queue.popleft())
        return due
    if t % delay.param == 0:
        due = list(queue)
        queue.clear()
        return due
    return []


def run_single_reference(config, instance, run_index=0):
    """Plain-Python run loop, step for step the same as :func:`run_single`.

    Slow. Exists so the compiled loop has an independent implementation to
    be checked against (same streams give identical traces).
    """
    from .bandit_core import binarize, draw_reward
    from .policies import policy_observe, ucb1_select, uniform_select

    rng = run_generator(config.seed, run_index)
    T = config.horizon
    n = instance.n_arms
    gaps = instance.gaps
    means = instance.means
    thresholds = saturation_thresholds(instance, T)
    posterior = PosteriorState(n)
    ucb = Ucb1State.empty(n)
    plays = np.zeros(n, dtype=np.int64)
    queue = deque()
    regret = 0.0
    regret_ck, counts_ck = [], []
    checkpoints = set(config.checkpoints)
    sat_time = np.full(n, -1, dtype=np.int64)
    e2_steps = np.zeros(T if config.diagnostics else 0, dtype=bool)
    e_steps = np.zeros_like(e2_steps)
    optimal_times = []

    for t in range(1, T + 1):
        if config.policy == "thompson":
            theta = np.array([rng.beta(posterior.successes[i] + 1.0, posterior.failures[i] + 1.0)
                              for i in range(n)])
            arm = int(np.argmax(theta))
        elif config.policy == "ucb1":
            ucb.t = t
            arm = ucb1_select(ucb)
        else:
            arm = uniform_select(n, rng)

        if config.diagnostics:
            for i in range(n):
                if gaps[i] > 0 and plays[i] >= thresholds[i]:
                    if sat_time[i] < 0:
                        sat_time[i] = t
                    if theta[i] > means[i] + gaps[i] / 2:
                        e2_steps[t - 1] = e_steps[t - 1] = True
                    elif theta[i] < means[i] - gaps[i] / 2:
                        e_steps[t - 1] = True
            if gaps[arm] == 0:
                optimal_times.append(t)

        raw = draw_reward(instance, arm, rng)
        outcome = binarize(raw, rng) if config.policy == "thompson" else 0
        plays[arm] += 1
        regret += gaps[arm]
        queue.append(FeedbackEvent(t, arm, raw, outcome))
        for ev in delayed_feedback_step(queue, t, config.delay):
            state = posterior if config.policy == "thompson" else ucb
            policy_observe(config.policy, state, ev.arm, ev.raw_reward, ev.binarized)
        if t in checkpoints:
            regret_ck.append(regret)
            counts_ck.append(plays.copy())

    trace = Trace(np.asarray(config.checkpoints, dtype=np.int64), np.array(regret_ck), np.array(counts_ck))
    if config.policy == "thompson":
        trace.posterior = posterior
    elif config.policy == "ucb1":
        ucb.t = T + 1
        trace.ucb1 = ucb
    if config.diagnostics:
        internals = {"sat_time": sat_time, "e2_steps": e2_steps, "e_steps": e_steps,
                     "optimal_play_times": optimal_times}
        trace.diagnostics = collect_diagnostics(internals, instance, T, thresholds)
    return trace


# ---------------------------------------------------------------------------
# ensembles

def _run_chunk(prepared, start, stop, regret, counts, diag_sums):
    """Runs ``start .. stop - 1`` into their indexed rows; returns this chunk's diagnostics sums."""
    T = prepared.config.horizon
    n = prepared.instance.n_arms
    if prepared.config.diagnostics:
        e2 = np.zeros(T, dtype=np.int64)
        e = np.zeros(T, dtype=np.int64)
        sat = np.zeros(n, dtype=np.int64)
    for i in range(start, stop):
        out = prepared.raw(run_generator(prepared.config.seed, i))
        regret[i] = out[0]
        counts[i] = out[1]
        if prepared.config.diagnostics:
            e2 += out[7]
            e += out[8]
            sat += out[6] > 0
    if prepared.config.diagnostics:
        diag_sums[start] = (e2, e, sat)


def run_monte_carlo(config, instance, runs, workers=1, chunk_size=None):
    """Run ``runs`` independent replications and aggregate them.

    Every run writes into its own row, and rows are reduced in index order
    once all work is done, so the summary is identical for any ``workers``.
    """
    runs = check_horizon(runs, "runs")
    workers = check_horizon(workers, "workers")
    prepared = _Prepared(config, instance)
    n_ck = len(config.checkpoints)
    regret = np.zeros((runs, n_ck))
    counts = np.zeros((runs, n_ck, instance.n_arms), dtype=np.int64)
    diag_sums = {}

    if chunk_size is None:
        chunk_size = max(1, min(256, math.ceil(runs / (4 * workers))))
    bounds = [(s, min(s + chunk_size, runs)) for s in range(0, runs, chunk_size)]
    if workers == 1:
        for s, e in bounds:
            _run_chunk(prepared, s, e, regret, counts, diag_sums)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, prepared, s, e, regret, counts, diag_sums) for s, e in bounds]
            for f in futures:
                f.result()

    mean = regret.mean(axis=0)
    mean_counts = counts.mean(axis=0)
    if runs > 1:
        se = regret.std(axis=0, ddof=1) / math.sqrt(runs)
        counts_se = counts.std(axis=0, ddof=1) / math.sqrt(runs)
    else:
        se = np.full(n_ck, np.nan)
        counts_se = np.full(mean_counts.shape, np.nan)
    summary = RegretSummary(np.asarray(config.checkpoints, dtype=np.int64), mean, se, runs,
                            mean_counts, counts_se)
    if config.diagnostics:
        parts = [diag_sums[s] for s, _ in bounds]
        summary.e2_step_counts = np.sum([p[0] for p in parts], axis=0)
        summary.e_step_counts = np.sum([p[1] for p in parts], axis=0)
        summary.saturated_runs = np.sum([p[2] for p in parts], axis=0)
    return summary


class BanditExperiment(BaseEstimator):
    """Monte Carlo regret estimation behind the scikit-learn parameter protocol.

    ``fit(instance)`` runs the ensemble and stores ``summary_``. Because the
    configuration lives in constructor parameters, experiments can be cloned
    and swept with ``sklearn.model_selection.ParameterGrid``.
    """

    def __init__(self, policy="thompson", horizon=1000, runs=100, seed=0,
                 delay=None, checkpoints=None, diagnostics=False, workers=1):
        self.policy = policy
        self.horizon = horizon
        self.runs = runs
        self.seed = seed
        self.delay = delay
        self.checkpoints = checkpoints
        self.diagnostics = diagnostics
        self.workers = workers

    def run_config(self):
        delay = self.delay if self.delay is not None else DelayModel()
        if isinstance(delay, dict):
            delay = DelayModel.from_dict(delay)
        return RunConfig(self.horizon, self.seed, self.policy, delay,
                         None if self.checkpoints is None else tuple(self.checkpoints),
                         self.diagnostics)

    def fit(self, instance, y=None):
        if not isinstance(instance, BanditInstance):
            instance = BanditInstance.from_means(instance)
        self.config_ = self.run_config()
        self.summary_ = run_monte_carlo(self.config_, instance, self.runs, self.workers)
        self.instance_ = instance
        return self

    def predict(self, checkpoints=None):
        """Mean pseudo-regret at the fitted checkpoints (or a subset of them)."""
        from sklearn.utils.validation import check_is_fitted
        check_is_fitted(self, "summary_")
        if checkpoints is None:
            return self.summary_.mean_regret.copy()
        fitted = self.summary_.checkpoints.tolist()
        missing = [c for c in checkpoints if c not in fitted]
        if missing:
            raise ValueError(f"checkpoint(s) {missing} were not recorded; fitted checkpoints are {fitted}")
        return self.summary_.mean_regret[[fitted.index(c) for c in checkpoints]]
