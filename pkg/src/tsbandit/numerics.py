"""Probability kernels: binomial and beta CDFs, samplers, KL divergence, tail bounds.

The binomial CDF is the workhorse. ``beta_cdf`` is computed *through* it
using the order-statistic identity

    F_beta(a, b; y) = 1 - F_binom(a + b - 1, y; a - 1),

and ``beta_cdf_oracle`` is an independent quadrature used to check that
identity. All scalar kernels are compiled with numba so they can be called
from the simulation loop and vectorised over large grids.
"""

from __future__ import annotations

import functools
import math
from typing import NamedTuple

import numba
import numpy as np

from .validation import check_probability

__all__ = [
    "BinomialParams",
    "BetaParams",
    "TailBoundQuery",
    "TAIL_SIDES",
    "binomial_pmf",
    "binomial_cdf",
    "binomial_cdf_summation",
    "binomial_cdf_incbeta",
    "beta_cdf",
    "beta_cdf_oracle",
    "sample_beta",
    "sample_beta_order_statistic",
    "sample_bernoulli",
    "kl_bernoulli",
    "expected_interplay_gap",
    "binomial_median",
    "chernoff_tail_bound",
    "exact_tail",
    "lemma3_envelope",
    "ks_statistic",
    "ks_critical_value",
]

# n above which the continued-fraction route replaces direct summation
SUMMATION_MAX_N = 10_000

TAIL_SIDES = ("lower", "upper", "upper_shifted")

_LN_2PI = math.log(2.0 * math.pi)

# stirlerr(n) = ln n! - (n + 1/2) ln n + n - ln sqrt(2 pi), exact for n <= 15
_STIRLERR_TABLE = np.array([
    0.0,
    0.08106146679532726,
    0.0413406959554093,
    0.02767792568499834,
    0.020790672103765093,
    0.016644691189821193,
    0.013876128823070748,
    0.01189670994589177,
    0.010411265261972096,
    0.009255462182712733,
    0.00833056343336287,
    0.007573675487951841,
    0.00694284010720953,
    0.006408994188004207,
    0.0059513701127588475,
    0.005554733551962801,
])


class BinomialParams(NamedTuple):
    n: int
    p: float


class BetaParams(NamedTuple):
    alpha: int
    beta: int


class TailBoundQuery(NamedTuple):
    n: int
    p: float
    delta: float
    side: str = "upper"


def _check_binomial(params):
    n, p = params
    if int(n) != n or n < 0:
        raise ValueError(f"binomial trial count must be a non-negative integer, got {n!r}")
    check_probability(p, "p")
    return int(n), float(p)


def _check_beta(params):
    a, b = params
    if int(a) != a or int(b) != b or a < 1 or b < 1:
        raise ValueError(f"beta shapes must be integers >= 1, got ({a!r}, {b!r})")
    return int(a), int(b)


# ---------------------------------------------------------------------------
# compiled kernels

@numba.njit(cache=True, nogil=True)
def _stirlerr(n):
    if n <= 15.0:
        return _STIRLERR_TABLE[int(n)]
    nn = n * n
    s0 = 1.0 / 12.0
    s1 = 1.0 / 360.0
    s2 = 1.0 / 1260.0
    s3 = 1.0 / 1680.0
    s4 = 1.0 / 1188.0
    if n > 500.0:
        return (s0 - s1 / nn) / n
    if n > 80.0:
        return (s0 - (s1 - s2 / nn) / nn) / n
    if n > 35.0:
        return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / n
    return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n


@numba.njit(cache=True, nogil=True)
def _bd0(x, np_):
    # x ln(x/np) + np - x without cancellation
    if abs(x - np_) < 0.1 * (x + np_):
        v = (x - np_) / (x + np_)
        s = (x - np_) * v
        ej = 2.0 * x * v
        v2 = v * v
        j = 1
        while j < 1000:
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
            j += 1
        return s
    return x * math.log(x / np_) + np_ - x


@numba.njit(cache=True, nogil=True)
def _dbinom(x, n, p):
    return _dbinom_pq(x, n, p, 1.0 - p)


@numba.njit(cache=True, nogil=True)
def _dbinom_pq(x, n, p, q):
    """Binomial pmf with relative accuracy near machine precision (saddle-point form).

    ``q = 1 - p`` is passed separately so callers holding an exact complement
    do not lose it to cancellation.
    """
    if x < 0 or x > n:
        return 0.0
    if p == 0.0:
        return 1.0 if x == 0 else 0.0
    if q == 0.0:
        return 1.0 if x == n else 0.0
    fn = float(n)
    if x == 0:
        if n == 0:
            return 1.0
        if p < 0.1:
            return math.exp(-_bd0(fn, fn * q) - fn * p)
        return math.exp(fn * math.log(q))
    if x == n:
        if q < 0.1:
            return math.exp(-_bd0(fn, fn * p) - fn * q)
        return math.exp(fn * math.log(p))
    fx = float(x)
    lc = (_stirlerr(fn) - _stirlerr(fx) - _stirlerr(fn - fx)
          - _bd0(fx, fn * p) - _bd0(fn - fx, fn * q))
    lf = _LN_2PI + math.log(fx) + math.log((fn - fx) / fn)
    return math.exp(lc - 0.5 * lf)


@numba.njit(cache=True, nogil=True)
def _cdf_summation(k, n, p):
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    if p == 0.0:
        return 1.0
    if p == 1.0:
        return 0.0
    q = 1.0 - p
    if k < n * p:
        # lower tail: terms decrease walking down from k
        term = _dbinom(k, n, p)
        total = term
        j = k
        while j > 0:
            term *= j * q / ((n - j + 1) * p)
            total += term
            if term < total * 1e-17:
                break
            j -= 1
        return min(total, 1.0)
    # upper tail: terms decrease walking up from k + 1
    term = _dbinom(k + 1, n, p)
    total = term
    j = k + 1
    while j < n:
        term *= (n - j) * p / ((j + 1) * q)
        total += term
        if term < total * 1e-17:
            break
        j += 1
    return max(1.0 - total, 0.0)


@numba.njit(cache=True, nogil=True)
def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 100_000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


@numba.njit(cache=True, nogil=True)
def _cdf_incbeta(k, n, p):
    # F(k; n, p) = I_{1-p}(n - k, k + 1)
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    if p == 0.0:
        return 1.0
    if p == 1.0:
        return 0.0
    a = float(n - k)
    b = float(k + 1)
    x = 1.0 - p
    # x^a (1-x)^b / B(a, b) rewritten as a binomial pmf for accuracy
    front = n * x * p * _dbinom_pq(n - k - 1, n - 1, x, p)
    if x < (a + 1.0) / (a + b + 2.0):
        return min(front * _betacf(a, b, x) / a, 1.0)
    return max(1.0 - front * _betacf(b, a, p) / b, 0.0)


@numba.njit(cache=True, nogil=True)
def _binomial_cdf(k, n, p):
    if n <= SUMMATION_MAX_N:
        return _cdf_summation(k, n, p)
    return _cdf_incbeta(k, n, p)


@numba.njit(cache=True, nogil=True)
def _beta_cdf(a, b, y):
    if y <= 0.0:
        return 0.0
    if y >= 1.0:
        return 1.0
    return 1.0 - _binomial_cdf(a - 1, a + b - 1, y)


@numba.njit(cache=True, nogil=True)
def _binomial_cdf_vec(k, n, p, out):
    for i in range(out.size):
        out[i] = _binomial_cdf(k[i], n[i], p[i])


@numba.njit(cache=True, nogil=True)
def _beta_cdf_vec(a, b, y, out):
    for i in range(out.size):
        out[i] = _beta_cdf(a[i], b[i], y[i])


# ---------------------------------------------------------------------------
# public API

def _vectorize(kernel, *args, dtypes):
    arrays = np.broadcast_arrays(*[np.asarray(a, dtype=d) for a, d in zip(args, dtypes)])
    shape = arrays[0].shape
    flat = [np.ascontiguousarray(a).ravel() for a in arrays]
    out = np.empty(flat[0].size)
    kernel(*flat, out)
    return out.reshape(shape)


def binomial_pmf(params, k):
    n, p = _check_binomial(params)
    return float(_dbinom(int(k), n, p))


def binomial_cdf(params, k):
    """Return ``Pr(X <= k)`` for ``X ~ Binomial(n, p)``.

    ``k`` may be any integer (or an integer array). Values below zero give
    exactly 0 and values at or above ``n`` give exactly 1.
    """
    n, p = _check_binomial(params)
    if np.ndim(k) == 0:
        return float(_binomial_cdf(int(k), n, p))
    return _vectorize(_binomial_cdf_vec, k, n, p, dtypes=(np.int64, np.int64, np.float64))


def binomial_cdf_summation(params, k):
    """Direct summation route, valid for any ``n`` (slow for very large ``n``)."""
    n, p = _check_binomial(params)
    return float(_cdf_summation(int(k), n, p))


def binomial_cdf_incbeta(params, k):
    """Regularized incomplete beta route, valid for any ``n``."""
    n, p = _check_binomial(params)
    return float(_cdf_incbeta(int(k), n, p))


def beta_cdf(params, y):
    """Beta CDF at integer shapes, evaluated through the binomial identity."""
    a, b = _check_beta(params)
    y_arr = np.asarray(y, dtype=float)
    if np.any((y_arr < 0.0) | (y_arr > 1.0)) or np.any(np.isnan(y_arr)):
        raise ValueError(f"y must lie in [0, 1], got {y!r}")
    if y_arr.ndim == 0:
        return float(_beta_cdf(a, b, float(y_arr)))
    return _vectorize(_beta_cdf_vec, a, b, y_arr, dtypes=(np.int64, np.int64, np.float64))


def beta_cdf_oracle(params, y):
    """Beta CDF by Gauss-Legendre quadrature of the unnormalised density.

    The density at integer shapes is a polynomial of degree ``a + b - 2``,
    so a rule with ``(a + b) // 2 + 1`` nodes per panel integrates it
    exactly. Panels are laid between the sorted query points, accumulated
    left to right and normalised by the integral over ``[0, 1]``. Shares no
    code with the binomial routines.
    """
    a, b = _check_beta(params)
    y_arr = np.asarray(y, dtype=float)
    if np.any((y_arr < 0.0) | (y_arr > 1.0)) or np.any(np.isnan(y_arr)):
        raise ValueError(f"y must lie in [0, 1], got {y!r}")
    flat = y_arr.ravel()
    order = np.argsort(flat, kind="stable")
    edges = np.concatenate(([0.0], flat[order], [1.0]))

    nodes, weights = _gauss_legendre(max(16, (a + b) // 2 + 2))
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    x = lo + half * (nodes + 1.0)
    # scale by the density at its mode so nothing overflows
    mode = (a - 1) / (a + b - 2) if a + b > 2 else 0.5
    with np.errstate(divide="ignore"):
        log_mode = _log_kernel(mode, a, b)
        dens = np.exp(_log_kernel(x, a, b) - log_mode)
    panels = (half[:, 0]) * (dens @ weights)
    cumulative = np.cumsum(panels)
    total = cumulative[-1]

    out = np.empty(flat.size)
    out[order] = cumulative[:-1] / total
    out = np.clip(out, 0.0, 1.0)
    if y_arr.ndim == 0:
        return float(out[0])
    return out.reshape(y_arr.shape)


@functools.lru_cache(maxsize=64)
def _gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


def _log_kernel(x, a, b):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        la = (a - 1) * np.log(x) if a > 1 else np.zeros_like(x)
        lb = (b - 1) * np.log1p(-x) if b > 1 else np.zeros_like(x)
    return la + lb


def sample_beta(params, rng, size=None):
    """Draw from Beta(a, b) using only the supplied generator."""
    a, b = _check_beta(params)
    return rng.beta(a, b, size=size)


def sample_beta_order_statistic(params, rng, size=None):
    """Draw Beta(a, b) as the a-th smallest of ``a + b - 1`` uniforms.

    Reference sampler for distribution checks; limited to ``a + b <= 64``.
    """
    a, b = _check_beta(params)
    if a + b > 64:
        raise ValueError("order-statistic sampler supports a + b <= 64 only")
    m = 1 if size is None else int(np.prod(size))
    u = rng.random((m, a + b - 1))
    u.sort(axis=1)
    draws = u[:, a - 1]
    if size is None:
        return float(draws[0])
    return draws.reshape(size)


def sample_bernoulli(p, rng):
    check_probability(p, "p")
    return 1 if rng.random() < p else 0


def kl_bernoulli(y, mu):
    """Bernoulli relative entropy D(y || mu) in nats.

    Uses ``0 ln 0 = 0`` and returns ``math.inf`` when ``mu`` puts zero mass
    where ``y`` does not.
    """
    check_probability(y, "y")
    check_probability(mu, "mu")
    total = 0.0
    for a, b in ((y, mu), (1.0 - y, 1.0 - mu)):
        if a == 0.0:
            continue
        if b == 0.0:
            return math.inf
        total += a * math.log(a / b)
    return max(total, 0.0)


def expected_interplay_gap(j, s, y):
    """Mean number of failed Beta(s+1, j-s+1) draws before one exceeds ``y``.

    Equals ``1 / F_binom(j + 1, y; s) - 1``. Returns ``math.inf`` when the
    success probability is zero (``y == 1``).
    """
    if int(j) != j or int(s) != s or not 0 <= s <= j:
        raise ValueError(f"need integers 0 <= s <= j, got j={j!r}, s={s!r}")
    check_probability(y, "y")
    f = _binomial_cdf(int(s), int(j) + 1, float(y))
    if f == 0.0:
        return math.inf
    return max(1.0 / f - 1.0, 0.0)


def binomial_median(params):
    """A median of Binomial(n, p), always one of floor(np), ceil(np)."""
    n, p = _check_binomial(params)
    lo, hi = math.floor(n * p), math.ceil(n * p)
    for m in sorted({lo, hi}):
        if _binomial_cdf(m, n, p) >= 0.5 and 1.0 - _binomial_cdf(m - 1, n, p) >= 0.5:
            return m
    raise ArithmeticError(f"no median among {{{lo}, {hi}}} for n={n}, p={p}")


def chernoff_tail_bound(q):
    n, p, delta, side = q
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta!r}")
    if side not in TAIL_SIDES:
        raise ValueError(f"side must be one of {TAIL_SIDES}, got {side!r}")
    bound = math.exp(-2.0 * n * delta * delta)
    if side == "upper_shifted":
        bound *= math.exp(4.0 * delta)
    return bound


def exact_tail(q):
    """The tail probability that ``chernoff_tail_bound`` dominates.

    lower:          F(n, p; np - n delta)
    upper:          1 - F(n, p; np + n delta)
    upper_shifted:  1 - F(n + 1, p; np + n delta)
    """
    n, p, delta, side = q
    _check_binomial((n, p))
    if side not in TAIL_SIDES:
        raise ValueError(f"side must be one of {TAIL_SIDES}, got {side!r}")
    if side == "lower":
        k = _floor(n * p - n * delta)
        return float(_binomial_cdf(k, n, p))
    k = _floor(n * p + n * delta)
    m = n + 1 if side == "upper_shifted" else n
    return 1.0 - float(_binomial_cdf(k, m, p))


def _floor(x):
    # snap values that are integers up to rounding
    r = round(x)
    if abs(x - r) < 1e-9:
        return int(r)
    return math.floor(x)


def lemma3_envelope(j, y, mu1, T):
    """Piecewise upper bound on E[min(X(j, s(j), y), T)] with s(j) ~ Binomial(j, mu1).

    Regimes are split at the real-valued thresholds ``(y / D) ln R`` and
    ``4 ln T / gap**2`` where ``gap = mu1 - y``, ``D = D(y || mu1)`` and
    ``R = mu1 (1 - y) / (y (1 - mu1))``.
    """
    if not 0.0 < y < mu1 < 1.0:
        raise ValueError(f"need 0 < y < mu1 < 1, got y={y!r}, mu1={mu1!r}")
    if j < 0 or T < 1:
        raise ValueError(f"need j >= 0 and T >= 1, got j={j!r}, T={T!r}")
    gap = mu1 - y
    d = kl_bernoulli(y, mu1)
    r = mu1 * (1.0 - y) / (y * (1.0 - mu1))
    decay = math.exp(-d * j)
    if j >= 4.0 * math.log(T) / gap ** 2:
        return 16.0 / T
    if j < (y / d) * math.log(r):
        return 1.0 + 2.0 / (1.0 - y) + mu1 / gap * decay
    return 1.0 + r ** y / (1.0 - y) * decay + mu1 / gap * decay


def ks_statistic(sample, cdf):
    """One-sample Kolmogorov-Smirnov statistic of ``sample`` against ``cdf``."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_critical_value(n, alpha=1e-3):
    """Asymptotic KS critical value sqrt(-ln(alpha / 2) / 2) / sqrt(n)."""
    return math.sqrt(-math.log(alpha / 2.0) / 2.0) / math.sqrt(n)
