"""Large-deviation estimators for the self-intersection local time.

Green-function constants, exact and Monte Carlo laws of Q_n, finite-n rate
functions, the weakly self-avoiding walk free energy with two-sided bounds,
self-avoiding walk counts and range probes.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import zeta

from . import _kernels
from . import lattice_walk as lw
from ._stats import batch_log_mean, indicator_mean
from .errors import BudgetExceeded
from .streams import run_sharded, spawn_streams, split_counts

EXACT_BUDGET = 4**12
LAMBDA_2 = 2.0 / math.pi


# ---------------------------------------------------------------------------
# Green constants and E[Q_n]
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GreenConstants:
    d: int
    lam: float
    G: float | None = None
    truncation: int | None = None
    tail: float | None = None
    tail_bound: float | None = None
    half_level_G: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _tail_fit(p: np.ndarray, d: int, R: int) -> float:
    """Fitted value of sum_{r > R} p_r.

    Even-time return probabilities behave like A k^{-d/2} (1 + B/k + C/k^2)
    with k = r/2; the three coefficients are fitted on the top half of the
    computed range and the tail is summed with Hurwitz zeta functions.
    """
    K = R // 2
    ks = np.arange(K // 2, K + 1, dtype=float)
    y = p[2 * ks.astype(int)] * ks ** (d / 2)
    X = np.stack([np.ones_like(ks), 1 / ks, 1 / ks**2], axis=1)
    A, AB, AC = np.linalg.lstsq(X, y, rcond=None)[0]
    s = d / 2
    return float(A * zeta(s, K + 1) + AB * zeta(s + 1, K + 1) + AC * zeta(s + 2, K + 1))


def green_constants(d: int, eps: float = 1e-4, n_max: int = 2**14) -> GreenConstants:
    """G_d and lambda_d = 2 G_d - 1; for d = 2 only lambda_2 = 2/pi.

    G_d is the truncated sum of return probabilities up to ``n_max`` plus a
    fitted tail.  The same computation at ``n_max / 2`` must agree to
    ``eps``; the difference is reported as the tail bound.
    """
    if d == 2:
        return GreenConstants(2, LAMBDA_2)
    if d < 2 or d > lw.MAX_DIM:
        raise ValueError("the Green constant is defined for 3 <= d <= 5 (d = 2 gives lambda_2 only)")
    if eps <= 0:
        raise ValueError("eps must be positive")
    p = lw.return_probabilities(d, n_max, method="split")
    vals = []
    for R in (n_max // 2, n_max):
        head = math.fsum(p[: R + 1])
        vals.append((head + _tail_fit(p, d, R), _tail_fit(p, d, R)))
    (g_half, _), (g, tail) = vals
    bound = abs(g - g_half)
    if bound >= eps:
        raise ArithmeticError(f"truncation levels disagree by {bound:.3g} >= eps; raise n_max")
    return GreenConstants(d, 2 * g - 1, g, n_max, tail, bound, g_half)


@functools.lru_cache(maxsize=None)
def lambda_d(d: int) -> float:
    return green_constants(d).lam


def green_function(d: int) -> float:
    if d == 2:
        raise ValueError("the Green function diverges in d = 2")
    return green_constants(d).G


@dataclass(frozen=True)
class ExpectedQ:
    d: int
    n: int
    value: float
    ratio: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _eq_from_table(p: np.ndarray, n: int) -> float:
    r = np.arange(1, n)
    return n + 2.0 * math.fsum((n - r) * p[1:n])


def expected_q(d: int, n: int, p: np.ndarray | None = None) -> ExpectedQ:
    """E[Q_n] = n + 2 sum_{r=1}^{n-1} (n - r) p_r, with the asymptotic ratio
    E[Q_n]/(n log n) for d = 2 and E[Q_n]/n otherwise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if p is None or p.shape[0] < n:
        p = lw.return_probabilities(d, max(n - 1, 1))
    v = _eq_from_table(p, n)
    ratio = v / (n * math.log(n)) if d == 2 and n > 1 else v / n
    return ExpectedQ(d, n, v, ratio)


def expected_q_series(d: int, ns: Sequence[int]) -> list[ExpectedQ]:
    p = lw.return_probabilities(d, max(max(ns) - 1, 1))
    return [expected_q(d, n, p) for n in ns]


def slope_vs_log(ns: Sequence[int], values: Sequence[float]) -> float:
    """Least-squares slope of values/n against log n."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.asarray(values, dtype=float) / np.asarray(ns, dtype=float)
    return float(np.polyfit(x, y, 1)[0])


def corrected_density(ns: Sequence[int], values: Sequence[float]) -> tuple[float, float]:
    """Fit E[Q_n]/n = L + b n^{-1/2} + c/n; returns (L, b)."""
    n = np.asarray(ns, dtype=float)
    y = np.asarray(values, dtype=float) / n
    X = np.stack([np.ones_like(n), n**-0.5, 1 / n], axis=1)
    L, b, _ = np.linalg.lstsq(X, y, rcond=None)[0]
    return float(L), float(b)


# ---------------------------------------------------------------------------
# the law of Q_n
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=16)
def _histogram(d: int, n: int, budget: int) -> lw.OccupationHistogram:
    return lw.occupation_histogram(d, n, budget=budget)


@dataclass(frozen=True)
class QDistribution:
    """Exact or empirical law of Q_n (and the joint law with the bridge event)."""

    d: int
    n: int
    method: str
    support: np.ndarray = field(repr=False)
    probs: np.ndarray = field(repr=False)
    bridge_probs: np.ndarray = field(repr=False)
    samples: int = 0

    @property
    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    @property
    def var(self) -> float:
        return float(np.dot(self.support.astype(float) ** 2, self.probs) - self.mean**2)

    def tail(self, t: float, bridges_only: bool = False) -> float:
        """P(Q_n <= t n) (jointly with B_n when ``bridges_only``)."""
        pr = self.bridge_probs if bridges_only else self.probs
        return float(pr[self.support <= t * self.n + 1e-9].sum())

    def log_mgf(self, u: float, bridges_only: bool = False) -> float:
        """log E[exp(-u Q_n)] (restricted to bridges when ``bridges_only``)."""
        pr = self.bridge_probs if bridges_only else self.probs
        mask = pr > 0
        x = np.log(pr[mask]) - u * self.support[mask]
        m = x.max()
        return float(m + np.log(np.exp(x - m).sum()))

    def to_pairs(self) -> list[tuple[int, float]]:
        return [(int(q), float(p)) for q, p in zip(self.support, self.probs)]


def exact_q_distribution(d: int, n: int, budget: int = EXACT_BUDGET) -> QDistribution:
    h = _histogram(d, n, budget)
    hist = h.q_histogram()
    bh = h.q_histogram(bridges_only=True)
    total = (2 * d) ** n
    support = np.array(sorted(hist), dtype=np.int64)
    probs = np.array([hist[q] / total for q in support])
    bprobs = np.array([bh.get(int(q), 0) / total for q in support])
    return QDistribution(d, n, "exact", support, probs, bprobs)


def exact_q_counts(d: int, n: int, budget: int = EXACT_BUDGET) -> dict[int, int]:
    return _histogram(d, n, budget).q_histogram()


def mc_q_distribution(d: int, n: int, samples: int, seed: int, shards: int = 1) -> QDistribution:
    st = lw.sample_stats(d, n, samples, seed, shards)
    q = st["q"]
    support, counts = np.unique(q, return_counts=True)
    b = np.bincount(np.searchsorted(support, q[st["bridge"]]), minlength=support.size)
    return QDistribution(d, n, "mc", support, counts / samples, b / samples, samples)


def q_distribution(d: int, n: int, method: str = "exact", samples: int = 10**5,
                   seed: int | None = None, shards: int = 1) -> QDistribution:
    if method == "exact":
        return exact_q_distribution(d, n)
    if method == "mc":
        return mc_q_distribution(d, n, samples, seed, shards)
    if method == "tilted_mc":
        raise ValueError("tilted_mc gives tail estimates only; use tail_probability")
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class TailEstimate:
    """Estimate of P(Q_n <= t n) and of P(Q_n <= t n, B_n)."""

    d: int
    n: int
    t: float
    p: float
    stderr: float
    bridge_p: float
    bridge_stderr: float
    method: str
    gamma: float = 0.0
    ess: float | None = None
    samples: int = 0
    strip: "StripBound | None" = None


@dataclass(frozen=True)
class StripBound:
    """Constructive lower bound on P(Q_n <= t n).

    Write n = p m + q with 0 <= q < m.  Run p independent m-step bridges
    (in the first coordinate), each with Q_m <= tau, then q steps along +e_1.
    Consecutive bridges occupy disjoint slabs of the first coordinate, so on
    this event Q_n <= p tau + q, and tau = (t n - q) / p makes that <= t n.
    Hence log P(Q_n <= t n) >= p log u_m - q log 2d, u_m = P(Q_m <= tau, B_m).
    """

    n: int
    t: float
    m: int
    p: int
    q: int
    tau: float
    u_m: float
    u_stderr: float
    exact: bool
    log_lower: float

    @property
    def exponent(self) -> float:
        """-(1/n) log of the lower bound: an upper bound on I_n(t)."""
        return -self.log_lower / self.n


def strip_lower_bound(d: int, n: int, t: float, m: int, samples: int = 10**5,
                      seed: int | None = None, shards: int = 1) -> StripBound:
    if not 1 <= m <= n:
        raise ValueError("block length must satisfy 1 <= m <= n")
    p, q = divmod(n, m)
    tau = (t * n - q) / p
    if tau < m:
        # a block has Q_m >= m, so the event is empty
        return StripBound(n, t, m, p, q, tau, 0.0, 0.0, True, -math.inf)
    if (2 * d) ** m <= EXACT_BUDGET:
        qd = exact_q_distribution(d, m)
        u, se, exact = qd.tail(tau / m, bridges_only=True), 0.0, True
    else:
        if seed is None:
            raise ValueError("a seed is required for Monte Carlo blocks")
        st = lw.sample_stats(d, m, samples, seed, shards)
        u, se = indicator_mean(st["bridge"] & (st["q"] <= tau + 1e-9))
        exact = False
    log_lower = p * math.log(u) - q * math.log(2 * d) if u > 0 else -math.inf
    return StripBound(n, t, m, p, q, tau, u, se, exact, log_lower)


def _tilted_run(d, n, gamma, count, rng):
    inc = -float(gamma) * (2.0 * np.arange(n + 1) + 1.0)
    q, lr, _, br, _ = _kernels.growth(rng, d, n, inc, int(count), False)
    return q, lr, br


def choose_gamma(d: int, n: int, t: float, rng: np.random.Generator, pilot: int = 200,
                 iters: int = 30) -> float:
    """Tilt strength whose proposal has mean Q_n close to t n (bisection)."""
    target = t * n

    def mean_q(g):
        q, _, _ = _tilted_run(d, n, g, pilot, rng)
        return float(q.mean())

    if mean_q(0.0) <= target:
        return 0.0
    lo, hi = 0.0, 1.0
    while mean_q(hi) > target and hi < 64:
        lo, hi = hi, 2 * hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mean_q(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-3 * hi:
            break
    return hi


def tail_probability(d: int, n: int, t: float, method: str = "exact", samples: int = 10**5,
                     seed: int | None = None, shards: int = 1, gamma: float | None = None,
                     strip_m: int | None = None) -> TailEstimate:
    """P(Q_n <= t n) by exact enumeration, plain MC or tilted growth.

    The tilted estimator grows each walk choosing steps with probability
    proportional to exp(-gamma * increase of Q) and weights it by the exact
    likelihood ratio against simple random walk, so the estimate is unbiased.
    With ``strip_m`` the block-bridge lower bound is attached as well.
    """
    est = _tail(d, n, t, method, samples, seed, shards, gamma)
    if strip_m is None:
        return est
    sub = None if seed is None else int(np.random.SeedSequence([seed, n, strip_m, 7]).generate_state(1)[0])
    strip = strip_lower_bound(d, n, t, strip_m, samples, sub, shards)
    return replace(est, strip=strip)


def _tail(d, n, t, method, samples, seed, shards, gamma) -> TailEstimate:
    if t < 1:
        raise ValueError("t must be >= 1")
    if method == "exact":
        qd = exact_q_distribution(d, n)
        return TailEstimate(d, n, t, qd.tail(t), 0.0, qd.tail(t, True), 0.0, "exact")
    if method == "mc":
        st = lw.sample_stats(d, n, samples, seed, shards)
        hit = st["q"] <= t * n + 1e-9
        p, se = indicator_mean(hit)
        bp, bse = indicator_mean(hit & st["bridge"])
        return TailEstimate(d, n, t, p, se, bp, bse, "mc", samples=samples)
    if method != "tilted_mc":
        raise ValueError(f"unknown method {method!r}")
    streams = spawn_streams(seed, shards + 1)
    if gamma is None:
        gamma = choose_gamma(d, n, t, streams[-1])
    counts = split_counts(samples, shards)
    parts = run_sharded(lambda i: _tilted_run(d, n, gamma, counts[i], streams[i]), shards)
    q = np.concatenate([p[0] for p in parts])
    lr = np.concatenate([p[1] for p in parts])
    br = np.concatenate([p[2] for p in parts])
    hit = q <= t * n + 1e-9
    w = np.where(hit, np.exp(lr), 0.0)
    p, se = indicator_mean(w)
    bp, bse = indicator_mean(np.where(br, w, 0.0))
    ess = float(w.sum() ** 2 / (w * w).sum()) if w.any() else 0.0
    return TailEstimate(d, n, t, p, se, bp, bse, "tilted_mc", float(gamma), ess, samples)


# ---------------------------------------------------------------------------
# rate function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatePoint:
    arg: float
    n: int
    value: float
    stderr: float
    method: str
    bridge_value: float | None = None
    lower_only: bool = False
    strip_value: float | None = None


@dataclass
class RateCurve:
    kind: str
    d: int
    points: list[RatePoint]

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "d": self.d, "points": [asdict(p) for p in self.points]},
                          default=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["arg", "n", "value", "stderr", "method", "bridge_value", "lower_only", "strip_value"])
        for p in self.points:
            w.writerow([p.arg, p.n, p.value, p.stderr, p.method, p.bridge_value, p.lower_only, p.strip_value])
        return buf.getvalue()

    def at(self, n: int) -> list[RatePoint]:
        return [p for p in self.points if p.n == n]


def _exponent(p: float, se: float, n: int, samples: int) -> tuple[float, float, bool]:
    if p > 0:
        return -math.log(p) / n, se / (p * n), False
    # zero hits: P < 3/samples at roughly 95% confidence
    return -math.log(3.0 / max(samples, 1)) / n, math.inf, True


def rate_function(d: int, t_grid: Sequence[float], ladder: Sequence[int], method: str = "exact",
                  samples: int = 10**5, seed: int | None = None, shards: int = 1,
                  strip_m: int | None = None) -> RateCurve:
    """I_n(t) = -(1/n) log P(Q_n <= t n) with the bridge companion
    -(1/n) log P(Q_n <= t n, B_n), which bounds I(t) from above, and with
    ``strip_m`` the block-bridge bound on I_n(t)."""
    pts = []
    for n in ladder:
        for j, t in enumerate(t_grid):
            sub_seed = None if seed is None else int(np.random.SeedSequence([seed, n, j]).generate_state(1)[0])
            m = None if strip_m is None else min(strip_m, n)
            est = tail_probability(d, n, t, method, samples, sub_seed, shards, strip_m=m)
            val, err, lower = _exponent(est.p, est.stderr, n, samples)
            bval = -math.log(est.bridge_p) / n if est.bridge_p > 0 else None
            sval = est.strip.exponent if est.strip is not None else None
            pts.append(RatePoint(float(t), int(n), val, err, est.method, bval, lower, sval))
    return RateCurve("I_of_t", d, pts)


# ---------------------------------------------------------------------------
# self-avoiding walks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SawCounts:
    d: int
    counts: tuple[int, ...]
    mu_hat: tuple[float, ...]

    @property
    def submultiplicative(self) -> bool:
        c = (1,) + self.counts
        N = len(self.counts)
        return all(c[a + b] <= c[a] * c[b] for a in range(1, N + 1) for b in range(1, N + 1 - a))


SAW_BUDGET = 10**10


def saw_counts(d: int, n_max: int, budget: int = SAW_BUDGET) -> SawCounts:
    """Exact c_1..c_{n_max} by backtracking without immediate reversals."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    # (2d - 1)^(n - 1) bounds the number of non-reversing walks visited
    cost = 2 * d * (2 * d - 1) ** (n_max - 1)
    if cost > budget:
        raise BudgetExceeded("self-avoiding walk enumeration", cost, budget)
    c = tuple(int(x) for x in _kernels.count_saw(d, n_max)[1:])
    return SawCounts(d, c, tuple(ci ** (1.0 / (i + 1)) for i, ci in enumerate(c)))


# ---------------------------------------------------------------------------
# weakly self-avoiding walk
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WsawRung:
    """a_n = -(1/n) log E[e^{-u Q_n}] and the bridge value
    b_n = -(1/n) log E[e^{-u Q_n}; B_n] at one ladder rung."""

    n: int
    a_n: float
    sigma: float
    exact: bool
    b_n: float | None
    b_sigma: float | None
    samples: int = 0


@dataclass
class WsawResult:
    """Finite-n bounds on f_wsaw(u).

    By submultiplicativity of E[e^{-u Q_n}], every a_n is a lower bound on
    f_wsaw(u).  Concatenated bridges occupy disjoint sites, so the bridge
    partition function is supermultiplicative and every b_n is an upper
    bound; for d >= 3, f_wsaw(u) <= lambda_d u gives a second one.
    """

    d: int
    u: float
    rungs: list[WsawRung]
    lam: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def lower(self) -> float:
        return max(r.a_n - (0 if r.exact else 3 * r.sigma) for r in self.rungs)

    @property
    def upper(self) -> float:
        ups = [r.b_n + (0 if r.exact else 3 * (r.b_sigma or 0)) for r in self.rungs if r.b_n is not None]
        if self.lam is not None:
            ups.append(self.lam * self.u)
        return min(ups) if ups else math.inf

    def doubling_pairs(self) -> list[tuple[int, float, float]]:
        """(n, a_n, a_2n) for every pair of exact rungs n, 2n."""
        ex = {r.n: r.a_n for r in self.rungs if r.exact}
        return [(n, ex[n], ex[2 * n]) for n in sorted(ex) if 2 * n in ex]

    def to_json(self) -> str:
        return json.dumps({"d": self.d, "u": self.u, "lambda": self.lam, "lower": self.lower,
                           "upper": self.upper, "rungs": [asdict(r) for r in self.rungs],
                           "notes": self.notes}, default=float)


def _wsaw_exact(d, n, u):
    qd = exact_q_distribution(d, n)
    a = -qd.log_mgf(u) / n
    b = -qd.log_mgf(u, bridges_only=True) / n if qd.bridge_probs.any() else None
    return WsawRung(n, a, 0.0, True, b, 0.0 if b is not None else None)


def _wsaw_mc(d, n, u, samples, seed, shards):
    st = lw.sample_stats(d, n, samples, seed, shards)
    lm = batch_log_mean(-u * st["q"].astype(float))
    b, bs = None, None
    br = st["bridge"]
    if br.any():
        logw = np.where(br, -u * st["q"].astype(float), -np.inf)
        blm = batch_log_mean(logw)
        b, bs = -blm.log_value / n, blm.std_error / n
    return WsawRung(n, -lm.log_value / n, lm.std_error / n, False, b, bs, samples)


def wsaw_free_energy(d: int, u: float, ladder: Sequence[int], samples: int = 10**5,
                     seed: int | None = None, shards: int = 1,
                     exact_budget: int = EXACT_BUDGET) -> WsawResult:
    if u < 0:
        raise ValueError("u must be >= 0")
    rungs = []
    for n in ladder:
        if (2 * d) ** n <= exact_budget:
            rungs.append(_wsaw_exact(d, n, u))
        else:
            if seed is None:
                raise ValueError("a seed is required for Monte Carlo rungs")
            sub = int(np.random.SeedSequence([seed, n]).generate_state(1)[0])
            rungs.append(_wsaw_mc(d, n, u, samples, sub, shards))
    lam = lambda_d(d) if d >= 3 else None
    return WsawResult(d, u, rungs, lam)


def exact_wsaw_values(d: int, n: int, u_grid: Sequence[float]) -> np.ndarray:
    qd = exact_q_distribution(d, n)
    return np.array([-qd.log_mgf(u) / n for u in u_grid])


def second_differences(values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return v[2:] - 2 * v[1:-1] + v[:-2]


@dataclass(frozen=True)
class VaradhanResult:
    u: tuple[float, ...]
    residuals: tuple[float, ...]
    max_residual: float
    combined_err: float


def varadhan_residual(t: Sequence[float], I: Sequence[float], u: Sequence[float], f: Sequence[float],
                      I_err: Sequence[float] | None = None,
                      f_err: Sequence[float] | None = None) -> VaradhanResult:
    """|-f(u) - sup_t(-t u - I(t))| over the u grid.

    The sup runs over the supplied t grid, so it is never larger than the
    sup over all t.
    """
    t = np.asarray(t, dtype=float)
    I = np.asarray(I, dtype=float)
    if t.shape != I.shape or len(u) != len(f):
        raise ValueError("incompatible inputs")
    res = []
    errs = []
    for j, uj in enumerate(u):
        vals = -t * uj - I
        k = int(np.argmax(vals))
        res.append(abs(-f[j] - vals[k]))
        e = 0.0
        if I_err is not None:
            e += float(np.asarray(I_err)[k]) ** 2
        if f_err is not None:
            e += float(f_err[j]) ** 2
        errs.append(math.sqrt(e))
    return VaradhanResult(tuple(float(x) for x in u), tuple(res), float(max(res)), float(max(errs)))


def exact_varadhan(d: int, n: int, u_grid: Sequence[float]) -> VaradhanResult:
    """Varadhan residual from the exact law of Q_n with t on its support."""
    qd = exact_q_distribution(d, n)
    t = qd.support / n
    I = np.array([-math.log(qd.tail(x)) / n for x in t])
    f = exact_wsaw_values(d, n, u_grid)
    return varadhan_residual(t, I, list(u_grid), list(f))


# ---------------------------------------------------------------------------
# range probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RangePoint:
    s: float
    p: float
    stderr: float
    exponent: float
    one_sided: bool
    trimmed_p: float | None = None
    trimmed_stderr: float | None = None


@dataclass
class RangeProbe:
    """Finite-n exponents for range and trimmed-range events.

    Output of this probe is numerical evidence for an open conjecture, not a
    verified statement.
    """

    d: int
    n: int
    A: int | None
    theta: float | None
    points: list[RangePoint]
    label: str = "conjecture evidence"

    def to_json(self) -> str:
        return json.dumps({"d": self.d, "n": self.n, "A": self.A, "theta": self.theta,
                           "label": self.label, "points": [asdict(p) for p in self.points]},
                          default=float)


def range_ld_probe(d: int, n: int, s_grid: Sequence[float], A: int | None = None,
                   theta: float | None = None, samples: int = 10**5, seed: int | None = None,
                   shards: int = 1) -> RangeProbe:
    """P(R_n >= s n) and, given (A, theta), P(|R^-_{n,A}| >= s theta n,
    trimmed time <= theta n)."""
    if (A is None) != (theta is None):
        raise ValueError("A and theta must be given together")
    for s in s_grid:
        if not 0 <= s <= 1:
            raise ValueError("s must lie in [0, 1]")
    st = lw.sample_stats(d, n, samples, seed, shards, trim_threshold=A or 1)
    pts = []
    for s in s_grid:
        hit = st["range"] >= s * n - 1e-9
        p, se = indicator_mean(hit)
        ex, _, one = _exponent(p, se, n, samples)
        tp = tse = None
        if A is not None:
            th = (st["trimmed_range"] >= s * theta * n - 1e-9) & (st["trimmed_time"] <= theta * n + 1e-9)
            tp, tse = indicator_mean(th)
        pts.append(RangePoint(float(s), p, se, ex, one, tp, tse))
    return RangeProbe(d, n, A, theta, pts)
