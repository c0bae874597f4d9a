"""Bridge estimators: n P(B_n), the ballot identity, and the local time of
walks conditioned to be bridges.

A bridge of length n satisfies 0 = S_0^(1) < S_i^(1) < S_n^(1) for 0 < i < n.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels
from . import lattice_walk as lw
from ._stats import indicator_mean
from .errors import AcceptanceTooLow, BudgetExceeded
from .streams import run_sharded, spawn_streams, split_counts

EXACT_MAX_N = 2048
BALLOT_MAX_N = 24


@dataclass(frozen=True)
class BridgeRung:
    n: int
    p_hat: float
    stderr: float
    exact: bool
    hits: int | None = None
    samples: int = 0
    one_sided: bool = False

    @property
    def n_times_p(self) -> float:
        return self.n * self.p_hat


@dataclass
class BridgeSeries:
    d: int
    rungs: list[BridgeRung]

    @staticmethod
    def _comparable(a: BridgeRung, b: BridgeRung) -> bool:
        # a one-sided rung only bounds P(B_n), so no ratio is defined
        return a.p_hat > 0 and not (a.one_sided or b.one_sided)

    def ratios(self) -> list[float]:
        """n P(B_n) at each rung divided by the value at the previous rung
        (nan when either rung is a one-sided bound)."""
        return [b.n_times_p / a.n_times_p if self._comparable(a, b) else math.nan
                for a, b in zip(self.rungs, self.rungs[1:])]

    def ratio_stderr(self) -> list[float]:
        out = []
        for a, b in zip(self.rungs, self.rungs[1:]):
            if not self._comparable(a, b):
                out.append(math.nan)
                continue
            out.append(b.n_times_p / a.n_times_p * math.hypot(a.stderr / a.p_hat, b.stderr / b.p_hat))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "p_hat", "stderr", "n_times_p"])
        for r in self.rungs:
            w.writerow([r.n, repr(r.p_hat), repr(r.stderr), repr(r.n_times_p)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"op": "bridge", "d": self.d, "ratios": self.ratios(),
                           "rungs": [{**asdict(r), "n_times_p": r.n_times_p} for r in self.rungs]})


def exact_bridge_probability(d: int, n: int) -> float:
    """P(B_n) by dynamic programming over (first coordinate, running max)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > EXACT_MAX_N:
        raise BudgetExceeded("bridge dynamic program (cost ~ n^3/3)", n**3 / 3, EXACT_MAX_N**3 / 3)
    return float(_kernels.bridge_dp(d, n))


def exact_bridge_count(d: int, n: int) -> int:
    """Number of n-step bridges by exhaustive enumeration (small n)."""
    h = lw.occupation_histogram(d, n)
    return sum(h.bridge_profiles.values())


def mc_bridge_probability(d: int, n: int, samples: int, seed: int, shards: int = 1) -> BridgeRung:
    """Plain rejection estimate; a zero hit count gives a one-sided bound."""
    streams = spawn_streams(seed, shards)
    counts = split_counts(samples, shards)
    hits = sum(run_sharded(lambda i: lw.count_bridge_hits(d, n, counts[i], streams[i]), shards))
    p = hits / samples
    if hits == 0:
        # P(B_n) < 3 / samples at about 95% confidence
        return BridgeRung(n, 0.0, 3.0 / samples, False, 0, samples, True)
    return BridgeRung(n, p, math.sqrt(p * (1 - p) / samples), False, hits, samples)


def bridge_probability(d: int, ladder: Sequence[int], method: str = "auto", samples: int = 10**6,
                       seed: int | None = None, shards: int = 1) -> BridgeSeries:
    """P(B_n) per rung: ``"exact"`` runs the dynamic program, ``"mc"`` plain
    rejection, and ``"auto"`` the dynamic program when n <= 2048."""
    rungs = []
    for n in ladder:
        m = method
        if m == "auto":
            m = "exact" if n <= EXACT_MAX_N else "mc"
        if m == "exact":
            rungs.append(BridgeRung(n, exact_bridge_probability(d, n), 0.0, True))
        elif m == "mc":
            if seed is None:
                raise ValueError("a seed is required for Monte Carlo work")
            sub = int(np.random.SeedSequence([seed, n]).generate_state(1)[0])
            rungs.append(mc_bridge_probability(d, n, samples, sub, shards))
        else:
            raise ValueError(f"unknown method {method!r}")
    return BridgeSeries(d, rungs)


def one_dim_bridge_constant(n: int = 1024) -> float:
    """n P(B_{2n}) in d = 1, whose limit is the constant C'."""
    return n * exact_bridge_probability(1, 2 * n)


# ---------------------------------------------------------------------------
# ballot identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BallotRow:
    n: int
    k: int
    lhs: Fraction
    rhs: Fraction

    @property
    def ok(self) -> bool:
        return self.lhs == self.rhs


def _endpoint_counts(n: int) -> tuple[dict[int, int], dict[int, int]]:
    """For all 2^n walks: counts by endpoint, and counts by endpoint of the
    walks with S_j > 0 for every 0 < j <= n (enumerated in blocks)."""
    total: dict[int, int] = {}
    positive: dict[int, int] = {}
    block = min(n, 16)
    low = np.arange(2**block, dtype=np.int64)
    bits_low = ((low[:, None] >> np.arange(block)) & 1).astype(np.int8)
    steps_low = 1 - 2 * bits_low
    for high in range(2 ** (n - block)):
        hb = np.array([(high >> j) & 1 for j in range(n - block)], dtype=np.int8)
        steps_high = np.broadcast_to(1 - 2 * hb, (low.size, n - block))
        steps = np.concatenate([steps_low, steps_high], axis=1)
        pos = np.cumsum(steps, axis=1, dtype=np.int64)
        end = pos[:, -1]
        good = (pos > 0).all(axis=1)
        for arr, dst in ((end, total), (end[good], positive)):
            vals, cnt = np.unique(arr, return_counts=True)
            for v, c in zip(vals.tolist(), cnt.tolist()):
                dst[v] = dst.get(v, 0) + c
    return total, positive


def ballot_check(n_max: int) -> list[BallotRow]:
    """P(S_n = k, S_j > 0 for 0 < j <= n) against (k/n) P(S_n = k) for k >= 1
    (and 0 for k <= 0), exactly, for every n <= n_max and -n <= k <= n."""
    if not 1 <= n_max <= BALLOT_MAX_N:
        raise ValueError(f"n_max must be in [1, {BALLOT_MAX_N}]")
    rows = []
    for n in range(1, n_max + 1):
        total, positive = _endpoint_counts(n)
        den = 2**n
        for k in range(-n, n + 1):
            lhs = Fraction(positive.get(k, 0), den)
            rhs = Fraction(k, n) * Fraction(total.get(k, 0), den) if k > 0 else Fraction(0)
            rows.append(BallotRow(n, k, lhs, rhs))
    return rows


# ---------------------------------------------------------------------------
# local time under the bridge condition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionalRung:
    m: int
    value: float
    stderr: float
    accepted: int
    tries: int
    flagged: bool = False


@dataclass
class ConditionalSeries:
    kind: str
    d: int
    rungs: list[ConditionalRung]
    reference: float | None = None
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "d": self.d, "reference": self.reference, "params": self.params,
                           "rungs": [asdict(r) for r in self.rungs]})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "value", "stderr", "accepted", "tries", "flagged"])
        for r in self.rungs:
            w.writerow([r.m, repr(r.value), repr(r.stderr), r.accepted, r.tries, r.flagged])
        return buf.getvalue()


def _bridge_q(d, m, samples, seed, shards, max_tries):
    """Q_m of ``samples`` bridges by plain rejection; returns (q, tries)."""
    streams = spawn_streams(seed, shards)
    counts = split_counts(samples, shards)
    tries_each = split_counts(max_tries, shards)

    def work(i):
        rows, tries = _kernels.bridge_collect(streams[i], d, m, counts[i], tries_each[i], lw._BRIDGE_CHUNK)
        if rows.shape[0] < counts[i]:
            raise AcceptanceTooLow(tries, rows.shape[0])
        q = _kernels.walk_stats(rows, d, np.zeros(0), 1)[0] if rows.shape[0] else np.zeros(0, np.int64)
        return q, tries

    parts = run_sharded(work, shards)
    return np.concatenate([p[0] for p in parts]), sum(p[1] for p in parts)


def conditional_q_bridge(d: int, ladder: Sequence[int], samples: int, seed: int, shards: int = 1,
                         tol: float = 0.05, max_tries: int = 10**9) -> ConditionalSeries:
    """E[Q_m | B_m] / m per rung; rungs above lambda_d (1 + tol) are flagged."""
    from .ldp_lab import lambda_d

    lam = lambda_d(d) if d >= 3 else None
    rungs = []
    for m in ladder:
        sub = int(np.random.SeedSequence([seed, m]).generate_state(1)[0])
        q, tries = _bridge_q(d, m, samples, sub, shards, max_tries)
        mean, se = indicator_mean(q / m)
        flagged = lam is not None and mean > lam * (1 + tol)
        rungs.append(ConditionalRung(m, mean, se, q.size, tries, flagged))
    return ConditionalSeries("EQ_given_bridge_over_m", d, rungs, lam, {"tol": tol})


def bridge_silt_tail(d: int, ladder: Sequence[int], eps: float, samples: int, seed: int,
                     shards: int = 1, max_tries: int = 10**9) -> ConditionalSeries:
    """P(Q_m <= (1 + eps) lambda_2 m log m | B_m) per rung (d = 2)."""
    from .ldp_lab import LAMBDA_2

    if d != 2:
        raise ValueError("the bridge local-time tail is defined for d = 2")
    rungs = []
    for m in ladder:
        sub = int(np.random.SeedSequence([seed, m]).generate_state(1)[0])
        q, tries = _bridge_q(d, m, samples, sub, shards, max_tries)
        hit = q <= (1 + eps) * LAMBDA_2 * m * math.log(m)
        mean, se = indicator_mean(hit)
        rungs.append(ConditionalRung(m, mean, se, q.size, tries))
    return ConditionalSeries("bridge_silt_tail", d, rungs, None, {"eps": eps})
