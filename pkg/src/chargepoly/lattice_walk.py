"""Nearest-neighbour paths on Z^d and their local-time functionals.

Local times count the times 1..n only: l_n(x) = #{1 <= i <= n : S_i = x}.
The starting point S_0 is *not* counted, so every two-step walk has Q_2 = 2.
Every downstream number depends on this convention.

Steps are coded as integers 0..2d-1: code ``2k`` is +e_k and ``2k+1`` is
-e_k.  As a string, axis k uses the k-th letter of the alphabet, upper case
for the positive direction and lower case for the negative one, so in d = 2
``"A"`` is east, ``"a"`` west, ``"B"`` north and ``"b"`` south.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterator, Mapping

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .errors import AcceptanceTooLow, BudgetExceeded
from .streams import run_sharded, spawn_streams, split_counts

MAX_DIM = 5
DEFAULT_PATH_BUDGET = 2**32
_LETTERS = "ABCDE"


def step_vector(code: int, d: int) -> tuple[int, ...]:
    v = [0] * d
    v[code >> 1] = 1 - 2 * (code & 1)
    return tuple(v)


def _check_dim(d: int) -> None:
    if not 1 <= d <= MAX_DIM:
        raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {d}")


@dataclass(frozen=True)
class WalkPath:
    d: int
    steps: tuple[int, ...]

    def __post_init__(self):
        _check_dim(self.d)
        steps = tuple(int(s) for s in self.steps)
        for s in steps:
            if not 0 <= s < 2 * self.d:
                raise ValueError(f"step code {s} outside 0..{2 * self.d - 1}")
        object.__setattr__(self, "steps", steps)

    @property
    def n(self) -> int:
        return len(self.steps)

    @classmethod
    def from_string(cls, d: int, text: str) -> "WalkPath":
        codes = []
        for ch in text:
            k = _LETTERS.find(ch.upper())
            if k < 0 or k >= d:
                raise ValueError(f"bad step character {ch!r} for d={d}")
            codes.append(2 * k + (0 if ch.isupper() else 1))
        return cls(d, tuple(codes))

    @classmethod
    def from_vectors(cls, vectors) -> "WalkPath":
        vecs = [tuple(int(c) for c in v) for v in vectors]
        if not vecs:
            raise ValueError("cannot infer dimension from an empty step list")
        d = len(vecs[0])
        codes = []
        for v in vecs:
            nz = [k for k, c in enumerate(v) if c != 0]
            if len(v) != d or len(nz) != 1 or abs(v[nz[0]]) != 1:
                raise ValueError(f"{v} is not a unit lattice step")
            codes.append(2 * nz[0] + (0 if v[nz[0]] > 0 else 1))
        return cls(d, tuple(codes))

    def to_string(self) -> str:
        return "".join(
            _LETTERS[s >> 1] if s % 2 == 0 else _LETTERS[s >> 1].lower() for s in self.steps
        )

    def positions(self) -> np.ndarray:
        """Array of shape (n + 1, d) holding S_0 = 0, S_1, ..., S_n."""
        pos = np.zeros((self.n + 1, self.d), dtype=np.int64)
        if self.n:
            codes = np.asarray(self.steps)
            inc = np.zeros((self.n, self.d), dtype=np.int64)
            inc[np.arange(self.n), codes >> 1] = 1 - 2 * (codes & 1)
            np.cumsum(inc, axis=0, out=pos[1:])
        return pos

    def concat(self, other: "WalkPath") -> "WalkPath":
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        return WalkPath(self.d, self.steps + other.steps)


@dataclass(frozen=True)
class LocalTimeField:
    d: int
    n: int
    counts: Mapping[tuple[int, ...], int] = field(repr=False)

    @property
    def range(self) -> int:
        return len(self.counts)

    def q(self) -> int:
        return sum(v * v for v in self.counts.values())

    def occupation_profile(self) -> tuple[int, ...]:
        """(c_1, ..., c_n) with c_k the number of sites visited exactly k times."""
        prof = [0] * self.n
        for v in self.counts.values():
            prof[v - 1] += 1
        return tuple(prof)


@dataclass(frozen=True)
class WalkSummary:
    n: int
    q_n: int
    range: int
    trimmed_range: int
    trimmed_time: int
    max_local_time: int
    is_bridge: bool
    trim_threshold: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def local_times(path: WalkPath) -> LocalTimeField:
    if path.n < 1:
        raise ValueError("local times need a path with at least one step")
    pos = path.positions()[1:]
    counts = Counter(map(tuple, pos.tolist()))
    return LocalTimeField(path.d, path.n, dict(counts))


def is_bridge(path: WalkPath) -> bool:
    """0 = S^(1)_0 < S^(1)_i < S^(1)_n for every 0 < i < n."""
    if path.n < 1:
        return False
    x1 = path.positions()[:, 0]
    end = x1[-1]
    return bool(end > 0 and np.all((x1[1:-1] > 0) & (x1[1:-1] < end)))


def summarize(path: WalkPath, trim_threshold: int = 1) -> WalkSummary:
    if trim_threshold < 1:
        raise ValueError("trim threshold must be a positive integer")
    lt = local_times(path)
    vals = list(lt.counts.values())
    trimmed = [v for v in vals if v <= trim_threshold]
    return WalkSummary(
        n=path.n,
        q_n=sum(v * v for v in vals),
        range=len(vals),
        trimmed_range=len(trimmed),
        trimmed_time=sum(trimmed),
        max_local_time=max(vals),
        is_bridge=is_bridge(path),
        trim_threshold=trim_threshold,
    )


# ---------------------------------------------------------------------------
# exhaustive enumeration
# ---------------------------------------------------------------------------


def _check_budget(d: int, n: int, budget: int) -> int:
    count = (2 * d) ** n
    if count > budget:
        raise BudgetExceeded(f"enumeration of all {d}-dimensional {n}-step walks", count, budget)
    return count


def enumerate_walks(d: int, n: int, budget: int = DEFAULT_PATH_BUDGET) -> Iterator[WalkPath]:
    """All (2d)^n walks, lexicographic in the step codes."""
    _check_dim(d)
    _check_budget(d, n, budget)
    for steps in itertools.product(range(2 * d), repeat=n):
        yield WalkPath(d, steps)


def _radix(n: int) -> tuple[list[int], np.ndarray]:
    # c_k <= n // k, so digit k needs radix n // k + 1
    radices = [n // k + 1 for k in range(1, n + 1)]
    weights = [0] * (n + 2)
    w = 1
    for k in range(1, n + 1):
        weights[k] = w
        w *= radices[k - 1]
    if w >= 2**63:
        raise BudgetExceeded("occupation-profile packing", w, 2**63)
    return radices, np.asarray(weights, dtype=np.int64)


def _decode(code: int, n: int, radices: list[int]) -> tuple[int, ...]:
    out = []
    for r in radices:
        code, digit = divmod(code, r)
        out.append(digit)
    return tuple(out)


@dataclass(frozen=True)
class OccupationHistogram:
    """Exact count of walks per occupation profile (c_1, ..., c_n).

    Any functional of the form sum_x phi(l_n(x)) only depends on the profile,
    so this table is enough for Q_n, the range and exact partition functions.
    """

    d: int
    n: int
    profiles: Mapping[tuple[int, ...], int] = field(repr=False)
    bridge_profiles: Mapping[tuple[int, ...], int] = field(repr=False)

    @property
    def total(self) -> int:
        return sum(self.profiles.values())

    @staticmethod
    def q_of(profile: tuple[int, ...]) -> int:
        return sum((k + 1) ** 2 * c for k, c in enumerate(profile))

    def q_histogram(self, bridges_only: bool = False) -> dict[int, int]:
        src = self.bridge_profiles if bridges_only else self.profiles
        out: Counter = Counter()
        for prof, cnt in src.items():
            out[self.q_of(prof)] += cnt
        return dict(sorted(out.items()))

    def log_sum(self, logg: np.ndarray, bridges_only: bool = False) -> float:
        """log of sum over walks of exp(sum_x logg[l(x)])."""
        src = self.bridge_profiles if bridges_only else self.profiles
        if not src:
            return -math.inf
        logg = np.asarray(logg, dtype=float)
        ks = np.arange(1, self.n + 1)
        terms = []
        for prof, cnt in src.items():
            c = np.asarray(prof)
            terms.append(math.log(cnt) + float(np.dot(c, logg[ks])))
        t = np.asarray(terms)
        m = t.max()
        if not np.isfinite(m):
            return float(m)
        return float(m + math.log(math.fsum(np.exp(t - m))))


def occupation_histogram(
    d: int, n: int, shards: int = 1, budget: int = DEFAULT_PATH_BUDGET
) -> OccupationHistogram:
    """Enumerate every n-step walk; shards split the work by step prefix."""
    _check_dim(d)
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_budget(d, n, budget)
    radices, weights = _radix(n)
    plen = 0
    while (2 * d) ** plen < shards and plen < n:
        plen += 1
    prefixes = [np.asarray(p, dtype=np.int64) for p in itertools.product(range(2 * d), repeat=plen)]
    groups = [prefixes[i::shards] for i in range(shards)]

    def work(i):
        tot: Counter = Counter()
        btot: Counter = Counter()
        for pre in groups[i]:
            h, b = _kernels.enum_profiles(d, n, pre, weights)
            tot.update(dict(h))
            btot.update(dict(b))
        return tot, btot

    allc: Counter = Counter()
    ballc: Counter = Counter()
    for tot, btot in run_sharded(work, shards):
        allc.update(tot)
        ballc.update(btot)
    profiles = {_decode(int(k), n, radices): int(v) for k, v in sorted(allc.items())}
    bprofiles = {_decode(int(k), n, radices): int(v) for k, v in sorted(ballc.items())}
    return OccupationHistogram(d, n, profiles, bprofiles)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_steps(d: int, n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent uniform step sequences, shape (count, n), int8."""
    _check_dim(d)
    return rng.integers(0, 2 * d, size=(count, n), dtype=np.int8)


def sample_walk(d: int, n: int, rng: np.random.Generator) -> WalkPath:
    if n < 1:
        raise ValueError("n must be >= 1")
    return WalkPath(d, tuple(sample_steps(d, n, 1, rng)[0].tolist()))


_BRIDGE_CHUNK = 64


def sample_bridge(
    d: int, n: int, rng: np.random.Generator, max_tries: int = 10**6
) -> tuple[WalkPath, int]:
    """Plain rejection sampling of an n-step bridge.

    Returns the path and the number of rejected attempts.
    """
    _check_dim(d)
    if n < 1 or max_tries < 1:
        raise ValueError("need n >= 1 and max_tries >= 1")
    rows, tries = _kernels.bridge_collect(rng, d, n, 1, max_tries, _BRIDGE_CHUNK)
    if rows.shape[0] == 0:
        raise AcceptanceTooLow(tries, 0)
    return WalkPath(d, tuple(rows[0].tolist())), tries - 1


def sample_bridges(
    d: int, n: int, count: int, rng: np.random.Generator, max_tries: int
) -> tuple[np.ndarray, int]:
    rows, tries = _kernels.bridge_collect(rng, d, n, count, max_tries, _BRIDGE_CHUNK)
    if rows.shape[0] < count:
        raise AcceptanceTooLow(tries, rows.shape[0])
    return rows, tries


def count_bridge_hits(d: int, n: int, samples: int, rng: np.random.Generator) -> int:
    return int(_kernels.bridge_hits(rng, d, n, samples, _BRIDGE_CHUNK))


# ---------------------------------------------------------------------------
# return probabilities
# ---------------------------------------------------------------------------

DEFAULT_DP_BUDGET = 5 * 10**8


def _box_dp(d: int, n_max: int, budget: int) -> np.ndarray:
    # a walk more than n_max/2 away from the origin cannot return by n_max,
    # so mass leaving a box of that radius is irrelevant for p_0..p_{n_max}
    rad = n_max // 2 + 1
    side = 2 * rad + 1
    cost = side**d * n_max
    if cost > budget:
        raise BudgetExceeded("return-probability box DP", cost, budget)
    prob = np.zeros((side + 2,) * d)
    centre = (rad + 1,) * d
    prob[centre] = 1.0
    inner = tuple(slice(1, side + 1) for _ in range(d))
    shifted = []
    for axis in range(d):
        for off in (-1, 1):
            sl = list(inner)
            sl[axis] = slice(1 + off, side + 1 + off)
            shifted.append(tuple(sl))
    out = np.zeros(n_max + 1)
    out[0] = 1.0
    new = np.zeros_like(prob)
    for r in range(1, n_max + 1):
        acc = new[inner]
        acc[...] = 0.0
        for sl in shifted:
            acc += prob[sl]
        acc /= 2 * d
        prob, new = new, prob
        out[r] = prob[centre]
    return out


def _one_dim_returns(n_max: int) -> np.ndarray:
    """1-d table from the path count C(2k, k) / 4^k, built by the
    ratio recurrence q_{2k} = q_{2k-2} (2k - 1) / (2k)."""
    out = np.zeros(n_max + 1)
    out[0] = 1.0
    q = 1.0
    for r in range(2, n_max + 1, 2):
        q *= (r - 1) / r
        out[r] = q
    return out


def _split_dims(d: int, n_max: int) -> np.ndarray:
    """Combine the 1-d table across coordinates.

    The number of steps spent on a group of a coordinates out of r total
    steps is Binomial(r, a/d); given those counts the coordinate groups move
    independently.
    """
    one = _one_dim_returns(n_max)
    if d == 1:
        return one
    lgam = gammaln(np.arange(n_max + 2) + 1.0)
    tables = {1: one}

    def combine(a: int, b: int) -> np.ndarray:
        return _kernels.combine_return_tables(tables[a], tables[b], lgam, a / (a + b))

    for k in range(2, d + 1):
        tables[k] = combine(1, k - 1)
    return tables[d]


def return_probabilities(
    d: int, n_max: int, method: str = "auto", budget: int = DEFAULT_DP_BUDGET
) -> np.ndarray:
    """p_r = P(S_r = 0) for r = 0..n_max.

    ``method="box"`` runs the exact d-dimensional convolution DP;
    ``method="split"`` takes the exact 1-d table and distributes steps over the
    coordinates with binomial weights.  ``"auto"`` uses the box DP when it
    fits the budget.
    """
    _check_dim(d)
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if n_max == 0:
        return np.ones(1)
    if method == "box":
        return _box_dp(d, n_max, budget)
    if method == "split":
        return _split_dims(d, n_max)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    rad = n_max // 2 + 1
    if (2 * rad + 1) ** d * n_max <= budget and d <= 2 and n_max <= 512:
        return _box_dp(d, n_max, budget)
    return _split_dims(d, n_max)


# ---------------------------------------------------------------------------
# sharded sampling of local-time functionals
# ---------------------------------------------------------------------------

STAT_FIELDS = ("q", "range", "max_local_time", "log_weight", "trimmed_range", "trimmed_time", "bridge")


def _chunk_rows(n: int) -> int:
    return max(1, 2**21 // max(n, 1))


def sample_stats(
    d: int,
    n: int,
    samples: int,
    seed: int,
    shards: int = 1,
    logg: np.ndarray | None = None,
    trim_threshold: int = 1,
) -> dict[str, np.ndarray]:
    """Local-time functionals of ``samples`` simple random walks.

    Shard ``i`` draws its share from the ``i``-th seed stream; results are
    concatenated in shard order, so the output depends only on
    ``(seed, shards)``.  ``logg`` (indexed by local time) adds the column
    ``log_weight = sum_x logg[l(x)]``.
    """
    _check_dim(d)
    if n < 1 or samples < 1:
        raise ValueError("need n >= 1 and samples >= 1")
    streams = spawn_streams(seed, shards)
    counts = split_counts(samples, shards)
    lg = np.zeros(0) if logg is None else np.ascontiguousarray(logg, dtype=np.float64)
    if lg.size and lg.size < n + 1:
        raise ValueError("logg must cover local times 0..n")

    def work(i):
        rng = streams[i]
        parts = []
        left = counts[i]
        rows = _chunk_rows(n)
        while left > 0:
            m = min(rows, left)
            steps = sample_steps(d, n, m, rng)
            parts.append(_kernels.walk_stats(steps, d, lg, trim_threshold))
            left -= m
        return parts

    cols: list[list[np.ndarray]] = [[] for _ in STAT_FIELDS]
    for parts in run_sharded(work, shards):
        for p in parts:
            for j, arr in enumerate(p):
                cols[j].append(arr)
    return {name: np.concatenate(c) for name, c in zip(STAT_FIELDS, cols)}
