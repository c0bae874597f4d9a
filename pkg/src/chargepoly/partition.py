"""Partition functions, free-energy ladders and the phase boundary.

Z*_n = E[prod_x g*(l_n(x))] and Z_n = E[prod_x g(l_n(x))] are computed
exactly from the occupation-profile histogram at small n, by brute force
over walks and charge vectors as an oracle, and by Monte Carlo.  Everything
is kept on the log scale.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import __version__
from . import _kernels
from . import charge_model as cm
from . import lattice_walk as lw
from . import single_site as ss
from ._stats import MIN_BATCHES, batch_log_mean
from .charge_model import ChargeLaw
from .errors import BudgetExceeded, ESSWarning
from .lattice_walk import WalkPath
from .streams import run_sharded, spawn_streams, split_counts

ESS_MIN = 100.0
DOUBLE_ENUM_BUDGET = 10**10
EXACT_LADDER_BUDGET = 4**8
HTAB_CELLS = 2**23


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------


def hamiltonian(path: WalkPath, charges: Sequence[float], debug: bool = False) -> tuple[float, float]:
    """(H_pair, H_square) for one path and charge vector.

    H_pair sums omega_i omega_j over pairs i < j at the same site;
    H_square sums the squared site charge totals.  With ``debug`` the pair
    sum is evaluated directly and the identity
    H_square = 2 H_pair + sum omega_i^2 is asserted.
    """
    w = np.asarray(charges, dtype=float)
    if w.shape != (path.n,):
        raise ValueError(f"charge vector has length {w.shape}, path has {path.n} steps")
    pos = path.positions()[1:]
    _, inv = np.unique(pos, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    tot = np.bincount(inv, weights=w)
    sq = np.bincount(inv, weights=w * w)
    h_square = float(np.dot(tot, tot))
    h_pair = float(0.5 * (np.dot(tot, tot) - sq.sum()))
    if debug:
        same = inv[:, None] == inv[None, :]
        direct = float(np.sum(np.triu(same, 1) * np.outer(w, w)))
        if not math.isclose(h_square, 2 * direct + float(np.dot(w, w)), rel_tol=1e-12, abs_tol=1e-12):
            raise AssertionError("H_square != 2 H_pair + sum omega^2")
        h_pair = direct
    return h_pair, h_square


# ---------------------------------------------------------------------------
# estimates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartitionEstimate:
    """log Z*_n (``log_value``) with method tag and log-scale standard error.

    Exact methods also fill ``log_value_plain`` with log Z_n.
    """

    n: int
    log_value: float
    method: str
    std_error: float = 0.0
    samples: int = 0
    seed: int | None = None
    d: int = 2
    law: str = ""
    delta: float = 0.0
    beta: float = 0.0
    shards: int = 1
    log_value_plain: float | None = None
    ess: float | None = None
    flagged: bool = False
    lower_bound: float | None = None

    def __post_init__(self):
        if self.method in ("exact_enum", "double_enum") and self.std_error != 0.0:
            raise ValueError("exact methods carry a zero standard error")

    @property
    def a_n(self) -> float:
        return self.log_value / self.n

    def record(self, op: str = "partition") -> dict:
        return {"op": op, "law": self.law, "delta": self.delta, "beta": self.beta, "d": self.d,
                "n": self.n, "log_value": self.log_value, "stderr": self.std_error,
                "method": self.method, "seed": self.seed, "shards": self.shards,
                "version": __version__, "log_value_plain": self.log_value_plain,
                "ess": self.ess, "flagged": self.flagged, "lower_bound": self.lower_bound,
                "samples": self.samples}

    def to_json(self, op: str = "partition") -> str:
        return json.dumps(self.record(op), default=float)


def log_g_star_table(law: ChargeLaw, delta: float, beta: float, L: int) -> np.ndarray:
    return np.asarray(ss.log_g_star_grid(law, [delta], [beta], L)[0], dtype=float)


def z_exact(law: ChargeLaw, delta: float, beta: float, d: int, n: int, shards: int = 1,
            budget: int = lw.DEFAULT_PATH_BUDGET) -> PartitionEstimate:
    """Exact Z*_n and Z_n by summing over occupation profiles.

    Z_n uses g computed under the tilted law, independently of g*.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    h = lw.occupation_histogram(d, n, shards=shards, budget=budget)
    lgs = log_g_star_table(law, delta, beta, n)
    lg = ss.log_g_table(law, delta, beta, n)
    norm = n * math.log(2 * d)
    return PartitionEstimate(
        n, h.log_sum(lgs) - norm, "exact_enum", 0.0, 0, None, d, law.label, delta, beta, shards,
        log_value_plain=h.log_sum(lg) - norm,
    )


def _all_walk_steps(d: int, n: int) -> np.ndarray:
    return np.array(list(itertools.product(range(2 * d), repeat=n)), dtype=np.int64).reshape(-1, n)


def _site_patterns(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Distinct site-partition patterns of all walks with multiplicities.

    Each walk is reduced to the labels of its sites in order of first visit
    (times 1..n), which is all the energy depends on.
    """
    steps = _all_walk_steps(d, n)
    axis = steps // 2
    sign = 1 - 2 * (steps % 2)
    pos = np.zeros((steps.shape[0], n, d), dtype=np.int64)
    for k in range(d):
        pos[:, :, k] = np.cumsum(np.where(axis == k, sign, 0), axis=1)
    side = 2 * n + 1
    keys = np.zeros(pos.shape[:2], dtype=np.int64)
    for k in range(d):
        keys = keys * side + (pos[:, :, k] + n)
    labels = np.zeros_like(keys)
    nxt = np.zeros(keys.shape[0], dtype=np.int64)
    for t in range(n):
        if t:
            eq = keys[:, :t] == keys[:, t : t + 1]
            seen = eq.any(axis=1)
            first = eq.argmax(axis=1)
            old = labels[np.arange(keys.shape[0]), first]
        else:
            seen = np.zeros(keys.shape[0], dtype=bool)
            old = nxt
        labels[:, t] = np.where(seen, old, nxt)
        nxt = nxt + (~seen)
    pats, counts = np.unique(labels, axis=0, return_counts=True)
    return pats, counts


def z_double_enum(law: ChargeLaw, delta: float, beta: float, d: int, n: int,
                  budget: int = DOUBLE_ENUM_BUDGET) -> PartitionEstimate:
    """Brute-force Z_n = (E^delta x E)[exp(-beta H_square)] over all walks and
    all charge vectors (lattice laws only).

    ``log_value`` holds log Z*_n = log Z_n + n log M(delta) and
    ``log_value_plain`` holds log Z_n.
    """
    if not law.is_lattice:
        raise ValueError("double enumeration needs a finite-support charge law")
    s = len(law.values)
    cost = (2 * d) ** n * s**n
    if cost > budget:
        raise BudgetExceeded("double enumeration over walks and charges", cost, budget)
    vals = law.float_values
    logp = np.log(cm.tilted_probs(law, delta))
    idx = np.array(list(itertools.product(range(s), repeat=n)), dtype=np.int64).reshape(-1, n)
    omega = vals[idx]
    logw = logp[idx].sum(axis=1)
    pats, counts = _site_patterns(d, n)
    terms = []
    for pat, cnt in zip(pats, counts):
        k = int(pat.max()) + 1
        onehot = np.zeros((n, k))
        onehot[np.arange(n), pat] = 1.0
        site = omega @ onehot
        h = (site * site).sum(axis=1)
        terms.append(math.log(cnt) + float(logsumexp(logw - beta * h)))
    log_z = float(logsumexp(terms)) - n * math.log(2 * d)
    log_star = log_z + n * cm.log_mgf(law, delta)
    return PartitionEstimate(n, log_star, "double_enum", 0.0, 0, None, d, law.label, delta, beta,
                             log_value_plain=log_z)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def survival_table(d: int, r: int, rows: int) -> np.ndarray:
    """Row k is proportional to P_x(walk stays in [-r, r]^d for k steps),
    flattened with coordinate k having stride (2r+1)^k.  Each row is scaled
    to maximum 1; only ratios within a row matter to the sampler."""
    side = 2 * r + 1
    h = np.ones((side,) * d)
    out = np.empty((rows + 1, side**d))
    out[0] = h.ravel(order="F")
    pad = np.zeros((side + 2,) * d)
    inner = tuple(slice(1, side + 1) for _ in range(d))
    for k in range(1, rows + 1):
        pad[inner] = h
        acc = np.zeros_like(h)
        for axis in range(d):
            for off in (-1, 1):
                sl = list(inner)
                sl[axis] = slice(1 + off, side + 1 + off)
                acc += pad[tuple(sl)]
        h = acc / acc.max()
        out[k] = h.ravel(order="F")
    return out


def default_radii(d: int, n: int) -> list[int]:
    """Geometric box radii from 1 up to about sqrt(n)."""
    top = max(1, int(math.ceil(math.sqrt(n))))
    out = []
    r = 1
    while r < top:
        out.append(r)
        r *= 2
    out.append(top)
    return sorted(set(out))


def _htab(d: int, n: int, r: int) -> np.ndarray:
    side = 2 * r + 1
    rows = max(1, min(n, r * r + 1, HTAB_CELLS // side**d))
    return survival_table(d, r, rows)


def _srw_logweights(d, n, count, rng, lgs):
    out = []
    rows = lw._chunk_rows(n)
    left = count
    while left > 0:
        m = min(rows, left)
        steps = lw.sample_steps(d, n, m, rng)
        out.append(_kernels.walk_stats(steps, d, lgs, 1)[3])
        left -= m
    return np.concatenate(out) if out else np.zeros(0)


def _mixture_component(d, n, count, rng, lgs, comp, tabs, radii, log_mix_w):
    """Samples from one mixture component with their mixture log-weights.

    Component 0 is simple random walk, 1 is growth, 2.. are the boxes.
    Returns (log W + log p - log q_mix, log W + log p - log q_comp).
    """
    res_mix, res_own = [], []
    rows = lw._chunk_rows(n)
    left = count
    log_p = -n * math.log(2 * d)
    inc = np.ascontiguousarray(np.diff(lgs))
    while left > 0:
        m = min(rows, left)
        if comp == 0:
            steps = lw.sample_steps(d, n, m, rng)
        elif comp == 1:
            steps = _kernels.growth(rng, d, n, inc, m, True)[4]
        else:
            steps = _kernels.confined_sample(rng, d, n, radii[comp - 2], tabs[comp - 2], m)
        logw = _kernels.walk_stats(steps, d, lgs, 1)[3]
        lq = np.empty((len(radii) + 2, m))
        lq[0] = log_p
        lq[1] = _kernels.growth_logq(steps, d, inc)
        for j, (r, tab) in enumerate(zip(radii, tabs)):
            lq[j + 2] = _kernels.confined_logq(steps, d, r, tab)
        lmix = logsumexp(lq + log_mix_w[:, None], axis=0)
        res_mix.append(logw + log_p - lmix)
        res_own.append(logw + log_p - lq[comp])
        left -= m
    return np.concatenate(res_mix), np.concatenate(res_own)


def z_mc(law: ChargeLaw, delta: float, beta: float, d: int, n: int, samples: int, seed: int,
         shards: int = 1, method: str = "auto", shares: tuple[float, float] = (0.25, 0.25),
         radii: Sequence[int] | None = None, lgs: np.ndarray | None = None) -> PartitionEstimate:
    """Monte Carlo estimate of Z*_n.

    ``method="srw"`` averages prod_x g*(l(x)) over simple random walks.

    ``method="mixture"`` stratifies the samples over three kinds of
    proposal: simple random walk and growth walks (each step chosen with
    probability proportional to g*(l + 1)/g*(l) at the target site) take the
    fractions in ``shares``, and walks confined to boxes of the given radii
    (exact Doob transforms of the survival probability) share the rest.
    Every sample is weighted against the full mixture density, which keeps
    the estimator unbiased while covering the compact walks that dominate in
    the collapsed phase.  On its own, each box component estimates the
    contribution of walks confined to its box, a lower bound on Z*_n; the
    largest of these is returned as ``lower_bound``.

    ``"auto"`` means the mixture for beta > 0.  At beta = 0 every walk has
    weight M(delta)^n and that value is returned with zero error.
    """
    if seed is None:
        raise ValueError("a seed is required for Monte Carlo work")
    if samples < 2 * MIN_BATCHES:
        raise ValueError(f"need at least {2 * MIN_BATCHES} samples")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if lgs is None:
        lgs = log_g_star_table(law, delta, beta, n)
    lgs = np.ascontiguousarray(lgs[: n + 1], dtype=np.float64)
    streams = spawn_streams(seed, shards)
    base = dict(n=n, samples=samples, seed=seed, d=d, law=law.label, delta=delta, beta=beta, shards=shards)
    if beta == 0:
        return PartitionEstimate(log_value=n * cm.log_mgf(law, delta), method="mc", std_error=0.0,
                                 ess=float(samples), **base)
    if method == "auto":
        method = "mixture"
    if method == "srw":
        counts = split_counts(samples, shards)
        parts = run_sharded(lambda i: _srw_logweights(d, n, counts[i], streams[i], lgs), shards)
        lm = batch_log_mean(np.concatenate(parts))
        flagged = lm.ess < ESS_MIN
        if flagged:
            warnings.warn(f"ESS {lm.ess:.1f} below {ESS_MIN} at n={n}", ESSWarning, stacklevel=2)
        return PartitionEstimate(log_value=lm.log_value, method="mc", std_error=lm.std_error,
                                 ess=lm.ess, flagged=flagged, **base)
    if method != "mixture":
        raise ValueError(f"unknown method {method!r}")
    s_srw, s_grow = shares
    if s_srw <= 0 or s_grow < 0 or s_srw + s_grow > 1:
        raise ValueError("shares must be positive and sum to at most 1")
    radii = list(radii) if radii is not None else default_radii(d, n)
    tabs = [_htab(d, n, r) for r in radii]
    J = len(radii)
    n0 = int(round(s_srw * samples))
    n1 = int(round(s_grow * samples))
    comp_counts = [n0, n1] + split_counts(samples - n0 - n1, J)
    # the realised stratum fractions define the mixture that is sampled
    mix_w = np.array(comp_counts, dtype=float) / samples
    log_mix_w = np.where(mix_w > 0, np.log(np.maximum(mix_w, 1e-300)), -np.inf)
    shard_counts = [split_counts(c, shards) for c in comp_counts]

    def work(i):
        rng = streams[i]
        return [
            _mixture_component(d, n, shard_counts[c][i], rng, lgs, c, tabs, radii, log_mix_w)
            for c in range(J + 2)
        ]

    results = run_sharded(work, shards)
    per_mix = [np.concatenate([res[c][0] for res in results]) for c in range(J + 2)]
    per_own = [np.concatenate([res[c][1] for res in results]) for c in range(J + 2)]
    allY = np.concatenate(per_mix)
    top = float(allY.max())
    # stratified estimator sum_k (N_k / N) mean_k(Y); the strata variances
    # come from batch means inside each stratum
    est = 0.0
    var = 0.0
    for ys in per_mix:
        if ys.size == 0:
            continue
        lm = batch_log_mean(ys)
        frac = ys.size / samples
        mean_c = math.exp(lm.log_value - top)
        est += frac * mean_c
        var += (frac * mean_c * lm.std_error) ** 2
    log_value = top + math.log(est)
    se = math.sqrt(var) / est
    w = np.exp(allY - top)
    ess = float(w.sum() ** 2 / (w * w).sum())
    boxes = [batch_log_mean(ys).log_value for ys in per_own[2:] if ys.size]
    flagged = ess < ESS_MIN
    if flagged:
        warnings.warn(f"ESS {ess:.1f} below {ESS_MIN} at n={n}", ESSWarning, stacklevel=2)
    return PartitionEstimate(log_value=log_value, method="mc", std_error=se, ess=ess, flagged=flagged,
                             lower_bound=max(boxes) if boxes else None, **base)


# ---------------------------------------------------------------------------
# ladders
# ---------------------------------------------------------------------------


def parse_ladder(spec: str) -> list[int]:
    """``"a:b"`` is a, 2a, 4a, ... up to b; a comma list is taken as is."""
    if ":" in spec:
        a, b = (int(x) for x in spec.split(":"))
        if a < 1 or b < a:
            raise ValueError(f"bad ladder {spec!r}")
        out = []
        n = a
        while n <= b:
            out.append(n)
            n *= 2
        return out
    out = [int(x) for x in spec.split(",")]
    if any(x < 1 for x in out) or out != sorted(set(out)):
        raise ValueError(f"bad ladder {spec!r}")
    return out


@dataclass
class LadderResult:
    """a_n = (1/n) log Z*_n per rung with the extrapolated F* and F."""

    law: str
    delta: float
    beta: float
    d: int
    estimates: list[PartitionEstimate]
    F_star: float
    sigma: float
    f_delta: float
    certificate: str
    trend: str
    excluded: list[int] = field(default_factory=list)

    @property
    def ns(self) -> list[int]:
        return [e.n for e in self.estimates]

    @property
    def a(self) -> np.ndarray:
        return np.array([e.a_n for e in self.estimates])

    @property
    def sig(self) -> np.ndarray:
        return np.array([e.std_error / e.n for e in self.estimates])

    @property
    def F(self) -> float:
        return self.F_star + self.f_delta

    def sandwich_ok(self, k: float = 3.0) -> bool:
        """F in [f(delta) - k sigma, k sigma]."""
        return self.f_delta - k * self.sigma <= self.F <= k * self.sigma

    def to_json(self) -> str:
        return json.dumps({"op": "free-energy", "law": self.law, "delta": self.delta, "beta": self.beta,
                           "d": self.d, "F_star": self.F_star, "F": self.F, "sigma": self.sigma,
                           "f_delta": self.f_delta, "certificate": self.certificate, "trend": self.trend,
                           "excluded": self.excluded, "version": __version__,
                           "rungs": [e.record() for e in self.estimates]}, default=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "a_n", "sigma_n", "method", "ess", "flagged"])
        for e in self.estimates:
            w.writerow([e.n, repr(e.a_n), repr(e.std_error / e.n), e.method, e.ess, e.flagged])
        return buf.getvalue()


FIT_MIN_N = 16


def extrapolate(ns: Sequence[int], a: Sequence[float], sig: Sequence[float], d: int) -> tuple[float, float]:
    """Extrapolate a_n to n = infinity.

    The base model is a_n = F + b n^{-2/(d+2)}, fitted by weighted least
    squares on the rungs with n >= 16 (the top two rungs if fewer qualify).
    Zero errors of exact rungs are floored at the median positive error.
    The finite-size correction is not known, so the returned error combines
    the statistical error of F with the largest shift of F across a fixed
    family of alternatives: the confinement form b (log n / n)^{2/(d+2)},
    and each of the two forms with an added 1/n term when there are at
    least four rungs.
    """
    ns = np.asarray(ns, dtype=float)
    a = np.asarray(a, dtype=float)
    sig = np.asarray(sig, dtype=float)
    keep = ns >= FIT_MIN_N
    if keep.sum() < 2:
        keep = np.zeros(ns.size, dtype=bool)
        keep[-2:] = True
    ns, a, sig = ns[keep], a[keep], sig[keep]
    if ns.size == 1:
        return float(a[0]), float(sig[0])
    pos = sig[sig > 0]
    floor = float(np.median(pos)) if pos.size else 1.0
    wts = 1.0 / np.maximum(sig, floor)
    expo = -2.0 / (d + 2)

    def fit(cols):
        X = np.stack(cols, axis=1) * wts[:, None]
        coef, *_ = np.linalg.lstsq(X, a * wts, rcond=None)
        return coef[0], np.linalg.pinv(X.T @ X)[0, 0]

    one = np.ones_like(ns)
    x_pow = ns**expo
    x_log = (np.log(ns) / ns) ** (-expo)
    F, var = fit([one, x_pow])
    stat = math.sqrt(max(var, 0.0)) if pos.size else 0.0
    alts = [fit([one, x_log])[0]]
    if ns.size >= 4:
        alts += [fit([one, x_pow, 1 / ns])[0], fit([one, x_log, 1 / ns])[0]]
    model = max(abs(v - F) for v in alts)
    return float(F), math.sqrt(stat**2 + model**2)


def _trend(a: np.ndarray) -> str:
    if a.size < 2:
        return "single"
    diff = np.diff(a)
    if np.all(diff >= 0):
        return "increasing"
    if np.all(diff <= 0):
        return "decreasing"
    return "mixed"


def partition_estimate(law, delta, beta, d, n, samples, seed, shards=1, exact_budget=EXACT_LADDER_BUDGET,
                       lgs=None, method="auto"):
    """Exact when (2d)^n fits ``exact_budget``, Monte Carlo otherwise."""
    if (2 * d) ** n <= exact_budget:
        return z_exact(law, delta, beta, d, n)
    sub = int(np.random.SeedSequence([seed, n]).generate_state(1)[0])
    est = z_mc(law, delta, beta, d, n, samples, sub, shards, method=method, lgs=lgs)
    # report the user seed; the rung stream is derived from (seed, n)
    return PartitionEstimate(**{**asdict(est), "seed": seed})


def free_energy_ladder(law: ChargeLaw, delta: float, beta: float, d: int, ladder: Sequence[int],
                       samples: int, seed: int, shards: int = 1,
                       exact_budget: int = EXACT_LADDER_BUDGET) -> LadderResult:
    """a_n per rung, F* extrapolated from the unflagged rungs, and F = F* + f(delta)."""
    ladder = list(ladder)
    if ladder != sorted(set(ladder)):
        raise ValueError("ladder must be strictly increasing")
    lgs = log_g_star_table(law, delta, beta, max(ladder))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ESSWarning)
        ests = [partition_estimate(law, delta, beta, d, n, samples, seed, shards, exact_budget, lgs)
                for n in ladder]
    for wmsg in caught:
        warnings.warn(wmsg.message, wmsg.category, stacklevel=2)
    use = [e for e in ests if not e.flagged]
    excluded = [e.n for e in ests if e.flagged]
    if not use:
        raise ArithmeticError("every rung was flagged for low effective sample size")
    if beta == 0:
        F_star, sigma = float(cm.log_mgf(law, delta)), 0.0
        cert = "constant: a_n = log M(delta) at every rung"
    else:
        F_star, sigma = extrapolate([e.n for e in use], [e.a_n for e in use],
                                    [e.std_error / e.n for e in use], d)
        cert = "none: no sub- or super-additivity is known for log Z*_n"
    a = np.array([e.a_n for e in ests])
    return LadderResult(law.label, delta, beta, d, ests, F_star, sigma, cm.annealed_exponent(law, delta),
                        cert, _trend(a), excluded)


# ---------------------------------------------------------------------------
# critical curve
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Probe:
    beta: float
    slope: float
    sigma: float
    decision: str


@dataclass
class Bracket:
    delta: float
    beta_lo: float
    beta_hi: float
    resolved: bool
    probes: list[Probe]

    @property
    def width(self) -> float:
        return self.beta_hi - self.beta_lo

    @property
    def beta_c_hat(self) -> float | None:
        return 0.5 * (self.beta_lo + self.beta_hi) if self.resolved else None


@dataclass
class CriticalScan:
    law: str
    d: int
    ns: tuple[int, int]
    samples: int
    seed: int
    brackets: list[Bracket]

    def monotone(self) -> bool:
        """Brackets non-decreasing in delta within their widths."""
        b = self.brackets
        return all(b[i].beta_lo <= b[i + 1].beta_hi for i in range(len(b) - 1))

    def to_json(self) -> str:
        return json.dumps({"op": "critical-curve", "law": self.law, "d": self.d, "ns": list(self.ns),
                           "samples": self.samples, "seed": self.seed, "version": __version__,
                           "brackets": [{**asdict(b), "beta_c_hat": b.beta_c_hat} for b in self.brackets]},
                          default=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta", "beta_lo", "beta_hi", "beta_c_hat", "resolved", "probes"])
        for b in self.brackets:
            w.writerow([b.delta, b.beta_lo, b.beta_hi, b.beta_c_hat, b.resolved, len(b.probes)])
        return buf.getvalue()


def phase_statistic(law, delta, beta, d, ns, samples, seed, shards=1) -> Probe:
    """Slope of log Z*_n between the two top rungs, with its error.

    "extended" when the slope exceeds z sigma with z = 2; "collapsed" when it
    does not; "undecided" when either rung has too small an ESS.
    """
    n1, n2 = ns
    lgs = log_g_star_table(law, delta, beta, n2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ESSWarning)
        e1 = partition_estimate(law, delta, beta, d, n1, samples, seed, shards, lgs=lgs)
        e2 = partition_estimate(law, delta, beta, d, n2, samples, seed, shards, lgs=lgs)
    slope = (e2.log_value - e1.log_value) / (n2 - n1)
    sigma = math.hypot(e1.std_error, e2.std_error) / (n2 - n1)
    if e1.flagged or e2.flagged:
        dec = "undecided"
    elif slope > 2.0 * sigma:
        dec = "extended"
    else:
        dec = "collapsed"
    return Probe(beta, slope, sigma, dec)


def critical_scan(law: ChargeLaw, deltas: Sequence[float], d: int, ns: tuple[int, int], samples: int,
                  seed: int, tol: float | None = None, shards: int = 1,
                  beta_hi: float | None = None) -> CriticalScan:
    """Bisection in beta on the phase statistic for each delta.

    The bracket starts at [0, delta^2] (or [0, beta_hi]); beta = 0 is always
    extended for delta > 0.  The search stops at width ``tol`` (default
    2% of delta^2) or at the first undecided probe, in which case the
    bracket is reported unresolved.
    """
    brackets = []
    for dl in deltas:
        if dl <= 0:
            raise ValueError("delta grid must be positive")
        lo, hi = 0.0, beta_hi if beta_hi is not None else dl * dl
        width = tol if tol is not None else 0.02 * dl * dl
        probes = []
        top = phase_statistic(law, dl, hi, d, ns, samples, seed, shards)
        probes.append(top)
        resolved = top.decision == "collapsed"
        while resolved and hi - lo > width:
            mid = 0.5 * (lo + hi)
            pr = phase_statistic(law, dl, mid, d, ns, samples, seed, shards)
            probes.append(pr)
            if pr.decision == "extended":
                lo = mid
            elif pr.decision == "collapsed":
                hi = mid
            else:
                resolved = False
        brackets.append(Bracket(float(dl), lo, hi, resolved, probes))
    return CriticalScan(law.label, d, tuple(ns), samples, seed, brackets)


def kappa_under(law: ChargeLaw) -> float:
    m = law.moments
    return m[4] / 12.0 - m[3] ** 2 / 3.0


def kappa_d(law: ChargeLaw, d: int) -> float:
    from .ldp_lab import LAMBDA_2, lambda_d

    if d == 2:
        return 0.25 * LAMBDA_2
    return 0.25 * (lambda_d(d) - 1.0) + kappa_under(law)


def beta_c_asymptote(law: ChargeLaw, delta: float, regime: str, d: int = 2) -> dict:
    """Predicted beta_c(delta): a two-sided band for small delta, the
    leading term for large delta."""
    if regime == "small":
        if not 0 < delta < 1:
            raise ValueError("the small regime needs 0 < delta < 1")
        centre = 0.5 * delta**2 - law.moments[3] * delta**3 / 3.0
        ku = kappa_under(law)
        kd = kappa_d(law, d)
        eps_upper = kd * delta**4 * math.log(1 / delta) if d == 2 else kd * delta**4
        lower, upper = centre - eps_upper, centre - ku * delta**4
        # the band is asymptotic; at moderate delta the two ends may cross
        return {"regime": "small", "lower": lower, "upper": upper, "ordered": lower <= upper,
                "centre": centre, "kappa_under": ku, "kappa_d": kd}
    if regime == "large":
        if law.is_lattice:
            return {"regime": "large", "value": delta / float(law.span_exact), "form": "delta/T"}
        if law.has_density:
            if delta <= 1:
                raise ValueError("the large regime needs delta > 1")
            return {"regime": "large", "value": delta**2 / (4 * math.log(delta)),
                    "form": "delta^2/(4 log delta)"}
        raise ValueError("non-lattice law without a declared density")
    raise ValueError(f"unknown regime {regime!r}")
