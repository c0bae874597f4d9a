"""Charge distributions: moments, exponential tilting, lattice span and the
law of the partial sum Omega_l = omega_1 + ... + omega_l.

Every law is normalised to mean 0 and variance 1.  Lattice laws carry exact
rational support points so that the lattice span is an exact gcd, never a
guess from floating point values.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Iterator, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import GridResolutionWarning

KINDS = ("rademacher", "gaussian", "three_point", "finite_lattice", "uniform")
_SQRT3 = math.sqrt(3.0)
NORMALISATION_TOL = 1e-12


def _as_fraction(x) -> Fraction:
    if isinstance(x, bool):
        raise TypeError("booleans are not charge values")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (tuple, list)) and len(x) == 2:
        return Fraction(int(x[0]), int(x[1]))
    raise TypeError(
        f"lattice values and probabilities must be exact rationals (int, Fraction, "
        f"'p/q' string or (num, den) pair), got {x!r}"
    )


@dataclass(frozen=True)
class ChargeLaw:
    """A single-charge distribution.

    Use the constructors :func:`rademacher`, :func:`gaussian`,
    :func:`three_point`, :func:`finite_lattice` and :func:`uniform`.
    """

    kind: str
    values: tuple[Fraction, ...] = ()
    probs: tuple[Fraction, ...] = ()
    N: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown charge law kind {self.kind!r}")
        if self.is_lattice:
            if len(self.values) != len(self.probs) or not self.values:
                raise ValueError("lattice law needs matching, non-empty values and probabilities")
            if len(set(self.values)) != len(self.values):
                raise ValueError("support values must be distinct")
            if any(p <= 0 for p in self.probs):
                raise ValueError("probabilities must be positive")
            if sum(self.probs) != 1:
                raise ValueError(f"probabilities sum to {sum(self.probs)}, not 1")
        m = self.moments
        if abs(m[1]) > NORMALISATION_TOL or abs(m[2] - 1.0) > NORMALISATION_TOL:
            raise ValueError(f"charge law must have mean 0 and variance 1, got m1={m[1]}, m2={m[2]}")

    # -- structure -----------------------------------------------------------

    @property
    def is_lattice(self) -> bool:
        return self.kind in ("rademacher", "three_point", "finite_lattice")

    @property
    def has_density(self) -> bool:
        return self.kind in ("gaussian", "uniform")

    @property
    def label(self) -> str:
        if self.kind == "three_point":
            return f"three_point(N={self.N})"
        return self.kind

    @cached_property
    def is_symmetric(self) -> bool:
        if not self.is_lattice:
            return True
        pmf = dict(zip(self.values, self.probs))
        return all(pmf.get(-v) == p for v, p in pmf.items())

    @cached_property
    def span_exact(self) -> Fraction:
        """Lattice span T as an exact rational (0 for laws with a density)."""
        if not self.is_lattice:
            return Fraction(0)
        den = reduce(math.lcm, (v.denominator for v in self.values), 1)
        ints = [int(v * den) for v in self.values]
        g = reduce(math.gcd, (abs(i) for i in ints), 0)
        return Fraction(g, den)

    @cached_property
    def int_support(self) -> np.ndarray:
        """Support divided by the span, as integers (lattice laws only)."""
        T = self.span_exact
        return np.array([int(v / T) for v in self.values], dtype=np.int64)

    @cached_property
    def float_values(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])

    @cached_property
    def float_probs(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])

    @cached_property
    def moments(self) -> tuple[float, ...]:
        """Raw moments (m_0, m_1, ..., m_6)."""
        if self.is_lattice:
            return tuple(float(sum(p * v**k for v, p in zip(self.values, self.probs))) for k in range(7))
        if self.kind == "gaussian":
            return (1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0)
        # uniform on [-sqrt 3, sqrt 3]: E w^{2j} = 3^j / (2j + 1)
        return (1.0, 0.0, 1.0, 0.0, 9.0 / 5.0, 0.0, 27.0 / 7.0)

    def moment(self, k: int) -> float:
        return self.moments[k]

    def max_abs_value(self) -> float:
        if self.is_lattice:
            return float(max(abs(v) for v in self.values))
        if self.kind == "uniform":
            return _SQRT3
        return math.inf

    def to_config(self) -> dict:
        if self.kind == "three_point":
            return {"kind": "three_point", "N": self.N}
        if self.kind == "finite_lattice":
            return {
                "kind": "finite_lattice",
                "values": [[v.numerator, v.denominator] for v in self.values],
                "probs": [[p.numerator, p.denominator] for p in self.probs],
            }
        return {"kind": self.kind}


def rademacher() -> ChargeLaw:
    return ChargeLaw("rademacher", (Fraction(-1), Fraction(1)), (Fraction(1, 2), Fraction(1, 2)))


def gaussian() -> ChargeLaw:
    return ChargeLaw("gaussian")


def uniform() -> ChargeLaw:
    """Uniform on [-sqrt(3), sqrt(3)]: bounded density, non-lattice."""
    return ChargeLaw("uniform")


def three_point(N: int) -> ChargeLaw:
    """Values -N, 0, 2N with weights 1/(3N^2), 1 - 1/(2N^2), 1/(6N^2)."""
    if int(N) != N or N < 1:
        raise ValueError("three-point law needs an integer N >= 1")
    N = int(N)
    return ChargeLaw(
        "three_point",
        (Fraction(-N), Fraction(0), Fraction(2 * N)),
        (Fraction(1, 3 * N * N), 1 - Fraction(1, 2 * N * N), Fraction(1, 6 * N * N)),
        N=N,
    )


def finite_lattice(values: Sequence, probs: Sequence) -> ChargeLaw:
    vals = tuple(_as_fraction(v) for v in values)
    ps = tuple(_as_fraction(p) for p in probs)
    order = sorted(range(len(vals)), key=lambda i: vals[i])
    return ChargeLaw("finite_lattice", tuple(vals[i] for i in order), tuple(ps[i] for i in order))


def from_config(cfg: dict | str) -> ChargeLaw:
    """Build a law from a tagged record, e.g. ``{"kind": "three_point", "N": 4}``.

    A bare string such as ``"gaussian"`` or ``"three_point:4"`` is accepted too.
    """
    if isinstance(cfg, str):
        name, _, arg = cfg.partition(":")
        cfg = {"kind": name}
        if arg:
            cfg["N"] = int(arg)
    kind = cfg.get("kind")
    if kind == "rademacher":
        return rademacher()
    if kind == "gaussian":
        return gaussian()
    if kind == "uniform":
        return uniform()
    if kind == "three_point":
        return three_point(int(cfg["N"]))
    if kind == "finite_lattice":
        return finite_lattice(cfg["values"], cfg["probs"])
    raise ValueError(f"unknown charge law kind {kind!r}")


# ---------------------------------------------------------------------------
# moment generating function and tilting
# ---------------------------------------------------------------------------


def log_mgf(law: ChargeLaw, delta: float) -> float:
    """log M(delta) = log E[exp(delta * omega_1)]."""
    delta = float(delta)
    if law.is_lattice:
        return float(logsumexp(delta * law.float_values, b=law.float_probs))
    if law.kind == "gaussian":
        return 0.5 * delta * delta
    x = _SQRT3 * abs(delta)
    if x < 1e-4:
        return x * x / 6.0 - x**4 / 180.0
    # log(sinh(x) / x), written to avoid overflow
    return x + math.log1p(-math.exp(-2.0 * x)) - math.log(2.0 * x)


def mgf(law: ChargeLaw, delta: float) -> float:
    return math.exp(log_mgf(law, delta))


def annealed_exponent(law: ChargeLaw, delta: float) -> float:
    """f(delta) = -log M(delta); non-positive for mean-zero laws."""
    return -log_mgf(law, delta)


def tilted_probs(law: ChargeLaw, delta: float) -> np.ndarray:
    lw = np.log(law.float_probs) + float(delta) * law.float_values
    return np.exp(lw - logsumexp(lw))


def tilted_moments(law: ChargeLaw, delta: float) -> tuple[float, float]:
    """Mean m(delta) and variance v(delta) of omega_1 under the tilted law."""
    delta = float(delta)
    if law.is_lattice:
        p = tilted_probs(law, delta)
        m = float(np.dot(p, law.float_values))
        v = float(np.dot(p, (law.float_values - m) ** 2))
        return m, v
    if law.kind == "gaussian":
        return delta, 1.0
    x = _SQRT3 * delta
    if abs(x) < 1e-3:
        # series of d/dx log(sinh x / x) and its derivative
        m = _SQRT3 * (x / 3.0 - x**3 / 45.0)
        v = 3.0 * (1.0 / 3.0 - x * x / 15.0)
        return m, v
    m = _SQRT3 * (1.0 / math.tanh(x) - 1.0 / x)
    v = 3.0 * (1.0 / (x * x) - 1.0 / math.sinh(x) ** 2) if abs(x) < 300 else 3.0 / (x * x)
    return m, v


def sample_charges(law: ChargeLaw, delta: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. draws from the delta-tilted charge law."""
    delta = float(delta)
    if law.is_lattice:
        p = tilted_probs(law, delta)
        idx = rng.choice(len(p), size=n, p=p)
        return law.float_values[idx]
    if law.kind == "gaussian":
        return rng.standard_normal(n) + delta
    u = rng.random(n)
    if abs(delta) < 1e-12:
        return _SQRT3 * (2.0 * u - 1.0)
    a = _SQRT3
    # inverse CDF of the density proportional to exp(delta x) on [-a, a]
    lo = -delta * a
    span = 2.0 * delta * a
    return (lo + np.log1p(u * np.expm1(span))) / delta


# ---------------------------------------------------------------------------
# the partial sum Omega_l
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OmegaSumLaw:
    """Law of Omega_l.

    ``kind`` is ``"lattice"`` (exact finite support ``support`` with masses
    ``probs``), ``"gaussian"`` (mean 0, variance ``ell``) or ``"grid"`` (a
    density tabulated on the uniform grid ``support``).
    """

    ell: int
    kind: str
    support: np.ndarray = field(default_factory=lambda: np.zeros(1), repr=False)
    probs: np.ndarray = field(default_factory=lambda: np.ones(1), repr=False)
    grid_step: float = 0.0

    def total_mass(self) -> float:
        if self.kind == "gaussian":
            return 1.0
        if self.kind == "grid":
            return float(np.sum(self.probs) * self.grid_step)
        return math.fsum(self.probs)

    def moment(self, k: int) -> float:
        if self.kind == "gaussian":
            if k % 2:
                return 0.0
            return float(self.ell ** (k // 2) * _double_factorial(k - 1))
        w = self.probs * (self.grid_step if self.kind == "grid" else 1.0)
        return math.fsum(w * self.support**k)

    def density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-0.5 * x * x / self.ell) / math.sqrt(2.0 * math.pi * self.ell)
        if self.kind == "grid":
            return np.interp(x, self.support, self.probs, left=0.0, right=0.0)
        raise ValueError("lattice sums have no density")


def _double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def lattice_sum_pmfs(law: ChargeLaw, L: int, delta: float = 0.0) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (offset, log-pmf) of Omega_l / T for l = 0..L under the tilted law.

    Entry j of the array is log P(Omega_l = (offset + j) T).  The convolution
    runs in log space so far tails never underflow.
    """
    if not law.is_lattice:
        raise ValueError("exact convolution needs a lattice law")
    sup = law.int_support
    lw = np.log(tilted_probs(law, delta))
    lo, hi = int(sup.min()), int(sup.max())
    logp = np.zeros(1)
    offset = 0
    yield 0, logp
    for _ in range(L):
        width = logp.shape[0] + hi - lo
        new = np.full(width, -np.inf)
        for s, w in zip(sup, lw):
            start = s - lo
            seg = new[start : start + logp.shape[0]]
            np.logaddexp(seg, logp + w, out=seg)
        logp = new
        offset += lo
        yield offset, logp


def uniform_sum_grid(ell: int, delta: float = 0.0, K: int = 64) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Law of Omega_l for delta-tilted uniform charges on the lattice h Z,
    h = sqrt(3)/K.

    One charge is discretised with trapezoid weights on the K-grid of
    [-sqrt 3, sqrt 3] (second order in h), tilted, then convolved l times.
    Tilting before convolving keeps FFT round-off away from the region the
    factor exp(delta s) would otherwise amplify.  Returns (support, pmf of
    the tilted sum, log of the discrete single-charge MGF, h).
    """
    h = _SQRT3 / K
    x = np.arange(-K, K + 1) * h
    logw = delta * x + math.log(h / (2 * _SQRT3))
    logw[0] -= math.log(2.0)
    logw[-1] -= math.log(2.0)
    log_phi = float(logsumexp(logw))
    p = np.exp(logw - log_phi)
    width = 2 * K * ell + 1
    if ell == 0:
        return np.zeros(1), np.ones(1), log_phi, h
    size = 1 << int(math.ceil(math.log2(width)))
    pm = np.fft.irfft(np.fft.rfft(p, size) ** ell, size)[:width]
    pm = np.clip(pm, 0.0, None)
    pm /= pm.sum()
    support = (np.arange(width) - K * ell) * h
    return support, pm, log_phi, h


def uniform_grid_K(ell: int, grid_points: int) -> int:
    """Points per unit-charge half-support so the sum grid has at least
    ``grid_points`` points."""
    return max(64, -(-grid_points // (2 * max(ell, 1))))


def omega_sum_law(law: ChargeLaw, ell: int, grid_points: int = 2**14) -> OmegaSumLaw:
    if ell < 0:
        raise ValueError("ell must be >= 0")
    if ell == 0:
        return OmegaSumLaw(0, "lattice", np.zeros(1), np.ones(1))
    if law.is_lattice:
        T = float(law.span_exact)
        for ell_k, (offset, logp) in zip(range(ell + 1), lattice_sum_pmfs(law, ell)):
            pass
        support = (offset + np.arange(logp.shape[0])) * T
        return OmegaSumLaw(ell, "lattice", support, np.exp(logp))
    if law.kind == "gaussian":
        return OmegaSumLaw(ell, "gaussian")
    warnings.warn(
        f"density of Omega_{ell} for the {law.label} law is a grid approximation",
        GridResolutionWarning,
        stacklevel=2,
    )
    support, pm, _, h = uniform_sum_grid(ell, 0.0, uniform_grid_K(ell, grid_points))
    return OmegaSumLaw(ell, "grid", support, pm / h, grid_step=h)


def omega_sum_moments(law: ChargeLaw, ell: int, k: int) -> float:
    """E[Omega_l^k] for k = 0..6 from the i.i.d. moment expansion."""
    if not 0 <= k <= 6:
        raise ValueError("moments are available for k = 0..6")
    if k == 0:
        return 1.0
    if ell == 0:
        return 0.0
    m = law.moments
    L = float(ell)
    if k == 1:
        return m[1] * L
    if k == 2:
        return m[2] * L
    if k == 3:
        return m[3] * L
    if k == 4:
        return 3 * m[2] ** 2 * L * (L - 1) + m[4] * L
    if k == 5:
        return 10 * m[2] * m[3] * L * (L - 1) + m[5] * L
    return (
        15 * m[2] ** 3 * L * (L - 1) * (L - 2)
        + (15 * m[2] * m[4] + 10 * m[3] ** 2) * L * (L - 1)
        + m[6] * L
    )


def lattice_span(law: ChargeLaw) -> float:
    """T = sup{t > 0 : P(omega_1 in tZ) = 1}, and 0 for non-lattice laws."""
    return float(law.span_exact)
