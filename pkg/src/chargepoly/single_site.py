"""Single-site partition functions.

    g*_{delta,beta}(l) = E[exp(delta * Omega_l - beta * Omega_l^2)]
    g_{delta,beta}(l)  = E^delta[exp(-beta * Omega_l^2)]

g* is evaluated by closed form (Gaussian charges), exact convolution
(lattice charges), quadrature against the density of Omega_l, or Monte
Carlo.  Values are kept as logarithms throughout.  The module also holds the
numerical bound checks built on these functions.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import logsumexp

from . import charge_model as cm
from .charge_model import ChargeLaw

MODES = ("closed_form", "exact_convolution", "quadrature", "monte_carlo")
QUAD_RTOL = 1e-13
QUAD_MAX_POINTS = 2**20
_LOG_DROP = 60.0


def default_mode(law: ChargeLaw) -> str:
    if law.kind == "gaussian":
        return "closed_form"
    if law.is_lattice:
        return "exact_convolution"
    return "quadrature"


def _check_mode(law: ChargeLaw, mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "closed_form" and law.kind != "gaussian":
        raise ValueError("closed_form is only available for Gaussian charges")
    if mode == "exact_convolution" and not law.is_lattice:
        raise ValueError("exact_convolution needs a lattice charge law")
    if mode == "quadrature" and not law.has_density:
        raise ValueError("quadrature needs a charge law with a density")


# ---------------------------------------------------------------------------
# individual evaluation modes
# ---------------------------------------------------------------------------


def gaussian_log_g_star(delta, beta, ell):
    """log of sqrt(1/(1+2 beta l)) exp[delta^2 l / (2 (1 + 2 beta l))]."""
    ell = np.asarray(ell, dtype=float)
    den = 1.0 + 2.0 * beta * ell
    return -0.5 * np.log(den) + delta * delta * ell / (2.0 * den)


def g_attractive_repulsive_split(delta: float, beta: float, ell: float) -> tuple[float, float]:
    """(-log g*_att, -log g*_rep) for Gaussian charges; they sum to -log g*."""
    den = 1.0 + 2.0 * beta * ell
    return 0.5 * math.log(den), -(delta * delta * ell) / (2.0 * den)


class QuadratureError(ArithmeticError):
    def __init__(self, achieved: float):
        self.achieved = achieved
        super().__init__(f"quadrature did not converge; achieved relative error {achieved:.3g}")


def quad_log_integral(logf, centre_guess: float = 0.0, scale: float = 1.0,
                      rtol: float = QUAD_RTOL) -> tuple[float, float]:
    """log of the integral over R of exp(logf(s)) for a smooth unimodal ``logf``.

    The window is grown from the numerically located mode until ``logf``
    has dropped by 60 on both sides; composite trapezoid sums are then
    refined by halving the step until two successive sums agree to ``rtol``.
    Returns (log integral, relative error estimate).
    """
    res = minimize_scalar(lambda s: -logf(s), bracket=(centre_guess - scale, centre_guess + scale))
    mode = float(res.x)
    top = float(logf(mode))
    lo = hi = scale
    while logf(mode - lo) > top - _LOG_DROP:
        lo *= 2.0
    while logf(mode + hi) > top - _LOG_DROP:
        hi *= 2.0
    a, b = mode - lo, mode + hi
    m = 64
    prev = None
    err = math.inf
    while m <= QUAD_MAX_POINTS:
        s = np.linspace(a, b, m + 1)
        v = np.exp(logf(s) - top)
        h = (b - a) / m
        total = h * (math.fsum(v) - 0.5 * (v[0] + v[-1]))
        if prev is not None:
            err = abs(total - prev) / total
            if err < rtol:
                return top + math.log(total), max(err, 1e-16)
        prev = total
        m *= 2
    raise QuadratureError(err)


def _gaussian_sum_logpdf(ell: int, mean: float = 0.0):
    var = float(ell)
    c = -0.5 * math.log(2.0 * math.pi * var)
    return lambda s: c - 0.5 * (np.asarray(s) - mean) ** 2 / var


def quadrature_log_g_star(law: ChargeLaw, delta: float, beta: float, ell: int) -> tuple[float, float]:
    """log g* and its relative error bound by numerical integration over the
    density of Omega_l."""
    if ell == 0:
        return 0.0, 0.0
    if law.kind == "gaussian":
        logpdf = _gaussian_sum_logpdf(ell)
        return quad_log_integral(
            lambda s: logpdf(s) + delta * np.asarray(s) - beta * np.asarray(s) ** 2,
            centre_guess=0.0, scale=math.sqrt(ell),
        )
    if law.kind == "uniform":
        return _grid_log_g(law, delta, beta, ell, tilt=0.0, star=True)
    raise ValueError("quadrature needs a charge law with a density")


def _saddle_tilt(c: float, beta: float, ell: int) -> float:
    """theta with l m(theta) = (c - theta) / (2 beta): the tilted sum then
    sits where exp((c - theta) s - beta s^2) peaks."""
    if beta == 0:
        return c
    m = lambda th: cm.tilted_moments(cm.uniform(), th)[0]
    span = 2 * beta * ell * math.sqrt(3.0) + 1.0
    return brentq(lambda th: ell * m(th) - (c - th) / (2 * beta), c - span, c + span, xtol=1e-12)


def _uniform_log_star(c: float, beta: float, ell: int, K: int) -> float:
    """log E[exp(c Omega_l - beta Omega_l^2)] on the K-grid."""
    theta = _saddle_tilt(c, beta, ell)
    s, p, log_phi, _ = cm.uniform_sum_grid(ell, theta, K)
    mask = p > 0
    return ell * log_phi + float(logsumexp((c - theta) * s[mask] - beta * s[mask] ** 2, b=p[mask]))


def _grid_log_g(law, delta, beta, ell, tilt, star):
    """log g* (``star``) or log g under the ``tilt``-ed law on the uniform
    grid, Richardson-extrapolated in h^2 over three resolutions; the gap
    between the two extrapolants is the error bound."""
    if law.kind != "uniform":
        raise ValueError("grid evaluation is implemented for the uniform law")
    K0 = cm.uniform_grid_K(ell, 2**14)
    vals = []
    for K in (K0, 2 * K0, 4 * K0):
        if star:
            vals.append(_uniform_log_star(delta, beta, ell, K))
        else:
            # g = E^t[exp(-beta Omega^2)] = E[exp(t Omega - beta Omega^2)] / M_h(t)^l
            vals.append(_uniform_log_star(tilt, beta, ell, K) - ell * cm.uniform_sum_grid(1, tilt, K)[2])
    r1 = (4 * vals[1] - vals[0]) / 3
    r2 = (4 * vals[2] - vals[1]) / 3
    return r2, abs(r2 - r1) + 1e-15


def monte_carlo_g_star(law: ChargeLaw, delta: float, beta: float, ell: int, samples: int,
                       rng: np.random.Generator, chunk: int = 2**16) -> tuple[float, float]:
    """Plain MC estimate of g*(l); returns (mean, standard error)."""
    if ell == 0:
        return 1.0, 0.0
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        om = cm.sample_charges(law, 0.0, m * ell, rng).reshape(m, ell).sum(axis=1)
        w = np.exp(delta * om - beta * om * om)
        total += float(w.sum())
        total_sq += float((w * w).sum())
        done += m
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / samples)


def _lattice_log_values(law: ChargeLaw, deltas: np.ndarray, betas: np.ndarray, L: int,
                        tilt: float = 0.0, star: bool = True) -> np.ndarray:
    """Exact log g* (or log g when ``star`` is False) for each (delta, beta)
    pair and l = 0..L, shape (pairs, L + 1)."""
    T = float(law.span_exact)
    out = np.zeros((len(deltas), L + 1))
    dcol = np.asarray(deltas, dtype=float)[:, None]
    bcol = np.asarray(betas, dtype=float)[:, None]
    for ell, (offset, logp) in enumerate(cm.lattice_sum_pmfs(law, L, delta=tilt)):
        s = (offset + np.arange(logp.shape[0])) * T
        expo = -bcol * s[None, :] ** 2
        if star:
            expo = expo + dcol * s[None, :]
        out[:, ell] = logsumexp(logp[None, :] + expo, axis=1)
    return out


# ---------------------------------------------------------------------------
# public evaluation
# ---------------------------------------------------------------------------


def log_g_star(law: ChargeLaw, delta: float, beta: float, ell: int, mode: str | None = None,
               samples: int = 10**6, rng: np.random.Generator | None = None) -> tuple[float, float]:
    """(log g*_{delta,beta}(l), absolute error bound on the log)."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if ell < 0:
        raise ValueError("l must be >= 0")
    mode = mode or default_mode(law)
    _check_mode(law, mode)
    if ell == 0:
        return 0.0, 0.0
    if mode == "closed_form":
        v = float(gaussian_log_g_star(delta, beta, ell))
        return v, 4e-16 * (1.0 + abs(v))
    if mode == "exact_convolution":
        v = float(_lattice_log_values(law, [delta], [beta], ell)[0, ell])
        return v, 1e-15 * (ell + 1) * (1.0 + abs(v))
    if mode == "quadrature":
        v, rel = quadrature_log_g_star(law, delta, beta, ell)
        return v, rel
    if rng is None:
        raise ValueError("monte_carlo mode needs an explicit random generator")
    mean, se = monte_carlo_g_star(law, delta, beta, ell, samples, rng)
    return math.log(mean), se / mean


def g_star(law: ChargeLaw, delta: float, beta: float, ell: int, mode: str | None = None, **kw) -> float:
    return math.exp(log_g_star(law, delta, beta, ell, mode, **kw)[0])


def log_g(law: ChargeLaw, delta: float, beta: float, ell: int) -> float:
    """log g_{delta,beta}(l) = log E^delta[exp(-beta Omega_l^2)], computed under
    the tilted law directly (not from g*)."""
    if ell == 0:
        return 0.0
    if law.is_lattice:
        return float(_lattice_log_values(law, [0.0], [beta], ell, tilt=delta, star=False)[0, ell])
    if law.kind == "gaussian":
        logpdf = _gaussian_sum_logpdf(ell, mean=ell * delta)
        v, _ = quad_log_integral(lambda s: logpdf(s) - beta * np.asarray(s) ** 2,
                                 centre_guess=ell * delta, scale=math.sqrt(ell))
        return v
    return _grid_log_g(law, 0.0, beta, ell, tilt=delta, star=False)[0]


def log_g_table(law: ChargeLaw, delta: float, beta: float, L: int) -> np.ndarray:
    if law.is_lattice:
        return _lattice_log_values(law, [0.0], [beta], L, tilt=delta, star=False)[0]
    return np.array([log_g(law, delta, beta, ell) for ell in range(L + 1)])


def log_g_star_grid(law: ChargeLaw, deltas: Sequence[float], betas: Sequence[float], L: int) -> np.ndarray:
    """log g* for each (delta, beta) pair and l = 0..L in the default mode."""
    deltas = np.asarray(deltas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if law.kind == "gaussian":
        ell = np.arange(L + 1)
        return gaussian_log_g_star(deltas[:, None], betas[:, None], ell[None, :])
    if law.is_lattice:
        return _lattice_log_values(law, deltas, betas, L)
    out = np.zeros((len(deltas), L + 1))
    for i, (dl, bt) in enumerate(zip(deltas, betas)):
        for ell in range(1, L + 1):
            out[i, ell] = quadrature_log_g_star(law, dl, bt, ell)[0]
    return out


@dataclass(frozen=True)
class SingleSiteTable:
    """log g*_{delta,beta}(l) for l = 0..L with per-entry mode and error bound."""

    law: dict
    delta: float
    beta: float
    log_values: np.ndarray = field(repr=False)
    modes: tuple[str, ...] = field(repr=False)
    err_bounds: np.ndarray = field(repr=False)

    @property
    def L(self) -> int:
        return len(self.log_values) - 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ell", "log_g_star", "mode", "err_bound"])
        for ell, (v, m, e) in enumerate(zip(self.log_values, self.modes, self.err_bounds)):
            w.writerow([ell, repr(float(v)), m, repr(float(e))])
        return buf.getvalue()


def build_table(law: ChargeLaw, delta: float, beta: float, L: int, mode: str | None = None,
                samples: int = 10**6, rng: np.random.Generator | None = None) -> SingleSiteTable:
    mode = mode or default_mode(law)
    _check_mode(law, mode)
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if mode == "closed_form":
        vals = gaussian_log_g_star(delta, beta, np.arange(L + 1))
        errs = 4e-16 * (1.0 + np.abs(vals))
    elif mode == "exact_convolution":
        vals = _lattice_log_values(law, [delta], [beta], L)[0]
        errs = 1e-15 * (np.arange(L + 1) + 1) * (1.0 + np.abs(vals))
    else:
        pairs = [log_g_star(law, delta, beta, ell, mode, samples=samples, rng=rng) for ell in range(L + 1)]
        vals = np.array([p[0] for p in pairs])
        errs = np.array([p[1] for p in pairs])
    vals = np.asarray(vals, dtype=float)
    vals[0] = 0.0
    errs = np.asarray(errs, dtype=float)
    errs[0] = 0.0
    if not np.all(np.isfinite(vals)):
        raise ArithmeticError("non-finite log g* entry")
    return SingleSiteTable(law.to_config(), float(delta), float(beta), vals, (mode,) * (L + 1), errs)


# ---------------------------------------------------------------------------
# bound checks
# ---------------------------------------------------------------------------


@dataclass
class BoundReport:
    check: str
    grid: dict
    margin: float
    passed: bool
    offending: dict | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.margin):
            raise ValueError(f"{self.check}: non-finite margin")
        if not self.passed and self.offending is None:
            raise ValueError(f"{self.check}: a failing report must name the offending point")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, default=float)


def check_symmetric_unit_bound(law: ChargeLaw, deltas: Sequence[float], L: int) -> BoundReport:
    """g*_{delta, delta^2/2}(l) <= 1 for all l <= L and every grid delta."""
    if not law.is_symmetric:
        raise ValueError(f"the unit bound is only claimed for symmetric laws; {law.label} is not")
    deltas = np.asarray(deltas, dtype=float)
    logs = log_g_star_grid(law, deltas, 0.5 * deltas**2, L)
    worst = np.unravel_index(np.argmax(logs), logs.shape)
    max_val = math.exp(float(logs[worst]))
    margin = 1.0 - max_val
    bad = np.argwhere(logs > 0.0)
    offending = None
    if bad.size:
        i, ell = bad[0]
        offending = {"delta": float(deltas[i]), "ell": int(ell), "g_star": math.exp(float(logs[i, ell]))}
    return BoundReport(
        "symmetric-unit-bound",
        {"law": law.label, "deltas": [float(x) for x in deltas], "L": L},
        margin,
        bad.size == 0,
        offending,
        {"violations": int(len(bad)), "max_g_star": max_val,
         "argmax": {"delta": float(deltas[worst[0]]), "ell": int(worst[1])}},
    )


def k1_constant(law: ChargeLaw) -> float:
    m = law.moments
    return m[3] ** 2 / 3.0 - m[4] / 12.0 + 0.25


def beta_of_delta(law: ChargeLaw, delta: float, eps_delta: float) -> float:
    return 0.5 * delta**2 - law.moments[3] * delta**3 / 3.0 - eps_delta


def eps_preset(name: str, law: ChargeLaw, delta: float, eta: float, d: int = 2,
               eps: float = 0.1, lam: float | None = None) -> float:
    """Named choices of eps_delta.

    ``"upper"``: eps_delta + k1 delta^4 = (1 - eta) delta^4 / 4.
    ``"wsaw"``: eps_delta + k1 delta^4 = (1 + eps) f_wsaw(u) with
    u = (1 + eta) delta^4 / 4 and f_wsaw replaced by its small-u asymptote.
    """
    k1 = k1_constant(law)
    if name == "upper":
        return 0.25 * (1 - eta) * delta**4 - k1 * delta**4
    if name == "wsaw":
        from .ldp_lab import lambda_d

        u = 0.25 * (1 + eta) * delta**4
        lam = lam if lam is not None else lambda_d(d)
        f = lam * u * math.log(1.0 / u) if d == 2 else lam * u
        return (1 + eps) * f - k1 * delta**4
    raise ValueError(f"unknown eps preset {name!r}")


def check_small_delta_regimes(law: ChargeLaw, delta: float, eta: float, eps_delta: float = 0.0,
                              a: float = 1.0, delta0: float = 0.1, L: int | None = None) -> BoundReport:
    """Quadratic sandwich for delta^2 l <= a and the 1/sqrt(1 + delta^2 l)
    envelope beyond, at beta = delta^2/2 - m3 delta^3/3 - eps_delta.

    The constant ``a`` is not known; the report carries the largest value
    for which the quadratic sandwich holds on the computed range, and the
    check passes when that value is positive and the envelope admits a finite
    constant beyond it.
    """
    if not 0 < delta <= delta0:
        raise ValueError(f"delta must be in (0, {delta0}]")
    if not 0 < eta < 1:
        raise ValueError("eta must be in (0, 1)")
    beta = beta_of_delta(law, delta, eps_delta)
    if beta < 0:
        raise ValueError("beta(delta) is negative for this eps_delta")
    d2 = delta * delta
    if L is None:
        L = int(math.ceil(max(10.0 * a, 10.0) / d2))
    logs = log_g_star_grid(law, [delta], [beta], L)[0]
    ell = np.arange(L + 1, dtype=float)
    x = d2 * ell
    k1 = k1_constant(law)
    lin = (eps_delta + k1 * delta**4) * ell
    quad = 0.25 * delta**4 * ell**2
    gm1 = np.expm1(logs)
    slack_lo = gm1 - (lin - (1 + eta) * quad)
    slack_hi = (lin - (1 - eta) * quad) - gm1
    slack = np.minimum(slack_lo, slack_hi)
    # largest a such that the sandwich holds for every l >= 1 with delta^2 l <= a
    fails = np.nonzero((slack < 0) & (ell >= 1))[0]
    largest_a = float(x[fails[0]] - d2) if fails.size else float(x[-1])
    largest_a = max(largest_a, 0.0)
    a_used = min(a, largest_a)
    reg1 = (ell >= 1) & (x <= a_used)
    margin1 = float(slack[reg1].min()) if reg1.any() else 0.0
    reg2 = x >= a_used if a_used > 0 else x >= a
    reg2 &= ell >= 1
    g = np.exp(logs[reg2])
    root = np.sqrt(1.0 + x[reg2])
    c0 = float(max(np.max(1.0 / (g * root)), np.max(g * root))) if reg2.any() else 1.0
    max_g2 = float(g.max()) if reg2.any() else 0.0
    passed = largest_a > 0 and max_g2 <= 1.0 and math.isfinite(c0)
    offending = None
    if not passed:
        if largest_a <= 0:
            offending = {"regime": 1, "ell": int(fails[0]), "delta": delta}
        else:
            j = int(np.argmax(np.where(reg2, logs, -np.inf)))
            offending = {"regime": 2, "ell": j, "delta": delta, "g_star": math.exp(float(logs[j]))}
    return BoundReport(
        "small-delta-regimes",
        {"law": law.label, "delta": delta, "eta": eta, "eps_delta": eps_delta, "a": a, "L": L},
        min(margin1, 1.0 - max_g2),
        passed,
        offending,
        {"k1": k1, "beta": beta, "largest_a": largest_a, "a_used": a_used, "c0": c0,
         "regime1_margin": margin1, "regime2_max_g": max_g2},
    )


def check_superadditivity(law: ChargeLaw, delta: float, beta: float, L: int) -> BoundReport:
    """min over m + n <= L of log g*(m+n) - log g*(m) - log g*(n)."""
    if L < 2:
        raise ValueError("L must be >= 2")
    lg = log_g_star_grid(law, [delta], [beta], L)[0]
    best = math.inf
    arg = (0, 0)
    for m in range(0, L // 2 + 1):
        n = np.arange(m, L - m + 1)
        vals = lg[m + n] - lg[m] - lg[n]
        j = int(np.argmin(vals))
        if vals[j] < best:
            best = float(vals[j])
            arg = (m, int(n[j]))
    passed = best >= 0.0
    return BoundReport(
        "superadditivity",
        {"law": law.label, "delta": delta, "beta": beta, "L": L},
        best,
        passed,
        None if passed else {"m": arg[0], "n": arg[1], "margin": best},
        {"argmin": list(arg)},
    )


def check_gdb_smallbeta(law: ChargeLaw, delta: float, beta: float, eta: float, a: float = 1.0,
                        beta0: float = 0.01, L: int = 1000) -> BoundReport:
    """Small-beta upper bounds on g_{delta,beta}(l) for the tilted law."""
    if not 0 < beta <= beta0:
        raise ValueError(f"beta must be in (0, {beta0}]")
    lg = log_g_table(law, delta, beta, L)
    m, v = cm.tilted_moments(law, delta)
    ell = np.arange(L + 1, dtype=float)
    r1 = (ell >= 1) & (beta * ell**2 <= a)
    bound1 = -(beta * v * ell + (1 - eta) * beta * m * m * ell**2)
    slack1 = bound1 - lg
    margin1 = float(slack1[r1].min()) if r1.any() else 0.0
    r2 = beta * ell**2 > a
    if r2.any():
        ratios = -lg[r2] / np.minimum(beta * ell[r2] ** 2, ell[r2])
        c_delta = float(ratios.min())
    else:
        c_delta = math.inf
    passed = margin1 >= 0 and c_delta > 0
    offending = None
    if not passed:
        if margin1 < 0:
            j = int(np.argmin(np.where(r1, slack1, np.inf)))
            offending = {"regime": 1, "ell": j}
        else:
            offending = {"regime": 2, "c_delta": c_delta}
    return BoundReport(
        "gdb-smallbeta",
        {"law": law.label, "delta": delta, "beta": beta, "eta": eta, "a": a, "L": L},
        min(margin1, c_delta),
        passed,
        offending,
        {"m": m, "v": v, "c_delta": c_delta if math.isfinite(c_delta) else None,
         "regime1_margin": margin1},
    )


def density_envelope_check(law: ChargeLaw, ells: Sequence[int], eps0: float = 1.0) -> BoundReport:
    """c0 l^{-1/2} <= inf_{0<=x<=eps0} f_l(x) <= sup f_l <= c1 l^{-1/2}."""
    if not law.has_density:
        raise ValueError(f"{law.label} has no density")
    import warnings

    from .errors import GridResolutionWarning

    lo_ratios, hi_ratios = [], []
    for ell in ells:
        if ell < 1:
            raise ValueError("l must be >= 1")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GridResolutionWarning)
            o = cm.omega_sum_law(law, ell)
        xs = np.linspace(0.0, eps0, 201)
        inf_f = float(o.density(xs).min())
        if o.kind == "gaussian":
            sup_f = 1.0 / math.sqrt(2 * math.pi * ell)
        else:
            sup_f = float(o.probs.max())
        lo_ratios.append(inf_f * math.sqrt(ell))
        hi_ratios.append(sup_f * math.sqrt(ell))
    c0 = min(lo_ratios)
    c1 = max(hi_ratios)
    passed = c0 > 0 and math.isfinite(c1)
    return BoundReport(
        "density-envelope",
        {"law": law.label, "ells": [int(e) for e in ells], "eps0": eps0},
        c0,
        passed,
        None if passed else {"ell": int(ells[int(np.argmin(lo_ratios))]), "c0": c0},
        {"c0": c0, "c1": c1},
    )


def check_large_delta_envelope(law: ChargeLaw, delta: float, eta: float, ells: Sequence[int],
                               beta: float | None = None) -> BoundReport:
    """(1/c) eta (delta/beta) e^{(1-eta) delta^2/4beta} l^{-1/2} <= g*(l)
    <= c e^{delta^2/4beta} (delta/beta) l^{-1/2}; reports the smallest c."""
    beta = beta if beta is not None else delta**2 / (4.0 * math.log(delta))
    ells = np.asarray(ells)
    lg = log_g_star_grid(law, [delta], [beta], int(ells.max()))[0][ells]
    r = delta / beta
    log_up = delta**2 / (4 * beta) + math.log(r) - 0.5 * np.log(ells)
    log_lo = math.log(eta) + math.log(r) + (1 - eta) * delta**2 / (4 * beta) - 0.5 * np.log(ells)
    log_c = float(max(np.max(lg - log_up), np.max(log_lo - lg), 0.0))
    c = math.exp(log_c)
    return BoundReport(
        "large-delta-envelope",
        {"law": law.label, "delta": delta, "beta": beta, "eta": eta,
         "ells": [int(ells.min()), int(ells.max())]},
        1.0 / c,
        math.isfinite(c),
        None,
        {"c": c},
    )
