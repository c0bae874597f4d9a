"""Acceptance suite: one test per criterion, each recording a pass/fail line.

The lines are collected in ``RESULTS`` and printed at the end of the run by
the terminal-summary hook in ``conftest.py``.  Run this file on its own with
``pytest tests/test_acceptance.py -v``.
"""

import math
import warnings

import numpy as np

from chargepoly import bridge_lab as bl
from chargepoly import charge_model as cm
from chargepoly import ldp_lab as ll
from chargepoly import partition as pt
from chargepoly import single_site as ss
from chargepoly.errors import ESSWarning, GridResolutionWarning

RESULTS: list[str] = []


def verdict(num, checks):
    """Record one line for criterion ``num`` and fail on any false check.

    ``checks`` maps a short label to (ok, detail).
    """
    ok = all(c[0] for c in checks.values())
    parts = [f"{k}={'ok' if v[0] else 'FAIL'} ({v[1]})" for k, v in checks.items()]
    RESULTS.append(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  " + "; ".join(parts))
    bad = [k for k, v in checks.items() if not v[0]]
    assert not bad, f"criterion {num} failed: {bad}"


def test_criterion_01_exact_vs_double_enumeration():
    worst = 0.0
    for law in (cm.rademacher(), cm.three_point(2)):
        for d in (1, 2):
            for n in range(1, 9):
                for delta in (0.0, 0.3, 1.0):
                    for beta in (0.0, 0.2, 1.0):
                        a = pt.z_exact(law, delta, beta, d, n).log_value
                        b = pt.z_double_enum(law, delta, beta, d, n).log_value
                        # relative error of Z itself
                        worst = max(worst, abs(math.expm1(a - b)))
    verdict(1, {"grid": (worst <= 1e-12, f"max rel err {worst:.2e}")})


def test_criterion_02_gaussian_closed_form_vs_quadrature():
    worst = 0.0
    for delta in (0.0, 0.5, 1.0, 2.0):
        for beta in (0.01, 0.1, 1.0):
            for ell in range(1, 65):
                a = ss.log_g_star(cm.gaussian(), delta, beta, ell, mode="closed_form")[0]
                b = ss.log_g_star(cm.gaussian(), delta, beta, ell, mode="quadrature")[0]
                worst = max(worst, abs(math.expm1(b - a)))
    verdict(2, {"grid": (worst <= 1e-10, f"max rel err {worst:.2e}")})


def test_criterion_03_symmetric_unit_bound():
    deltas = np.round(np.arange(1, 61) * 0.05, 10)
    checks = {}
    for law in (cm.gaussian(), cm.rademacher()):
        rep = ss.check_symmetric_unit_bound(law, deltas, 1000)
        checks[law.label] = (rep.passed, f"margin {rep.margin:.3g}")
    verdict(3, checks)


def test_criterion_04_expected_q_and_two_dim_slope():
    enum = ll.exact_q_distribution(2, 4).mean
    formula = ll.expected_q(2, 4).value
    mc = ll.mc_q_distribution(2, 4, 200_000, seed=2024)
    se = math.sqrt(mc.var / 200_000)
    ns = [2**k for k in range(8, 15)]
    vals = [e.value for e in ll.expected_q_series(2, ns)]
    slope = ll.slope_vs_log(ns, vals)
    rel = abs(slope / ll.LAMBDA_2 - 1)
    verdict(4, {
        "enumeration": (enum == 5.0, f"{enum}"),
        "return-prob formula": (formula == 5.0, f"{formula}"),
        "monte carlo": (abs(mc.mean - 5.0) <= 4 * se, f"{mc.mean:.4f} +- {se:.4f}"),
        "slope 2/pi": (rel <= 0.02, f"slope {slope:.5f}, rel dev {rel:.3%}"),
    })


def test_criterion_05_three_dim_green_constant():
    g = ll.green_constants(3)
    gap = abs(g.G - g.half_level_G)
    ns = [2**k for k in range(8, 15)]
    vals = [e.value for e in ll.expected_q_series(3, ns)]
    L, _ = ll.corrected_density(ns, vals)
    rel = abs(L / g.lam - 1)
    verdict(5, {
        "truncation levels": (gap <= 1e-4, f"|G(2^14) - G(2^13)| = {gap:.2e}, lambda_3 = {g.lam:.6f}"),
        "corrected E[Q_n]/n": (rel <= 0.01, f"fit {L:.5f}, rel dev {rel:.3%}"),
    })


def test_criterion_06_saw_counts_and_rate_at_one():
    c = ll.saw_counts(2, 12).counts
    curve = ll.rate_function(2, [1.0], list(range(1, 13)))
    stated = corrected = 0.0
    for p in curve.points:
        n = p.n
        stated = max(stated, abs(p.value - (-math.log(c[n - 1] / 4**n) / n)))
        # Q_n counts S_1..S_n only, so {Q_n = n} allows any first step
        c_prev = 1 if n == 1 else c[n - 2]
        corrected = max(corrected, abs(p.value - (-math.log(4 * c_prev / 4**n) / n)))
    verdict(6, {
        "c_1..c_4": (c[:4] == (4, 12, 36, 100), f"{c[:4]}"),
        "I_n(1) = -(1/n) log(c_n/4^n)": (stated <= 1e-12, f"max dev {stated:.3g}"),
        "I_n(1) = -(1/n) log(4 c_(n-1)/4^n) [informational]": (True, f"max dev {corrected:.2e}"),
    })


def test_criterion_07_wsaw_properties():
    u_grid = np.linspace(0.0, 2.0, 21)
    doubling_stated, doubling_reverse, concave = [], [], []
    for d, top in ((1, 16), (2, 12), (3, 8)):
        exact = {n: ll.exact_wsaw_values(d, n, u_grid) for n in range(1, top + 1)}
        for n in exact:
            if 2 * n in exact:
                doubling_stated.append(np.max(exact[2 * n] - exact[n]))
                doubling_reverse.append(np.max(exact[n] - exact[2 * n]))
            concave.append(np.max(ll.second_differences(exact[n])))
    worst_stated = max(doubling_stated)
    worst_reverse = max(doubling_reverse)
    worst_concave = max(concave)

    lam3 = ll.lambda_d(3)
    d3 = []
    for u in (1e-3, 1e-2):
        res = ll.wsaw_free_energy(3, u, pt.parse_ladder("64:4096"), samples=10**5, seed=7)
        d3 += [(lam3 * u - r.a_n) / r.sigma for r in res.rungs]
    u = 1e-3
    r2 = ll.wsaw_free_energy(2, u, [4096], samples=10**5, seed=7).rungs[0]
    ratio = r2.a_n / (u * math.log(1 / u)) / ll.LAMBDA_2
    verdict(7, {
        "a_2n <= a_n": (worst_stated <= 1e-12, f"max(a_2n - a_n) = {worst_stated:.3g}"),
        "a_2n >= a_n [informational]": (True, f"max(a_n - a_2n) = {worst_reverse:.2e}"),
        "concavity": (worst_concave <= 1e-12, f"max second difference {worst_concave:.2e}"),
        "d=3 lambda_3 u - a_n >= -3 sigma": (min(d3) >= -3, f"min z {min(d3):.2f}"),
        "d=2 factor 2": (0.5 <= ratio <= 2.0, f"a_n/(u log(1/u))/(2/pi) = {ratio:.3f}"),
    })


def test_criterion_08_ballot_identity():
    rows = bl.ballot_check(20)
    bad = [r for r in rows if not r.ok]
    verdict(8, {"n <= 20": (not bad, f"{len(rows)} cases, {len(bad)} mismatches")})


def test_criterion_09_bridge_series():
    p2 = bl.exact_bridge_probability(1, 2)
    p3 = bl.exact_bridge_probability(1, 3)
    s = bl.bridge_probability(2, [1024, 2048], method="mc", samples=10**7, seed=9)
    ratio = s.ratios()[0]
    err = s.ratio_stderr()[0]
    verdict(9, {
        "d=1 P(B_2)": (p2 == 0.25, f"{p2}"),
        "d=1 P(B_3)": (p3 == 0.125, f"{p3}"),
        "d=2 rung ratio": (0.85 <= ratio <= 1.15, f"{ratio:.4f} +- {err:.4f}"),
    })


LADDERS = [
    (cm.gaussian(), 0.7, 0.0),
    (cm.gaussian(), 1.0, 0.05),
    (cm.gaussian(), 0.5, 0.08),
    (cm.rademacher(), 1.0, 0.1),
    (cm.gaussian(), 0.0, 1.0),
]


def test_criterion_10_sandwich_and_critical_scan():
    checks = {}
    ladder = pt.parse_ladder("1:512")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ESSWarning)
        for law, delta, beta in LADDERS:
            r = pt.free_energy_ladder(law, delta, beta, 2, ladder, 20_000, seed=11)
            checks[f"{law.label} delta={delta} beta={beta}"] = (
                r.sandwich_ok(), f"F {r.F:.4f} sigma {r.sigma:.4f} f {r.f_delta:.4f}")
        scan = pt.critical_scan(cm.gaussian(), [0.25, 0.5, 1.0], 2, (64, 128), 20_000, seed=11)
    upper_ok = all(b.resolved and b.beta_hi <= b.delta**2 / 2 + b.width for b in scan.brackets)
    brackets = ", ".join(f"{b.delta}:[{b.beta_lo:.4f},{b.beta_hi:.4f}]" for b in scan.brackets)
    checks["scan upper ends"] = (upper_ok, brackets)
    checks["scan monotone"] = (scan.monotone(), "")
    verdict(10, checks)


def test_criterion_11_superadditivity():
    delta = 20.0
    beta = 1.5 * delta**2 / (4 * math.log(delta))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridResolutionWarning)
        rep = ss.check_superadditivity(cm.gaussian(), delta, beta, 200)
    where = f" at {rep.offending}" if rep.offending else ""
    verdict(11, {"L = 200": (rep.passed and rep.margin >= 0, f"min margin {rep.margin:.6f}{where}")})
