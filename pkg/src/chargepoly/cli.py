"""Command-line front end.

Every command writes one JSON line holding the package version, the full
validated configuration and the result, or a CSV table with ``--csv``.
Output goes to ``--out``; when that is absent and ``CHARGEPOLY_OUT`` is set,
to ``$CHARGEPOLY_OUT/<command>.jsonl`` (or ``.csv``); otherwise to stdout.

Exit codes: 0 success, 1 a ``check`` suite ran and reported a violation,
2 validation error, 3 budget or effective-sample-size failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import shlex
import sys
import warnings
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import bridge_lab as bl
from . import charge_model as cm
from . import ldp_lab as ll
from . import partition as pt
from . import single_site as ss
from .errors import AcceptanceTooLow, BudgetExceeded, ESSWarning

OUT_ENV = "CHARGEPOLY_OUT"

EXIT_OK, EXIT_VIOLATION, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2, 3


class ValidationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------


def float_grid(text: str) -> list[float]:
    """``a:b:step`` (inclusive) or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("grid must be a:b:step or a comma list")
        a, b, h = map(float, parts)
        if h <= 0 or b < a:
            raise argparse.ArgumentTypeError("grid needs step > 0 and b >= a")
        k = int(math.floor((b - a) / h + 1e-9))
        return [round(a + i * h, 12) for i in range(k + 1)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def ladder(text: str) -> list[int]:
    try:
        return pt.parse_ladder(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def law_spec(text: str) -> str:
    try:
        cm.from_config(text)
    except (ValueError, KeyError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def count(text: str) -> int:
    """Positive integer; accepts ``1e5`` style."""
    v = float(text)
    if v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(v)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    pass


def _common(p: argparse.ArgumentParser, mc: bool = True) -> None:
    g = p.add_argument_group("output")
    g.add_argument("--out", help="output file path (appended to); default stdout or $%s" % OUT_ENV)
    g.add_argument("--csv", action="store_true", help="emit a CSV table instead of a JSON line")
    g.add_argument("--config", help="key = value file mirroring these flags; explicit flags win")
    if mc:
        g = p.add_argument_group("sampling")
        g.add_argument("--samples", type=count, default=10**5, help="Monte Carlo samples (count)")
        g.add_argument("--seed", type=int, default=None, help="root seed; required for Monte Carlo work")
        g.add_argument("--shards", type=count, default=1, help="independent random streams (count)")


def _law(p, default="gaussian"):
    p.add_argument("--law", type=law_spec, default=default,
                   help="charge law: rademacher, gaussian, uniform or three_point:N")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="chargepoly", description="Annealed charged polymer toolkit.",
                                  formatter_class=_Formatter)
    top.add_argument("--version", action="version", version=f"chargepoly {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    def add(name, help_, mc=True):
        p = sub.add_parser(name, help=help_, description=help_, formatter_class=_Formatter)
        _common(p, mc)
        return p

    p = add("single-site", "table of g*(l) and g(l) for l = 1..lmax")
    _law(p)
    p.add_argument("--delta", type=float, required=True, help="charge bias (dimensionless)")
    p.add_argument("--beta", type=float, required=True, help="inverse temperature (dimensionless)")
    p.add_argument("--lmax", type=count, default=100, help="largest local time (visits)")
    p.add_argument("--mode", choices=ss.MODES, default=None, help="evaluation mode; default picks by law")

    p = add("partition", "log Z*_n for one (law, delta, beta, d, n)")
    _law(p)
    p.add_argument("--delta", type=float, required=True, help="charge bias")
    p.add_argument("--beta", type=float, required=True, help="inverse temperature")
    p.add_argument("--d", type=count, default=2, help="lattice dimension")
    p.add_argument("--n", type=count, required=True, help="walk length (steps)")
    p.add_argument("--method", choices=["auto", "exact", "double-enum", "mc"], default="auto",
                   help="exact histogram, double enumeration over charges, or Monte Carlo")

    p = add("free-energy", "a_n = (1/n) log Z*_n along a ladder, extrapolated")
    _law(p)
    p.add_argument("--delta", type=float, required=True, help="charge bias")
    p.add_argument("--beta", type=float, required=True, help="inverse temperature")
    p.add_argument("--d", type=count, default=2, help="lattice dimension")
    p.add_argument("--ladder", type=ladder, default=ladder("1:256"),
                   help="lengths: a:b doubles from a to b, or a comma list")

    p = add("critical-curve", "bisection brackets for beta_c(delta), or the asymptotic prediction")
    _law(p)
    p.add_argument("--deltas", type=float_grid, default=[0.25, 0.5, 1.0], help="charge biases (grid)")
    p.add_argument("--d", type=count, default=2, help="lattice dimension")
    p.add_argument("--ns", type=int_list, default=[64, 128], help="two probe lengths (steps)")
    p.add_argument("--tol", type=float, default=None, help="bracket width; default 0.02 delta^2")
    p.add_argument("--regime", choices=["small", "large"], default=None,
                   help="print the asymptotic prediction instead of scanning")

    p = add("silt", "self-intersection local time: expected-q, distribution, tail or green")
    p.add_argument("op", choices=["expected-q", "distribution", "tail", "green"], help="quantity")
    p.add_argument("--d", type=count, default=2, help="lattice dimension")
    p.add_argument("--n", type=count, default=None, help="walk length (steps)")
    p.add_argument("--ladder", type=ladder, default=None, help="lengths for an expected-q series")
    p.add_argument("--t", type=float, default=1.5, help="tail threshold: P(Q_n <= t n)")
    p.add_argument("--method", choices=["exact", "mc", "tilted_mc"], default="exact", help="estimator")
    p.add_argument("--eps", type=float, default=1e-4, help="green: truncation tolerance")
    p.add_argument("--strip-m", type=count, default=None, help="tail: block length (steps) of the strip bound")

    p = add("wsaw", "weakly self-avoiding walk free energy bounds")
    p.add_argument("--d", type=count, default=2, help="lattice dimension")
    p.add_argument("--u", type=float, required=True, help="self-repulsion strength per collision")
    p.add_argument("--ladder", type=ladder, default=ladder("64:1024"), help="lengths (a:b doubling)")

    p = add("rate-function", "empirical rate function of P(Q_n <= t n)")
    p.add_argument("--d", type=count, default=2, help="lattice dimension")
    p.add_argument("--t-grid", type=float_grid, default=[1.0, 1.25, 1.5], help="thresholds (Q per step)")
    p.add_argument("--ladder", type=ladder, default=ladder("2:8"), help="lengths (a:b doubling)")
    p.add_argument("--method", choices=["exact", "mc", "tilted_mc"], default="exact", help="estimator")
    p.add_argument("--strip-m", type=count, default=None, help="block length (steps) of the strip bound")

    p = add("saw-count", "exact self-avoiding walk counts c_1..c_n", mc=False)
    p.add_argument("--d", type=count, default=2, help="lattice dimension")
    p.add_argument("--n-max", type=count, default=12, help="largest length (steps)")

    p = add("bridge", "bridge probability, ballot identity and bridge-conditioned local time")
    p.add_argument("op", choices=["probability", "ballot", "conditional-q", "silt-tail"], help="quantity")
    p.add_argument("--d", type=count, default=2, help="lattice dimension")
    p.add_argument("--ladder", type=ladder, default=ladder("2:64"), help="lengths (a:b doubling)")
    p.add_argument("--method", choices=["auto", "exact", "mc"], default="auto", help="probability estimator")
    p.add_argument("--n-max", type=count, default=20, help="ballot: largest length (steps)")
    p.add_argument("--eps", type=float, default=0.25, help="silt-tail: relative slack")
    p.add_argument("--tol", type=float, default=0.05, help="conditional-q: relative flag tolerance")

    p = add("range-probe", "trimmed range large-deviation probe")
    p.add_argument("--d", type=count, default=2, help="lattice dimension")
    p.add_argument("--n", type=count, required=True, help="walk length (steps)")
    p.add_argument("--s-grid", type=float_grid, default=[0.5], help="range fractions")
    p.add_argument("--A", type=count, default=None, help="trim threshold (visits)")
    p.add_argument("--theta", type=float, default=None, help="exponent for the threshold scale")

    p = add("check", "run a named bound suite", mc=False)
    p.add_argument("suite", choices=["symmetric-unit-bound", "superadditivity", "small-delta",
                                     "gdb-smallbeta", "density-envelope", "large-delta-envelope"],
                   help="suite name")
    _law(p)
    p.add_argument("--delta-grid", type=float_grid, default=None, help="symmetric-unit-bound: biases")
    p.add_argument("--delta", type=float, default=None, help="charge bias")
    p.add_argument("--beta", type=float, default=None, help="inverse temperature")
    p.add_argument("--eta", type=float, default=0.1, help="relative slack")
    p.add_argument("--lmax", type=count, default=1000, help="largest local time (visits)")
    return top


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------


def read_config(path: str) -> list[str]:
    """``key = value`` lines to flags; ``#`` starts a comment; ``key = true``
    for switches."""
    tokens: list[str] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        flag = "--" + key.replace("_", "-")
        if value.lower() == "true":
            tokens.append(flag)
        elif value.lower() != "false":
            tokens += [flag, *shlex.split(value)]
    return tokens


def _expand_config(argv: list[str]) -> list[str]:
    for i, tok in enumerate(argv):
        if tok == "--config" or tok.startswith("--config="):
            if "=" in tok:
                path, rest = tok.split("=", 1)[1], argv[i + 1:]
            else:
                if i + 1 >= len(argv):
                    raise ValidationError("--config needs a path")
                path, rest = argv[i + 1], argv[i + 2:]
            head = argv[:i]
            if not head:
                raise ValidationError("--config must follow the command name")
            # the command and any positional come first so file flags attach to the subparser
            return head + read_config(path) + rest
    return argv


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------


def _plain(obj):
    if hasattr(obj, "to_json"):
        return json.loads(obj.to_json())
    if dataclasses.is_dataclass(obj):
        d = {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        for name in ("ok", "n_times_p"):
            if hasattr(obj, name) and name not in d:
                d[name] = _plain(getattr(obj, name))
        return d
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _csv_text(obj) -> str:
    if hasattr(obj, "to_csv"):
        return obj.to_csv()
    rows = _plain(obj)
    if isinstance(rows, dict):
        cols = {k: v for k, v in rows.items()
                if isinstance(v, list) and v and not isinstance(v[0], (dict, list))}
        lengths = {len(v) for v in cols.values()}
        if len(lengths) == 1:
            # parallel arrays become columns; scalars repeat on every row
            scalars = {k: v for k, v in rows.items() if not isinstance(v, (dict, list))}
            rows = [{**scalars, **{k: v[i] for k, v in cols.items()}} for i in range(lengths.pop())]
        else:
            rows = [rows]
    rows = [{k: v for k, v in r.items() if not isinstance(v, (dict, list))} for r in rows]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else [], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _emit(args, config: dict, result) -> None:
    if args.csv:
        text = _csv_text(result)
        suffix = ".csv"
    else:
        text = json.dumps({"version": __version__, "config": config, "result": _plain(result)},
                          sort_keys=True, allow_nan=True) + "\n"
        suffix = ".jsonl"
    target = args.out
    if target is None and os.environ.get(OUT_ENV):
        target = str(Path(os.environ[OUT_ENV]) / f"{args.command}{suffix}")
    if target is None:
        sys.stdout.write(text)
        return
    Path(target).parent.mkdir(parents=True, exist_ok=True)
    with open(target, "a") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# handlers
# ---------------------------------------------------------------------------


def _need_seed(args) -> None:
    if args.seed is None:
        raise ValidationError("--seed is required for Monte Carlo work")


def _law_of(args):
    return cm.from_config(args.law)


def _single_site(args):
    law = _law_of(args)
    rng = None
    if args.mode == "mc":
        _need_seed(args)
        rng = np.random.default_rng(args.seed)
    return ss.build_table(law, args.delta, args.beta, args.lmax, mode=args.mode, samples=args.samples, rng=rng)


def _partition(args):
    law = _law_of(args)
    if args.method == "exact":
        return pt.z_exact(law, args.delta, args.beta, args.d, args.n, shards=args.shards)
    if args.method == "double-enum":
        return pt.z_double_enum(law, args.delta, args.beta, args.d, args.n)
    _need_seed(args)
    if args.method == "mc":
        return pt.z_mc(law, args.delta, args.beta, args.d, args.n, args.samples, args.seed, args.shards)
    return pt.partition_estimate(law, args.delta, args.beta, args.d, args.n, args.samples, args.seed, args.shards)


def _free_energy(args):
    _need_seed(args)
    return pt.free_energy_ladder(_law_of(args), args.delta, args.beta, args.d, args.ladder, args.samples,
                                 args.seed, args.shards)


def _critical_curve(args):
    law = _law_of(args)
    if args.regime is not None:
        return [dict(delta=dl, **pt.beta_c_asymptote(law, dl, args.regime, args.d)) for dl in args.deltas]
    _need_seed(args)
    if len(args.ns) != 2:
        raise ValidationError("--ns needs exactly two lengths")
    return pt.critical_scan(law, args.deltas, args.d, tuple(args.ns), args.samples, args.seed,
                            tol=args.tol, shards=args.shards)


def _silt(args):
    if args.op == "green":
        return ll.green_constants(args.d, eps=args.eps)
    if args.op == "expected-q":
        if args.ladder is not None:
            return ll.expected_q_series(args.d, args.ladder)
        if args.n is None:
            raise ValidationError("expected-q needs --n or --ladder")
        return ll.expected_q(args.d, args.n)
    if args.n is None:
        raise ValidationError(f"{args.op} needs --n")
    if args.method != "exact":
        _need_seed(args)
    if args.op == "distribution":
        if args.method == "tilted_mc":
            raise ValidationError("distribution supports exact or mc")
        return ll.q_distribution(args.d, args.n, args.method, args.samples, args.seed, args.shards)
    return ll.tail_probability(args.d, args.n, args.t, args.method, args.samples, args.seed, args.shards,
                               strip_m=args.strip_m)


def _wsaw(args):
    _need_seed(args)
    return ll.wsaw_free_energy(args.d, args.u, args.ladder, args.samples, args.seed, args.shards)


def _rate_function(args):
    if args.method != "exact":
        _need_seed(args)
    return ll.rate_function(args.d, args.t_grid, args.ladder, args.method, args.samples, args.seed, args.shards,
                            strip_m=args.strip_m)


def _saw_count(args):
    return ll.saw_counts(args.d, args.n_max)


def _bridge(args):
    if args.op == "ballot":
        return bl.ballot_check(args.n_max)
    if args.op == "probability":
        if args.method != "exact":
            needs_mc = args.method == "mc" or max(args.ladder) > bl.EXACT_MAX_N
            if needs_mc:
                _need_seed(args)
        return bl.bridge_probability(args.d, args.ladder, args.method, args.samples, args.seed, args.shards)
    _need_seed(args)
    if args.op == "conditional-q":
        return bl.conditional_q_bridge(args.d, args.ladder, args.samples, args.seed, args.shards, tol=args.tol)
    return bl.bridge_silt_tail(args.d, args.ladder, args.eps, args.samples, args.seed, args.shards)


def _range_probe(args):
    _need_seed(args)
    return ll.range_ld_probe(args.d, args.n, args.s_grid, args.A, args.theta, args.samples, args.seed, args.shards)


def _check(args):
    law = _law_of(args)

    def need(*names):
        for name in names:
            if getattr(args, name) is None:
                raise ValidationError(f"suite {args.suite} needs --{name.replace('_', '-')}")

    if args.suite == "symmetric-unit-bound":
        need("delta_grid")
        return ss.check_symmetric_unit_bound(law, args.delta_grid, args.lmax)
    if args.suite == "superadditivity":
        need("delta", "beta")
        return ss.check_superadditivity(law, args.delta, args.beta, args.lmax)
    if args.suite == "small-delta":
        need("delta")
        return ss.check_small_delta_regimes(law, args.delta, args.eta, L=args.lmax)
    if args.suite == "gdb-smallbeta":
        need("delta", "beta")
        return ss.check_gdb_smallbeta(law, args.delta, args.beta, args.eta, L=args.lmax)
    if args.suite == "density-envelope":
        return ss.density_envelope_check(law, list(range(1, args.lmax + 1)))
    need("delta")
    return ss.check_large_delta_envelope(law, args.delta, args.eta, list(range(1, args.lmax + 1)), beta=args.beta)


HANDLERS = {
    "single-site": _single_site, "partition": _partition, "free-energy": _free_energy,
    "critical-curve": _critical_curve, "silt": _silt, "wsaw": _wsaw, "rate-function": _rate_function,
    "saw-count": _saw_count, "bridge": _bridge, "range-probe": _range_probe, "check": _check,
}


def _config_echo(args) -> dict:
    skip = {"out", "csv", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def dispatch(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
    except (ValidationError, OSError) as exc:
        print(f"chargepoly: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "shards", 1) < 1:
        print("chargepoly: error: --shards must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ESSWarning)
            result = HANDLERS[args.command](args)
    except (BudgetExceeded, AcceptanceTooLow, ArithmeticError) as exc:
        print(f"chargepoly: budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValidationError, ValueError) as exc:
        print(f"chargepoly: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _emit(args, _config_echo(args), result)
    ess_failed = any(issubclass(w.category, ESSWarning) for w in caught) and args.command == "partition"
    for w in caught:
        print(f"chargepoly: warning: {w.message}", file=sys.stderr)
    if ess_failed:
        return EXIT_BUDGET
    if args.command == "check" and not result.passed:
        return EXIT_VIOLATION
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch())
