"""Command-line entry point.

Each subcommand wraps one part of the library and writes CSV with a
commented header of the resolved configuration.  Parameters come from
defaults, then an optional ``--config`` file, then the command line.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chain import (
    DEFAULT_LENGTH,
    LEAKAGE_TOL,
    METHODS,
    build_chain,
    default_grid,
    default_t_max,
    fit_exponent,
    run_chain,
)
from .errors import (
    BoundaryTouchError,
    ConfigError,
    InsufficientDataError,
    NumericalError,
    SpinAmpError,
)
from .fullspin import rwa_validate_1d, two_tone_validate_2d
from .io import format_value, header_lines, read_config, render_csv, write_text
from .lattice import build_rule_hamiltonian, reachable_states, tridiagonalize_from_seed
from .open_dynamics import (
    DephasingSpec,
    compare_lindblad_markov,
    default_dephased_t_max,
    markov_rates,
    run_lindblad,
    run_markov,
)
from .thermal import (
    DEFAULT_SIZE,
    DEFAULT_T_MAX,
    DEFAULT_THETA,
    ThermalSpec,
    boltzmann_up_fraction,
    detection_sweep,
    false_positive_sweep,
    run_trajectory,
    threshold_crossing,
    trial_rng,
)
from .young import MAX_N, level

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

# keys never taken from a config file
_RESERVED = {"command", "config", "func"}


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _resolved(args) -> dict:
    cfg = {"command": args.command}
    cfg.update({k: v for k, v in sorted(vars(args).items()) if k not in _RESERVED})
    return cfg


def _truncation_note(series) -> list[str]:
    if not series.contaminated:
        return []
    return [f"warning: guard leakage exceeded {LEAKAGE_TOL!r} at t = "
            f"{format_value(float(series.times[-1]))}; series truncated there"]


def _fit_lines(series) -> list[str]:
    fit = fit_exponent(series)
    _log(f"exponent {fit.exponent:.4f} +/- {fit.stderr:.2g} over t in "
         f"[{fit.window[0]:g}, {fit.window[1]:g}] ({fit.n_points} points)")
    return [f"exponent = {format_value(fit.exponent)}",
            f"exponent_stderr = {format_value(fit.stderr)}",
            f"fit_window = {format_value(fit.window[0])} {format_value(fit.window[1])}"]


def _time_grid(t_max, points):
    if not points >= 2:
        raise ConfigError(f"points must be >= 2, got {points!r}")
    if not (t_max > 0 and math.isfinite(t_max)):
        raise ConfigError(f"t_max must be positive and finite, got {t_max!r}")
    return default_grid(float(t_max), int(points))


# -- young ---------------------------------------------------------------------------

def cmd_young(args) -> int:
    if not 1 <= args.n_max <= MAX_N:
        raise ConfigError(f"n_max must lie in [1, {MAX_N}], got {args.n_max}")
    rows = []
    for n in range(1, args.n_max + 1):
        lv = level(n)
        s, f = lv.sum_sq(), math.factorial(n)
        check = "ok" if s == f else "FAIL"
        rows += [(n, str(lam), w, s, f, check) for lam, w in lv.entries.items()]
    text = render_csv(["n", "partition", "weight", "sum_sq", "n_factorial", "check"],
                      rows, _resolved(args))
    write_text(args.out, text)
    return EXIT_OK


# -- chain, lindblad, markov ----------------------------------------------------------

def _chain_from(args):
    length = args.length if args.length is not None else DEFAULT_LENGTH[args.dim]
    args.length = length
    return build_chain(args.dim, length, args.omega)


def cmd_chain(args) -> int:
    spec = _chain_from(args)
    if args.t_max is None:
        args.t_max = default_t_max(args.dim, spec.length, args.omega)
    grid = _time_grid(args.t_max, args.points)
    series = run_chain(spec, grid, tol=args.tol, method=args.method,
                       stop_when_contaminated=not args.keep_contaminated)
    trailer = _truncation_note(series)
    if args.fit:
        trailer += _fit_lines(series)
    rows = zip(series.times, series.mean_n, series.leakage)
    write_text(args.out, render_csv(["t", "mean_n", "leakage"], rows, _resolved(args), trailer))
    return EXIT_OK


def _dephasing_from(args):
    spec = DephasingSpec(_chain_from(args), args.gamma)
    if args.t_max is None:
        args.t_max = default_dephased_t_max(spec)
    return spec, _time_grid(args.t_max, args.points)


def cmd_lindblad(args) -> int:
    spec, grid = _dephasing_from(args)
    series = run_lindblad(spec, grid, tol=args.tol,
                          stop_when_contaminated=not args.keep_contaminated)
    trailer = _truncation_note(series)
    if args.fit:
        trailer += _fit_lines(series)
    if args.compare_markov:
        l1 = compare_lindblad_markov(spec, series.times, tol=args.tol)
        _log(f"max L1 distance to the Markov limit: {l1:.3g}")
        trailer.append(f"markov_max_l1 = {format_value(l1)}")
    rows = zip(series.times, series.mean_n, series.leakage, series.trace_err)
    write_text(args.out, render_csv(["t", "mean_n", "leakage", "trace_err"], rows,
                                    _resolved(args), trailer))
    return EXIT_OK


def cmd_markov(args) -> int:
    spec, grid = _dephasing_from(args)
    series = run_markov(markov_rates(spec), grid)
    if not args.keep_contaminated and series.contaminated:
        k = int(np.argmin(series.certified)) + 1
        series = type(series)(series.times[:k], series.mean_n[:k], series.leakage[:k])
    trailer = _truncation_note(series)
    if args.fit:
        trailer += _fit_lines(series)
    rows = zip(series.times, series.mean_n, series.leakage)
    write_text(args.out, render_csv(["t", "mean_n", "leakage"], rows, _resolved(args), trailer))
    return EXIT_OK


# -- oracle ------------------------------------------------------------------------------

def cmd_oracle(args) -> int:
    height = args.height if args.height is not None else args.grid
    args.height = height
    mode = args.mode
    if mode in ("couplings", "basis"):
        omega = 1.0 if args.omega is None else args.omega
        args.omega = omega
        max_n = args.max_n if args.max_n is not None else min(args.grid, height) - 1
        args.max_n = max_n
        basis = reachable_states(args.grid, height, max_n, corner_up=not args.corner_down)
        if mode == "basis":
            text = "\n".join(header_lines(_resolved(args))) + "\n" + basis.dump()
            write_text(args.out, text)
            return EXIT_OK
        alphas, betas = tridiagonalize_from_seed(build_rule_hamiltonian(basis, omega))
        # betas[k] couples |k + 1> and |k + 2>, expected Omega sqrt(k + 2)
        n = np.arange(2, betas.size + 2)
        expect = omega * np.sqrt(n)
        err = np.abs(betas - expect)
        rows = zip(n, betas, expect, err)
        trailer = [f"max_abs_err = {format_value(float(err.max(initial=0.0)))}",
                   f"max_abs_alpha = {format_value(float(np.abs(alphas).max(initial=0.0)))}"]
        write_text(args.out, render_csv(["n", "beta", "omega_sqrt_n", "abs_err"], rows,
                                        _resolved(args), trailer))
        return EXIT_OK

    omega = (0.02 if mode == "rwa" else 0.05) * args.J if args.omega is None else args.omega
    args.omega = omega
    if args.t_max is None:
        args.t_max = 20.0 / omega if omega > 0 else 1.0
    grid = _time_grid(args.t_max, args.points)
    if mode == "rwa":
        s = rwa_validate_1d(args.spins, args.J, omega, grid)
        trailer = [f"max_leakage = {format_value(float(s.leakage.max()))}",
                   f"mean_leakage = {format_value(s.time_average())}"]
        write_text(args.out, render_csv(["t", "leakage"], zip(s.times, s.leakage),
                                        _resolved(args), trailer))
        return EXIT_OK
    r = two_tone_validate_2d(args.grid, height, args.J, omega, grid,
                             corner_up=not args.corner_down)
    trailer = [f"max_leakage = {format_value(float(r.leakage.max()))}",
               f"max_rule_l1 = {format_value(float(r.rule_l1.max()))}",
               f"max_up_population = {format_value(float(r.up_population.max()))}"]
    rows = zip(r.times, r.leakage, r.rule_l1, r.up_population)
    write_text(args.out, render_csv(["t", "leakage", "rule_l1", "up_population"], rows,
                                    _resolved(args), trailer))
    return EXIT_OK


# -- thermal -----------------------------------------------------------------------------

def parse_sweep(text: str) -> np.ndarray:
    """``start:stop:step`` with both ends included."""
    try:
        a, b, h = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"sweep must read start:stop:step, got {text!r}") from None
    if not (h > 0 and b >= a):
        raise ConfigError(f"sweep needs step > 0 and stop >= start, got {text!r}")
    n = int(math.floor((b - a) / h + 1e-9)) + 1
    return np.round(a + h * np.arange(n), 12)


def cmd_thermal(args) -> int:
    width = args.width if args.width is not None else args.size
    height = args.height if args.height is not None else args.size
    args.width, args.height = width, height
    if args.frequency is not None or args.temperature is not None:
        if args.frequency is None or args.temperature is None:
            raise ConfigError("frequency and temperature must be given together")
        if args.sweep is not None or args.p is not None:
            raise ConfigError("give either p, sweep or frequency/temperature")
        args.p = boltzmann_up_fraction(args.frequency, args.temperature)
        _log(f"thermal up fraction p = {args.p:.6g}")
    if args.sweep is not None and args.p is not None:
        raise ConfigError("give either p or sweep, not both")
    template = ThermalSpec(width=width, height=height, t_max=args.t_max,
                           rng_seed=args.seed, theta=args.theta)

    if args.trajectory:
        spec = template.replace(p_up=args.p or 0.0, test_up=args.detect)
        r = run_trajectory(spec, trial_rng(args.seed, args.trial), stop_on_trigger=False)
        trailer = [f"triggered = {format_value(r.triggered)}",
                   f"truncated = {format_value(r.truncated)}",
                   f"trigger_time = {format_value(r.trigger_time)}"]
        write_text(args.out, render_csv(["t", "up_count"], zip(r.times, r.up_counts),
                                        _resolved(args), trailer))
        return EXIT_OK

    if args.sweep is not None:
        ps = parse_sweep(args.sweep)
    elif args.p is not None:
        ps = np.array([args.p])
    else:
        raise ConfigError("thermal needs p, sweep or frequency/temperature")
    sweep = detection_sweep if args.detect else false_positive_sweep
    res = sweep(ps, args.trials, template, workers=args.workers)
    trailer = []
    if not args.detect and ps.size > 1:
        cross = threshold_crossing(res.p_values, res.rates)
        trailer.append(f"half_trigger_p = {format_value(cross)}")
    columns = ["p", "trials", "triggered", "rate", "ci_low", "ci_high", "truncated_count"]
    write_text(args.out, render_csv(columns, res.rows(), _resolved(args), trailer))
    return EXIT_OK


# -- figure2 ------------------------------------------------------------------------------

def figure2_curves(omega=1.0, gamma=1.0, length_1d=None, length_2d=None,
                   dephased_length=256, points=400, tol=1e-9, dephased_tol=1e-8):
    """Coherent and dephased polarisation series in one and two dimensions.

    Returns ``{(dim, kind): (series, length, gamma)}`` with ``kind`` one of
    ``"coherent"`` and ``"dephased"``.
    """
    lengths = {1: length_1d or DEFAULT_LENGTH[1], 2: length_2d or DEFAULT_LENGTH[2]}
    out = {}
    for dim in (1, 2):
        chain = build_chain(dim, lengths[dim], omega)
        grid = default_grid(default_t_max(dim, chain.length, omega), points)
        out[dim, "coherent"] = (run_chain(chain, grid, tol=tol, stop_when_contaminated=True),
                                chain.length, 0.0)
        spec = DephasingSpec(build_chain(dim, dephased_length, omega), gamma)
        grid = default_grid(default_dephased_t_max(spec), points)
        out[dim, "dephased"] = (run_lindblad(spec, grid, tol=dephased_tol,
                                             stop_when_contaminated=True),
                                dephased_length, gamma)
    return out


def cmd_figure2(args) -> int:
    outdir = Path(args.out if args.out not in (None, "-") else "figure2")
    args.out = str(outdir)
    curves = figure2_curves(args.omega, args.gamma, args.length_1d, args.length_2d,
                            args.dephased_length, args.points, args.tol, args.dephased_tol)
    cfg = _resolved(args)
    summary = []
    for (dim, kind), (series, length, gamma) in curves.items():
        name = f"{dim}d_{kind}"
        columns = ["t", "mean_n", "leakage"]
        data = [series.times, series.mean_n, series.leakage]
        if kind == "dephased":
            columns.append("trace_err")
            data.append(series.trace_err)
        try:
            fit = fit_exponent(series)
            exp_row = (fit.exponent, fit.stderr, fit.window[0], fit.window[1])
        except InsufficientDataError as exc:
            _log(f"{name}: {exc}")
            exp_row = (math.nan,) * 4
        expected = dim if kind == "coherent" or gamma == 0 else dim / 2
        summary.append((name, dim, gamma, length) + exp_row + (expected,))
        write_text(outdir / f"{name}.csv",
                   render_csv(columns, zip(*data), {**cfg, "curve": name, "length": length},
                              _truncation_note(series)))
        _log(f"{name}: exponent {exp_row[0]:.4f} (expected {expected:g})")
    write_text(outdir / "exponents.csv",
               render_csv(["curve", "dimension", "gamma", "length", "exponent", "stderr",
                           "fit_lo", "fit_hi", "expected"], summary, cfg))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--out", default="-",
                        help="output file (figure2: directory); '-' for stdout")
    common.add_argument("--config", help="flat 'key = value' file of parameters")

    parser = argparse.ArgumentParser(prog="spinamp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"spinamp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("young", parents=[common], help="Young's lattice levels and weights")
    p.add_argument("--n-max", type=int, default=6)
    p.set_defaults(func=cmd_young)

    def chain_args(p, length_help, gamma=None):
        p.add_argument("--dim", type=int, choices=(1, 2, 3), default=1)
        p.add_argument("--length", type=_positive_int, default=None, help=length_help)
        p.add_argument("--omega", type=float, default=1.0)
        if gamma is not None:
            p.add_argument("--gamma", type=float, default=gamma)
        p.add_argument("--t-max", type=float, default=None)
        p.add_argument("--points", type=int, default=400)
        p.add_argument("--fit", action="store_true", help="fit the power-law exponent")
        p.add_argument("--keep-contaminated", action="store_true",
                       help="do not stop at the first guard breach")

    p = sub.add_parser("chain", parents=[common], help="coherent effective-chain dynamics")
    chain_args(p, "chain length (default per dimension)")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--method", choices=METHODS, default="chebyshev")
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("lindblad", parents=[common], help="dephased chain, full density matrix")
    chain_args(p, "chain length (at most 512)", gamma=1.0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--compare-markov", action="store_true")
    p.set_defaults(func=cmd_lindblad)

    p = sub.add_parser("markov", parents=[common], help="heavy-dephasing rate equation")
    chain_args(p, "chain length (default per dimension)", gamma=1.0)
    p.set_defaults(func=cmd_markov)

    p = sub.add_parser("oracle", parents=[common], help="explicit-lattice checks")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--validate-couplings", dest="mode", action="store_const",
                      const="couplings", help="Lanczos couplings of the rule Hamiltonian")
    mode.add_argument("--dump-basis", dest="mode", action="store_const", const="basis")
    mode.add_argument("--rwa", dest="mode", action="store_const", const="rwa",
                      help="1D full-spin leakage out of the domain-wall states")
    mode.add_argument("--two-tone", dest="mode", action="store_const", const="two-tone",
                      help="2D full-spin two-tone run against the rule engine")
    p.add_argument("--grid", type=_positive_int, default=12, help="grid width")
    p.add_argument("--height", type=_positive_int, default=None)
    p.add_argument("--max-n", type=int, default=None)
    p.add_argument("--corner-down", action="store_true")
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--spins", type=int, default=8)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--points", type=int, default=400)
    p.set_defaults(func=cmd_oracle, mode="couplings")

    p = sub.add_parser("thermal", parents=[common], help="Gillespie sweeps of the flip rules")
    p.add_argument("--size", type=int, default=DEFAULT_SIZE)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--theta", type=float, default=DEFAULT_THETA,
                   help="trigger when this fraction of the lattice is up")
    p.add_argument("--t-max", type=float, default=DEFAULT_T_MAX)
    p.add_argument("--trials", type=int, default=400)
    p.add_argument("--p", type=float, default=None, help="single up fraction")
    p.add_argument("--sweep", default=None, help="start:stop:step, ends included")
    p.add_argument("--frequency", type=float, default=None, help="spin frequency in Hz")
    p.add_argument("--temperature", type=float, default=None, help="temperature in K")
    p.add_argument("--detect", action="store_true", help="test spin up")
    p.add_argument("--trajectory", action="store_true", help="dump one trajectory")
    p.add_argument("--trial", type=int, default=0, help="trial index for --trajectory")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_thermal)

    p = sub.add_parser("figure2", parents=[common],
                       help="polarisation against time, coherent and dephased")
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--length-1d", type=_positive_int, default=DEFAULT_LENGTH[1])
    p.add_argument("--length-2d", type=_positive_int, default=DEFAULT_LENGTH[2])
    p.add_argument("--dephased-length", type=_positive_int, default=256)
    p.add_argument("--points", type=int, default=400)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--dephased-tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_figure2)
    return parser


def _convert(action: argparse.Action, raw: str):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        low = raw.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"{action.dest} expects a boolean, got {raw!r}")
        return low in ("true", "1", "yes")
    if isinstance(action, argparse._StoreConstAction):
        return raw
    if raw.lower() in ("", "none") and action.default is None:
        return None
    value = action.type(raw) if action.type else raw
    if action.choices is not None and value not in action.choices:
        raise ConfigError(f"{action.dest} must be one of {list(action.choices)}, got {raw!r}")
    return value


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    sub = _subparser(parser, args.command)
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help",)}
    defaults = {}
    for key, raw in read_config(args.config).items():
        dest = key.replace("-", "_")
        if dest in _RESERVED or dest not in actions:
            raise ConfigError(f"unknown key {key!r} for '{args.command}'")
        try:
            defaults[dest] = _convert(actions[dest], raw)
        except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key!r}: {raw!r}") from None
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return args.func(args)
    except (ConfigError, BoundaryTouchError) as exc:
        _log(f"error: {exc}")
        return EXIT_CONFIG
    except (NumericalError, InsufficientDataError) as exc:
        _log(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    except SpinAmpError as exc:  # pragma: no cover - every subclass is handled above
        _log(f"error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
