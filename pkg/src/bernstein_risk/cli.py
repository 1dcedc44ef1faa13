"""Command-line interface.

Subcommands
-----------
validate-alpha  check a lattice grid (built-in family or CSV) is a copula
var-tvar        VaR / TVaR table over the configured orders and levels
allocate        VaR / TVaR and the TVaR-based allocation per risk
rho-curve       Spearman's rho under the two Frechet-bound lattices

Exit codes: 0 success, 1 model or validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import sys
import warnings
from dataclasses import replace

from .aggregate import AggregateModel, BracketError
from .alpha import make_alpha, read_alpha_csv, validate_alpha
from .bernstein import IllConditionedWarning, InvalidAlphaError, beta_coeffs, gamma_coeffs
from .config import ConfigError, RunConfig, load_config, parse_list
from .counts import TruncationError, total_count_pmf
from .measures import ADDITIVITY_RTOL, risk_report, spearman_rho
from .mixing import GammaMixing, make_mixing
from .montecarlo import THREADS_ENV, check_theta_sampler, default_workers, empirical_measures, sample_batch

EXIT_OK, EXIT_MODEL, EXIT_USAGE = 0, 1, 2
FLAG_BOUND = 1e-6
RHO_ORDERS = tuple(range(1, 16))
RHO_SHAPES = (1.0, 5.0, 10.0)


class ModelFailure(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _key_value(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {key!r} is not a number") from None


def build_parser():
    parser = _Parser(prog="bernstein-risk", description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file with [alpha], [mixing], [run] sections")
    common.add_argument("--alpha", help="built-in alpha family")
    common.add_argument("--alpha-param", action="append", type=_key_value, default=[],
                        metavar="KEY=VALUE", help="alpha family parameter (repeatable)")
    common.add_argument("--alpha-csv", help="lattice CSV replacing --alpha")
    common.add_argument("--m", help="Bernstein order(s), comma separated")
    common.add_argument("--n", type=int, help="number of risks")
    common.add_argument("--mixing", choices=["gamma_mixing", "gamma_claims"])
    common.add_argument("--a", type=float, help="mixing shape")
    common.add_argument("--b", type=float, help="gamma_mixing rate")
    common.add_argument("--lambda", dest="lam", type=float, help="gamma_claims rate")
    common.add_argument("--kappa", help="level(s), comma separated")
    common.add_argument("--eps-tail", type=float)
    common.add_argument("--mc-paths", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="write CSV here instead of stdout")
    common.add_argument("--threads", type=int,
                        help=f"worker threads (default ${THREADS_ENV} or 1)")

    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate-alpha", parents=[common], help="check the alpha grid")
    p = sub.add_parser("var-tvar", parents=[common], help="VaR and TVaR table")
    p.add_argument("--mc-check", action="store_true", help="add Monte Carlo columns")
    p.add_argument("--mc-method", choices=["spacings", "beta"], default="spacings")
    p = sub.add_parser("allocate", parents=[common], help="TVaR-based allocation table")
    p.add_argument("--mc-check", action="store_true", help="add Monte Carlo columns")
    p.add_argument("--mc-method", choices=["spacings", "beta"], default="spacings")
    p = sub.add_parser("rho-curve", parents=[common], help="Spearman's rho bounds over m")
    p.add_argument("--shapes", help="gamma_mixing shapes a, comma separated (default 1,5,10)")
    return parser


def resolve_config(args):
    config = load_config(args.config) if args.config else RunConfig()
    changes = {
        "alpha": args.alpha,
        "alpha_csv": args.alpha_csv,
        "n": args.n,
        "mixing": args.mixing,
        "eps_tail": args.eps_tail,
        "mc_paths": args.mc_paths,
        "seed": args.seed,
        "out": args.out,
    }
    if args.alpha is not None and args.alpha_csv is None:
        config = replace(config, alpha_csv=None)
    if args.m is not None:
        changes["m"] = tuple(parse_list(args.m, int))
    if args.kappa is not None:
        changes["kappa"] = tuple(parse_list(args.kappa))
    if args.alpha_param:
        changes["alpha_params"] = {**config.alpha_params, **dict(args.alpha_param)}
    mixing_params = dict(config.mixing_params)
    if args.mixing is not None and args.mixing != config.mixing:
        mixing_params = {}
    for key, value in (("a", args.a), ("b", args.b), ("lambda", args.lam)):
        if value is not None:
            mixing_params[key] = value
    changes["mixing_params"] = mixing_params
    return config.with_overrides(**changes)


def _grid(config, m):
    if config.alpha_csv:
        return read_alpha_csv(config.alpha_csv)
    return make_alpha(config.alpha, config.alpha_params, m=m, n=config.n)


def _mixing(config):
    try:
        return make_mixing(config.mixing, **config.mixing_params)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"mixing parameters: {exc}") from None


def _orders(config):
    return (None,) if config.alpha_csv else config.m


def _fmt(value):
    return repr(float(value))


def cmd_validate_alpha(config, args, out):
    failed = False
    for m in _orders(config):
        grid = _grid(config, m)
        report = validate_alpha(grid)
        if report.is_valid:
            print(f"m={grid.m} n={grid.n}: valid", file=out)
        else:
            failed = True
            for line in report.lines():
                print(f"m={grid.m} n={grid.n}: {line}", file=out)
    return EXIT_MODEL if failed else EXIT_OK


def _model(config, m):
    grid = _grid(config, m)
    report = validate_alpha(grid)
    if not report.is_valid:
        raise ModelFailure("invalid alpha: " + "; ".join(report.lines()))
    gamma = gamma_coeffs(grid)
    counts = total_count_pmf(gamma, eps_tail=config.eps_tail)
    return grid, gamma, AggregateModel(_mixing(config), counts)


def _check_sampler(mixing, config):
    if mixing.name == "gamma_claims":
        z = check_theta_sampler(mixing, seed=config.seed)
        if z > 3:
            raise ModelFailure(f"Theta sampler fails its Laplace-transform check (z={z:.2f})")


def _tabulate(config, args, out, allocate):
    workers = args.threads if args.threads is not None else default_workers()
    header = None
    writer = csv.writer(out, lineterminator="\n")
    for m in _orders(config):
        grid, gamma, model = _model(config, m)
        if args.mc_check:
            _check_sampler(model.mixing, config)
            batch = sample_batch(gamma, model.mixing, config.mc_paths, config.seed,
                                 workers=workers, method=args.mc_method)
        for kappa in config.kappa:
            report = risk_report(model, gamma if allocate else None, kappa)
            if allocate and report.additivity_gap() > ADDITIVITY_RTOL:
                raise ModelFailure(
                    f"allocation not additive at m={grid.m}, kappa={kappa}: "
                    f"relative gap {report.additivity_gap():.2e}"
                )
            cols = ["m", "kappa", "var", "tvar"]
            row = [str(grid.m), _fmt(kappa), _fmt(report.var), _fmt(report.tvar)]
            if allocate:
                cols += [f"contrib_{i + 1}" for i in range(grid.n)]
                row += [_fmt(c) for c in report.contributions]
            cols += ["truncation_bound", "flagged"]
            row += [_fmt(report.truncation_bound), str(int(report.truncation_bound > FLAG_BOUND))]
            if args.mc_check:
                emp = empirical_measures(batch, kappa)
                cols += ["mc_var", "mc_var_se", "mc_tvar", "mc_tvar_se"]
                row += [_fmt(emp.var), _fmt(emp.stderr["var"]), _fmt(emp.tvar), _fmt(emp.stderr["tvar"])]
                if allocate:
                    for i in range(grid.n):
                        cols += [f"mc_contrib_{i + 1}", f"mc_contrib_{i + 1}_se"]
                        row += [_fmt(emp.contributions[i]), _fmt(emp.stderr["contributions"][i])]
            if header is None:
                header = cols
                writer.writerow(header)
            writer.writerow(row)
    return EXIT_OK


def cmd_var_tvar(config, args, out):
    return _tabulate(config, args, out, allocate=False)


def cmd_allocate(config, args, out):
    return _tabulate(config, args, out, allocate=True)


def cmd_rho_curve(config, args, out):
    if config.n != 2:
        raise ConfigError("rho-curve needs n = 2")
    shapes = parse_list(args.shapes) if args.shapes else RHO_SHAPES
    orders = config.m if args.m is not None or args.config else RHO_ORDERS
    b = config.mixing_params.get("b", 1.0) if config.mixing == "gamma_mixing" else 1.0
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["m", "a", "rho_lower", "rho_upper"])
    with warnings.catch_warnings():
        # m <= 15 keeps the exponential-basis sums within ~1e-7
        warnings.simplefilter("ignore", IllConditionedWarning)
        for a in shapes:
            mixing = GammaMixing(a, b)
            for m in orders:
                lower = spearman_rho(beta_coeffs(make_alpha("counter_comonotonic", m=m)), mixing)
                upper = spearman_rho(beta_coeffs(make_alpha("comonotonic", m=m)), mixing)
                writer.writerow([str(m), _fmt(a), _fmt(lower), _fmt(upper)])
    return EXIT_OK


COMMANDS = {
    "validate-alpha": cmd_validate_alpha,
    "var-tvar": cmd_var_tvar,
    "allocate": cmd_allocate,
    "rho-curve": cmd_rho_curve,
}


@contextlib.contextmanager
def _destination(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as handle:
            yield handle


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = resolve_config(args)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        with _destination(config.out) as out:
            return COMMANDS[args.command](config, args, out)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelFailure, InvalidAlphaError, TruncationError, BracketError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
