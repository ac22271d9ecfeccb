"""
Command-line front end for kglab

Usage:
  kglab instance list
  kglab instance show 2
  kglab bounds --instance 1 --t-grid geometric:100:1e9:40 --outputs out/
  kglab figure --instance 1 --kind pe --rounds 10000 --reps 1000 --seed 42
"""

import argparse
import logging
import multiprocessing
import sys
from typing import *

import kglab
from kglab import ConfigError, ExperimentConfig, FigureKind

LOG = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """Parser whose usage errors exit with the validation code instead of 2"""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _add_experiment_args(parser: argparse.ArgumentParser, simulated: bool = True) -> None:
    parser.add_argument("--config", help="JSON config file, flags given here override it")
    parser.add_argument("--instance", help="Catalog id (1-5) or path to an instance JSON file")
    parser.add_argument("--outputs", help="Directory output files go in")
    if simulated:
        parser.add_argument("--rounds", type=int, help="Horizon n")
        parser.add_argument("--n0", type=int, help="Initial pulls per arm")
        parser.add_argument("--reps", type=int, dest="replications", help="Monte Carlo replications")
        parser.add_argument("--seed", type=int, help="Root seed")
        parser.add_argument(
            "--checkpoints",
            help="Checkpoint grid, geometric:<start>:<stop>:<points> or list:a,b,c",
        )


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="kglab", description="Knowledge Gradient best-arm identification lab")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    instance_parser = subparsers.add_parser("instance", help="Inspect the instance catalog")
    instance_sub = instance_parser.add_subparsers(dest="action", required=True, parser_class=_ArgumentParser)
    instance_sub.add_parser("list", help="List catalog instances")
    show_parser = instance_sub.add_parser("show", help="Show one instance and its constants")
    show_parser.add_argument("instance", help="Catalog id or path to an instance JSON file")

    simulate_parser = subparsers.add_parser("simulate", help="Run KG replications, write measure CSVs")
    _add_experiment_args(simulate_parser)
    simulate_parser.add_argument("--rule-of-three", action="store_true", help="Add the 3/reps PE band")

    bounds_parser = subparsers.add_parser("bounds", help="Evaluate the analytical bounds on a t grid")
    _add_experiment_args(bounds_parser, simulated=False)
    bounds_parser.add_argument(
        "--t-grid", dest="t_grid", help="geometric:<start>:<stop>:<points> or list:a,b,c"
    )

    figure_parser = subparsers.add_parser("figure", help="Write one figure as CSV + SVG")
    _add_experiment_args(figure_parser)
    figure_parser.add_argument("--kind", choices=[x.value for x in FigureKind])
    figure_parser.add_argument("--arms", help="Comma-separated 1-based arms for sampling-rate figures")
    figure_parser.add_argument("--t-grid", dest="t_grid", help="Grid for bounds-only figures")
    figure_parser.add_argument("--rule-of-three", action="store_true", help="Add the 3/reps PE band")

    asym_parser = subparsers.add_parser("asymptotics", help="Print limiting allocations and rates")
    asym_parser.add_argument("--instance", required=True, help="Catalog id or path to an instance JSON file")
    asym_parser.add_argument("--rounds", type=int, help="Also print fixed-rate bounds for this horizon")
    asym_parser.add_argument("--alpha0", help="Guaranteed sampling rate for fixed-rate bounds, e.g. 1/10")

    conc_parser = subparsers.add_parser("concentration", help="Check the sample mean tail bound empirically")
    conc_parser.add_argument("--sigma", type=float, required=True)
    conc_parser.add_argument("--m", type=int, required=True, help="Samples per mean")
    conc_parser.add_argument("--eps", type=float, required=True)
    conc_parser.add_argument("--reps", type=int, default=100_000)
    conc_parser.add_argument("--seed", type=int, default=0)
    return parser


def _parse_arms(raw: Optional[str]) -> Optional[List[int]]:
    if raw is None:
        return None
    try:
        return [int(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--arms must be comma-separated integers, got {raw!r}") from None


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    file_values = kglab.load_config_file(args.config) if args.config else None
    overrides = {key: getattr(args, key, None) for key in kglab.CONFIG_KEYS if key != "arms"}
    overrides["arms"] = _parse_arms(getattr(args, "arms", None))
    return ExperimentConfig.from_sources(file_values, overrides)


def _print_instance(inst: kglab.BanditInstance) -> None:
    consts = inst.constants
    print(f"{inst.label or 'instance'}: k={inst.k}")
    print("means: " + " ".join(kglab.format_float(x) for x in inst.means))
    print("stds:  " + " ".join(kglab.format_float(x) for x in inst.stds))
    for key, val in consts.describe().items():
        if key == "best":
            val += 1
        print(f"{key}: {val if isinstance(val, int) else kglab.format_float(val)}")


def _cmd_instance(args: argparse.Namespace) -> None:
    if args.action == "list":
        for instance_id in kglab.catalog_ids():
            inst = kglab.catalog(instance_id)
            print(f"{instance_id}\tk={inst.k}\t{kglab.catalog_description(instance_id)}")
    else:
        _print_instance(kglab.resolve_instance(args.instance))


def _cmd_simulate(args: argparse.Namespace) -> None:
    config = _experiment_config(args)
    series, bounds = kglab.simulate_with_bounds(config)
    for path in kglab.write_simulation(config, series, bounds, rule_of_three=args.rule_of_three):
        print(path)


def _cmd_bounds(args: argparse.Namespace) -> None:
    config = _experiment_config(args)
    for path in kglab.write_bounds(config):
        print(path)


def _cmd_figure(args: argparse.Namespace) -> None:
    config = _experiment_config(args)
    for path in kglab.write_figure(config, rule_of_three=args.rule_of_three):
        print(path)


def _cmd_asymptotics(args: argparse.Namespace) -> None:
    inst = kglab.resolve_instance(args.instance)
    consts = inst.constants
    profile = kglab.asymptotic_profile(consts)
    fmt = kglab.format_float
    print(f"{inst.label or 'instance'}: k={inst.k}, best arm {consts.best + 1}")
    for arm in range(inst.k):
        ratio = "1" if arm == consts.best else fmt(profile.ratio(arm))
        print(f"arm {arm + 1}\tratio_to_best={ratio}\talpha_limit={fmt(profile.alpha_limits[arm])}")
    print(f"cr_rate: {fmt(profile.cr_rate)}")
    print(f"pe_upper_rate: {fmt(profile.pe_upper_rate)}")
    print(f"pe_lower_rate: {fmt(profile.pe_lower_rate)}")
    if args.rounds is not None:
        alpha0 = args.alpha0 if args.alpha0 is not None else f"1/{inst.k}"
        pe = kglab.fixed_rate_pe_bounds(consts, args.rounds, alpha0)
        sr = kglab.fixed_rate_sr_bounds(consts, args.rounds, alpha0)
        print(f"fixed_rate n={args.rounds} alpha0={alpha0} min_pulls={pe.min_pulls}")
        print(f"  log_pe_lower: {fmt(pe.lower.log_magnitude)}  log_pe_upper: {fmt(pe.upper.log_magnitude)}")
        print(f"  log_sr_lower: {fmt(sr.lower.log_magnitude)}  log_sr_upper: {fmt(sr.upper.log_magnitude)}")
    elif args.alpha0 is not None:
        raise ConfigError("--alpha0 needs --rounds")


def _cmd_concentration(args: argparse.Namespace) -> None:
    check = kglab.concentration_check(args.sigma, args.m, args.eps, args.reps, args.seed)
    fmt = kglab.format_float
    print(f"empirical: {fmt(check.empirical_prob)} (stderr {fmt(check.stderr)})")
    print(f"bound:     {fmt(check.bound)}")
    print(f"exact:     {fmt(kglab.gaussian_tail_prob(args.sigma, args.m, args.eps))}")
    print(f"contained: {'yes' if check.contained() else 'no'}")


_COMMANDS: Dict[str, Callable[[argparse.Namespace], None]] = {
    "instance": _cmd_instance,
    "simulate": _cmd_simulate,
    "bounds": _cmd_bounds,
    "figure": _cmd_figure,
    "asymptotics": _cmd_asymptotics,
    "concentration": _cmd_concentration,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else EXIT_OK

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        _COMMANDS[args.command](args)
    except OSError as e:
        LOG.debug("I/O failure", exc_info=True)
        print(f"kglab: {e.filename or ''}: {e.strerror or e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, IndexError) as e:
        LOG.debug("Validation failure", exc_info=True)
        print(f"kglab: {e}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    multiprocessing.freeze_support()
    sys.exit(cli_main())
