# main.py
import sys
import os
import argparse
import logging
from typing import List, Optional

# project root on sys.path so the flat packages import from anywhere
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__)))
sys.path.insert(0, project_root)

from config import settings
from config.experiment import ExperimentConfig
from core.errors import GmrfError
import utils.cli as console
from utils.cli import set_verbosity
from utils.logging_setup import setup_logging
from workflows import WORKFLOW_TYPES

logger = logging.getLogger("main")


def _add_common(parser: argparse.ArgumentParser):
    group = parser.add_argument_group('Output')
    group.add_argument('-v', '--verbosity', type=int, choices=[0, 1, 2, 3], default=1,
                       help='Output verbosity (0=quiet, 1=normal, 2=verbose, 3=debug)')
    group.add_argument('--log-file', type=str, default=settings.DEFAULT_LOG_FILE,
                       help='Also write logs to this rotating file')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='MCMC for Gaussian Markov random fields: single-site, chromatic and block Gibbs samplers',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter
    )
    sub = parser.add_subparsers(dest='command', required=True, metavar='{simulate,run,color,diagnose}')

    # simulate
    sim = sub.add_parser('simulate', help='Generate synthetic data sets',
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    data_group = sim.add_argument_group('Data')
    data_group.add_argument('--model', choices=['gaussian_image', 'binomial_logit'], default='gaussian_image',
                            help='Which data generator to use')
    data_group.add_argument('--p', type=int, default=50, help='Image side length')
    data_group.add_argument('--noise-sd', type=float, default=1.0, help='Standard deviation of the pixel noise')
    data_group.add_argument('--sites', type=int, default=100, help='Precincts in the synthetic planar graph')
    data_group.add_argument('--beta0', type=float, default=0.5, help='True intercept of the binomial model')
    data_group.add_argument('--tau2', type=float, default=1.0, help='True field scale of the binomial model')
    data_group.add_argument('--rho', type=float, default=settings.DEFAULT_RHO, help='Proper CAR dependence')
    data_group.add_argument('--mean-trials', type=float, default=200.0, help='Mean voters per precinct')
    data_group.add_argument('--missing-fraction', type=float, default=0.0, help='Share of unobserved precincts')
    data_group.add_argument('--seed', type=int, default=settings.DEFAULT_SEED,
                            help='Master seed; data use stream 2^32 of it')
    data_group.add_argument('--out', type=str, default=settings.DEFAULT_OUTPUT_DIR, help='Output directory')
    _add_common(sim)

    # run
    run = sub.add_parser('run', help='Run a sampler on a model and write chains and reports',
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    model_group = run.add_argument_group('Model')
    model_group.add_argument('--model', choices=['gaussian_image', 'binomial_logit'], help='Model to fit')
    model_group.add_argument('--p', type=int, help='Side length of the simulated image')
    model_group.add_argument('--graph', type=str, help='Edge-list file of the Markov graph')
    model_group.add_argument('--neighborhood', choices=['rook4', 'king8'], help='Lattice neighbourhood')
    model_group.add_argument('--observed', type=str, help='Observed image CSV (gaussian_image)')
    model_group.add_argument('--votes', type=str, help='Votes CSV node,Y,m (binomial_logit)')
    model_group.add_argument('--noise-sd', type=float, help='Noise sd of the simulated image')
    model_group.add_argument('--alpha', type=float, help='Shape and rate of the variance priors (image model)')
    model_group.add_argument('--rho', type=float, help='Proper CAR dependence (binomial model)')
    model_group.add_argument('--sites', type=int, help='Synthetic precincts when no votes file is given')
    model_group.add_argument('--beta0', type=float, dest='true_beta0', help='True intercept of the synthetic precincts')
    model_group.add_argument('--tau2', type=float, dest='true_tau2', help='True field scale of the synthetic precincts')
    model_group.add_argument('--mean-trials', type=float, help='Mean voters per synthetic precinct')
    model_group.add_argument('--missing-fraction', type=float, help='Share of unobserved synthetic precincts')

    sampler_group = run.add_argument_group('Sampler')
    sampler_group.add_argument('--sampler', choices=['single_site', 'chromatic', 'chromatic_parallel', 'block'],
                               help='Field update kernel')
    sampler_group.add_argument('--iterations', type=int, help='Gibbs scans per chain (default 10000)')
    sampler_group.add_argument('--burnin', type=int, help='Scans discarded from the start (default 8000)')
    sampler_group.add_argument('--thin', type=int, help='Keep every thin-th scan after burn-in')
    sampler_group.add_argument('--field-thin', type=int, help='Snapshot the field every n-th retained scan')
    sampler_group.add_argument('--chains', type=int, help='Independent chains from dispersed starts')
    sampler_group.add_argument('--seed', type=int,
                               help='Master seed; chain c uses stream c, simulated data stream 2^32')
    sampler_group.add_argument('--workers', type=int, help='Threads for chromatic_parallel')
    sampler_group.add_argument('--ordering', choices=['natural', 'rcm'], help='Fill-reducing ordering (block)')
    sampler_group.add_argument('--color-order', type=str,
                               help='Greedy colouring order: natural, degree-desc or random:<seed>')

    run_group = run.add_argument_group('Run')
    run_group.add_argument('--out', type=str, help='Output directory')
    run_group.add_argument('--from-metadata', type=str,
                           help='Start from the configuration in an earlier metadata.txt; flags override it')
    run_group.add_argument('--no-progress', action='store_true', help='Hide the progress bar')
    _add_common(run)

    # color
    color = sub.add_parser('color', help='Greedy-colour a graph', formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    graph_group = color.add_argument_group('Graph')
    source = graph_group.add_mutually_exclusive_group(required=True)
    source.add_argument('--graph', type=str, help='Edge-list file')
    source.add_argument('--lattice', type=str, help='Lattice as ROWSxCOLS')
    graph_group.add_argument('--neighborhood', choices=['rook4', 'king8'], default='king8', help='Lattice neighbourhood')
    graph_group.add_argument('--color-order', type=str, default='natural',
                             help='natural, degree-desc or random:<seed>')
    graph_group.add_argument('--out', type=str, default=settings.DEFAULT_OUTPUT_DIR, help='Output directory')
    _add_common(color)

    # diagnose
    diag = sub.add_parser('diagnose', help='ACF, IAT, ESS, CES and PSRF for chain CSV files',
                          formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    diag.add_argument('chains', nargs='+', help='Chain CSV files')
    diag_group = diag.add_argument_group('Diagnostics')
    diag_group.add_argument('--max-lag', type=int, default=50, help='Largest ACF lag reported')
    diag_group.add_argument('--cpu-seconds', type=float, help='CPU time T for CES (default: sum of the seconds column)')
    diag_group.add_argument('--sampler', type=str, help='Sampler label in the report (default: file name)')
    diag_group.add_argument('--out', type=str, help='Output directory (default: next to the first chain file)')
    _add_common(diag)

    return parser


_RUN_FIELDS = ('model', 'sampler', 'p', 'graph', 'neighborhood', 'observed', 'votes', 'noise_sd', 'iterations',
               'burnin', 'thin', 'field_thin', 'seed', 'alpha', 'rho', 'workers', 'ordering', 'color_order',
               'chains', 'sites', 'true_beta0', 'true_tau2', 'mean_trials', 'missing_fraction', 'out')


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Flags on top of the metadata file (if any) on top of the defaults."""
    values = {}
    if args.from_metadata:
        values = ExperimentConfig.from_metadata(args.from_metadata).model_dump()
    for name in _RUN_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    return ExperimentConfig.build(**values)


def _report_rows(reports):
    return [[r.sampler, r.parameter, r.cpu_seconds, r.ess, r.iat, r.ces] for r in reports]


def dispatch(args: argparse.Namespace) -> int:
    cli = console.cli
    workflow = WORKFLOW_TYPES[args.command]

    if args.command == 'simulate':
        cli.header("SIMULATE")
        summary, paths = workflow(
            out=args.out, p=args.p, noise_sd=args.noise_sd, seed=args.seed, model=args.model,
            sites=args.sites, beta0=args.beta0, tau2=args.tau2, rho=args.rho,
            mean_trials=args.mean_trials, missing_fraction=args.missing_fraction,
        )
        cli.display_run_summary("Data written", details=summary, outputs=paths)

    elif args.command == 'run':
        config = config_from_args(args)
        cli.header(f"RUN {config.model} / {config.sampler}")
        cli.verbose(config.to_metadata().strip())
        summary, paths = workflow(config, show_progress=not args.no_progress)
        reports = summary.pop("reports")
        if reports:
            cli.display_results_table(["sampler", "parameter", "cpu_seconds", "ess", "iat", "ces"],
                                      _report_rows(reports), title="Efficiency")
        cli.display_run_summary("Run complete", details=summary, outputs=paths)

    elif args.command == 'color':
        cli.header("COLOR")
        summary, paths = workflow(out=args.out, graph_file=args.graph, lattice=args.lattice,
                                  neighborhood=args.neighborhood, order=args.color_order)
        # k goes to stdout whatever the verbosity
        print(summary["k"])
        cli.display_run_summary("Colouring written", details=summary, outputs=paths)

    else:
        cli.header("DIAGNOSE")
        summary, paths = workflow(args.chains, out=args.out, max_lag=args.max_lag,
                                  cpu_seconds=args.cpu_seconds, sampler=args.sampler)
        reports = summary.pop("reports")
        if reports:
            cli.display_results_table(["sampler", "parameter", "cpu_seconds", "ess", "iat", "ces"],
                                      _report_rows(reports), title="Efficiency")
        cli.display_run_summary("Diagnostics written", details=summary, outputs=paths)

    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point. Returns 0 on success, 1 on a library or IO error; argparse exits
    with 2 on usage errors.
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    cli = set_verbosity(args.verbosity)
    setup_logging(log_level=logging.DEBUG if args.verbosity >= 3 else logging.INFO, log_file=args.log_file)

    try:
        return dispatch(args)
    except (GmrfError, OSError) as e:
        cli.error(f"{args.command} failed: {e}")
        if args.verbosity >= 3:
            import traceback
            traceback.print_exc()
        return 1
    except KeyboardInterrupt:
        cli.error("Interrupted")
        return 130


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)
