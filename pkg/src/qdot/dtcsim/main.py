"""Command line entry point of dtcsim"""

import argparse
import logging
import sys
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

from ._presets import describe_presets, get_preset
from .common import (
    FORMATS,
    ConfigError,
    LineMap,
    RunConfig,
    apply_overrides,
    validate_run_config,
    yaml_load,
)
from .hilbert import PropagatorError
from .oracle import run_verification_suite
from .results import (
    ResultBundle,
    diagram_bundle,
    make_provenance,
    purity_figure,
    purity_frame,
    trace_figure,
    trace_frame,
    write_bundle,
)
from .spinmodel import ProtocolError
from .sweep import (
    EnsembleTrace,
    MissingCellsError,
    apply_parameter,
    run_sweep,
    run_trajectory_ensemble,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
DEFAULT_PROTOCOL_PRESET = "fig9"


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _run_options() -> argparse.ArgumentParser:
    options = argparse.ArgumentParser(add_help=False)
    source = options.add_mutually_exclusive_group()
    source.add_argument("--config", type=str, help="yaml config of the run")
    source.add_argument("--preset", type=str, help="named built-in config")
    options.add_argument(
        "--grid", type=str, help="AxB grid points for start/stop/num axes"
    )
    options.add_argument(
        "--realizations", type=_positive, help="disorder realizations"
    )
    options.add_argument("--seed", type=int, help="master seed")
    options.add_argument(
        "--workers",
        type=_non_negative,
        default=1,
        help="worker processes, 0 for one per cpu",
    )
    options.add_argument(
        "--out",
        type=str,
        help="output directory, default from DTCSIM_OUTPUT_DIR",
    )
    options.add_argument("--format", choices=FORMATS, help="files to write")
    options.add_argument("--d", help="Activate debug mode", action="store_true")
    return options


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse arguments for command line tool

    Args:
        argv (list, optional): arguments, defaults to sys.argv[1:]

    Returns:
        argparse.NameSpace: the arguments parsed
    """
    parser = argparse.ArgumentParser(
        prog="dtcsim",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        description="Simulate discrete time crystals in short spin chains",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    options = _run_options()
    helps = {
        "sweep": "phase diagram of a time-averaged observable",
        "trace": "disorder-averaged spin trajectory",
        "protocol": "axis-switching protocol against a control run",
        "purity": "Bloch-averaged end-spin purity map",
        "verify": "brute-force consistency checks",
    }
    for name, text in helps.items():
        commands.add_parser(
            name,
            parents=[options],
            help=text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
    presets = commands.add_parser("presets", help="list built-in configs")
    presets.add_argument("--d", help="Activate debug mode", action="store_true")
    args = parser.parse_args(argv)
    if args.d:
        logging.basicConfig(
            level="DEBUG", format="%(name)s - %(levelname)s - %(message)s"
        )
    return args


def load_document(args: argparse.Namespace) -> Tuple[dict, LineMap]:
    """Read the config named on the command line and apply overrides

    verify runs the default suite and protocol the axis-switching preset
    when neither --config nor --preset is given.

    Args:
        args (argparse.Namespace): parsed arguments

    Returns:
        tuple: (document, LineMap)
    """
    lines = LineMap()
    if args.preset is not None:
        try:
            document = get_preset(args.preset)
        except KeyError as err:
            raise ConfigError(err.args[0], "preset") from err
    elif args.config is not None:
        document, lines = yaml_load(args.config)
    elif args.command == "verify":
        document = {"kind": "verify"}
    elif args.command == "protocol":
        document = get_preset(DEFAULT_PROTOCOL_PRESET)
    else:
        raise ConfigError(f"{args.command} needs --config or --preset")
    document.setdefault("kind", args.command)
    if document["kind"] != args.command:
        raise ConfigError(
            f"config of kind {document['kind']!r} given to {args.command}",
            "kind",
            lines.line("kind"),
        )
    document = apply_overrides(
        document,
        grid=args.grid,
        realizations=args.realizations,
        seed=args.seed,
        out=args.out,
        fmt=args.format,
    )
    return document, lines


def run_diagram(config: RunConfig, workers: Optional[int]) -> Tuple[ResultBundle, int]:
    """Phase diagram for sweep and purity runs"""
    logger = logging.getLogger(__name__ + ".run_diagram")
    diagram = run_sweep(config.plan, workers=workers)
    bundle = diagram_bundle(diagram, config.output.name, config.document)
    if diagram.failures:
        logger.error("%s", MissingCellsError(diagram.failures))
        print(
            f"{len(diagram.missing_cells)} cells missing:",
            file=sys.stderr,
        )
        for failure in diagram.failures:
            print(f"  {failure}", file=sys.stderr)
        return bundle, EXIT_NUMERICAL
    return bundle, EXIT_OK


def _ensemble(config: RunConfig, chain, protocol, initial, workers) -> EnsembleTrace:
    request = config.trace or config.protocol_run.trace
    return run_trajectory_ensemble(
        config.model,
        chain,
        protocol,
        initial,
        request.n_periods,
        request.sampling,
        request.realizations,
        request.master_seed,
        workers,
    )


def run_trace(config: RunConfig, workers: Optional[int]) -> Tuple[ResultBundle, int]:
    """Disorder-averaged trajectory"""
    trace = _ensemble(
        config, config.chain, config.protocol, config.initial, workers
    )
    name = config.output.name
    return (
        ResultBundle(
            name=name,
            tables={"trace": trace_frame(trace)},
            figures={"trace": trace_figure(trace, name)},
            provenance=make_provenance(
                config.document,
                trace.master_seed,
                realizations=trace.realizations,
            ),
        ),
        EXIT_OK,
    )


def run_protocol_comparison(
    config: RunConfig, workers: Optional[int]
) -> Tuple[ResultBundle, int]:
    """Protocol run, coupling-free control and chain-length scan"""
    logger = logging.getLogger(__name__ + ".run_protocol_comparison")
    request = config.protocol_run
    main_trace = _ensemble(
        config, config.chain, config.protocol, config.initial, workers
    )
    traces: Dict[str, EnsembleTrace] = {
        f"j_mean_{config.chain.j_mean:.4g}": main_trace,
        f"control_j_mean_{request.control_j_mean:.4g}": _ensemble(
            config,
            replace(config.chain, j_mean=request.control_j_mean),
            config.protocol,
            config.initial,
            workers,
        ),
    }
    for n_sites in request.n_sites_scan:
        logger.info("Scanning chain length %s", n_sites)
        chain, protocol, initial = apply_parameter(
            config.chain, config.protocol, config.initial, "n_sites", n_sites
        )
        traces[f"n_sites_{n_sites}"] = _ensemble(
            config, chain, protocol, initial, workers
        )
    purity = purity_frame(traces)
    name = config.output.name
    return (
        ResultBundle(
            name=name,
            tables={"purity": purity, "trace": trace_frame(main_trace)},
            figures={
                "purity": purity_figure(purity, name),
                "trace": trace_figure(main_trace, name),
            },
            provenance=make_provenance(
                config.document,
                request.trace.master_seed,
                runs=list(traces),
            ),
        ),
        EXIT_OK,
    )


def run_verify(config: RunConfig) -> int:
    """Print every check of the verification suite"""
    results = run_verification_suite(config.verify_seed)
    for result in results:
        print(result)
    failed = [result.name for result in results if not result.passed]
    if failed:
        print(f"{len(failed)} checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    print(f"All {len(results)} checks passed")
    return EXIT_OK


def list_presets() -> int:
    for name, kind, description in describe_presets():
        print(f"{name:<8} {kind:<9} {description}")
    return EXIT_OK


RUNNERS = {
    "sweep": run_diagram,
    "purity": run_diagram,
    "trace": run_trace,
    "protocol": run_protocol_comparison,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main function to be called

    Args:
        argv (list, optional): arguments, defaults to sys.argv[1:]

    Returns:
        int: 0 on success, 1 on failed checks, 2 on config errors and
            3 on numerical failures
    """
    logger = logging.getLogger(__name__ + ".main")
    args = parse_args(argv)
    if args.command == "presets":
        return list_presets()
    try:
        document, lines = load_document(args)
        config = validate_run_config(document, lines)
    except ConfigError as err:
        print(err, file=sys.stderr)
        return EXIT_CONFIG
    if config.kind == "verify":
        return run_verify(config)
    workers = args.workers if args.workers > 0 else None
    try:
        bundle, status = RUNNERS[config.kind](config, workers)
    except (PropagatorError, MissingCellsError) as err:
        logger.error("Numerical failure: %s", err)
        print(f"Numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ProtocolError) as err:
        print(err, file=sys.stderr)
        return EXIT_CONFIG
    for path in write_bundle(bundle, config.output):
        print(path)
    return status


if __name__ == "__main__":
    sys.exit(main())
