"""Command line interface of hspr"""
import argparse
import logging
import sys

from . import __version__
from .config import PRESETS, load_config
from .exceptions import HsprError
from .pipeline import (
    STUDY_KINDS,
    run_evaluate,
    run_render,
    run_retrieve,
    run_simulate,
    run_spectra,
    run_study,
)

logger = logging.getLogger(__name__)


def _common(parser):
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument(
        "--out", required=True, help="Directory for the outputs"
    )
    parser.add_argument(
        "--preset", choices=sorted(PRESETS), help="Named parameter set"
    )
    parser.add_argument("--seed", type=int, help="Overrides the seed")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hspr",
        description="Hyperspectral phase retrieval from self-reference "
        "interferograms",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="Log debug messages"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser(
        "simulate", help="Simulate a phantom and its interferograms"
    )
    _common(simulate)

    spectra = commands.add_parser(
        "spectra", help="Estimate spectral amplitudes from a stack"
    )
    spectra.add_argument("stack", help="Interferogram stack cube file")
    _common(spectra)

    retrieve = commands.add_parser(
        "retrieve", help="Retrieve the object cube from spectral amplitudes"
    )
    retrieve.add_argument("spectra", help="Spectral amplitude cube file")
    retrieve.add_argument("--truth", help="True object cube, enables RRMSE")
    _common(retrieve)

    render = commands.add_parser(
        "render", help="Render cube slices as PGM images and CSV lines"
    )
    render.add_argument("cube", help="Cube file")
    _common(render)

    evaluate = commands.add_parser(
        "evaluate", help="Phase RRMSE of an object cube against the truth"
    )
    evaluate.add_argument("estimate", help="Retrieved object cube file")
    evaluate.add_argument("truth", help="True object cube file")
    _common(evaluate)

    study = commands.add_parser("study", help="Sweep the noise level")
    study.add_argument("kind", choices=STUDY_KINDS, help="What to study")
    _common(study)
    return parser


def run(args):
    """Dispatch parsed arguments to the pipeline stage"""
    overrides = {} if args.seed is None else {"seed": args.seed}
    config = load_config(args.config, args.preset, overrides)
    if args.command == "simulate":
        run_simulate(config, args.out)
    elif args.command == "spectra":
        run_spectra(args.stack, config, args.out)
    elif args.command == "retrieve":
        run_retrieve(args.spectra, config, args.out, args.truth)
    elif args.command == "render":
        run_render(args.cube, config, args.out)
    elif args.command == "evaluate":
        _, mean = run_evaluate(args.estimate, args.truth, config, args.out)
        print(f"mean_rrmse={mean:.6f}")
    else:
        run_study(config, args.out, args.kind)


def main(argv=None):
    """Entry point, returns the exit status"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="[%(asctime)s %(levelname)s] %(name)s: %(message)s",
    )
    try:
        run(args)
    except (HsprError, OSError) as exc:
        logger.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
