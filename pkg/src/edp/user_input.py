"""Parse command line arguments provided by user.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""

import argparse
from argparse import Namespace
from pathlib import Path
from typing import Sequence, Union

from edp import __version__
from edp.classifiers import ALGORITHMS, ALIASES
from edp.config import POLICIES
from edp.errors import ArtifactIOError, ConfigError

COMMANDS = (
    "generate", "cluster", "train", "evaluate", "bench", "simulate", "compare",
    "report",
)


class UserInput:
    """Store information provided by user via the command line.

    `command` names the subcommand; `options` keeps every other flag under
    its argparse destination name.
    """

    def __init__(
        self,
        command: Union[None, str] = None,
        config: Union[None, Path] = None,
        mec_config: Union[None, Path] = None,
        out_dir: Union[None, Path] = None,
        seed: Union[None, int] = None,
        verbosity: str = "INFO",
        argv: Union[None, list[str]] = None,
        options: Union[None, dict] = None,
    ):
        self.command = command
        self.config = config
        self.mec_config = mec_config
        self.out_dir = out_dir
        self.seed = seed
        self.verbosity = verbosity
        self.argv = argv or []
        self.options = options or {}

    def __getattr__(self, name):
        options = self.__dict__.get("options", {})
        if name in options:
            return options[name]
        raise AttributeError(name)


def _add_common_arguments(parser: argparse.ArgumentParser) -> dict:
    """Help/Required/Optional groups shared by every subcommand."""
    helper = parser.add_argument_group("Help")
    required = parser.add_argument_group("Required")
    optional = parser.add_argument_group("Optional")
    helper.add_argument(
        "-h", "--help", action="help", help="Show this help message and exit."
    )
    optional.add_argument(
        "--config",
        help="TOML file with [simulation] and [mec] tables.\nDefault: built-in defaults.",
    )
    optional.add_argument(
        "--seed", type=int, help="Seed of the run.\nDefault: `seed` of the config."
    )
    optional.add_argument(
        "-o",
        "--out-dir",
        help="Folder of every output file.\nDefault: current working directory.",
    )
    optional.add_argument(
        "-q", "--quiet", action="store_true", help="Only log warnings and errors."
    )
    optional.add_argument(
        "--verbose", action="store_true", help="Log debug messages."
    )
    return {"required": required, "optional": optional}


def _subparser(subparsers, name: str, description: str) -> dict:
    parser = subparsers.add_parser(
        name,
        add_help=False,
        formatter_class=argparse.RawTextHelpFormatter,
        description=description,
        help=description,
    )
    return _add_common_arguments(parser)


def make_parser() -> argparse.ArgumentParser:
    """Build the edgeplanner argument parser."""
    # Create parser.
    parser = argparse.ArgumentParser(
        add_help=False,
        prog="edgeplanner",
        formatter_class=argparse.RawTextHelpFormatter,
        description=(
            "Generate mobile service-usage traces, find dense user areas,\n"
            "train service predictors and simulate MEC offloading."
        ),
    )
    helper = parser.add_argument_group("Help")
    helper.add_argument(
        "-h", "--help", action="help", help="Show this help message and exit."
    )
    helper.add_argument(
        "-v",
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
        help="Show program's version number and exit",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    # ================== #
    # generate           #
    # ================== #
    groups = _subparser(
        subparsers, "generate", "Generate topology, trace, sessions and IoT readings."
    )
    groups["optional"].add_argument(
        "--service-seed", type=int, help="Seed of the sessions.\nDefault: --seed."
    )
    groups["optional"].add_argument("--num-ues", type=int, help="Number of UEs.")
    groups["optional"].add_argument(
        "--duration", type=int, help="Simulated time in seconds."
    )
    # ================== #
    # cluster            #
    # ================== #
    groups = _subparser(
        subparsers, "cluster", "Find dense areas and label the trace with them."
    )
    groups["required"].add_argument("--trace", required=True, help="Trace CSV.")
    _add_dbscan_arguments(groups["optional"])
    groups["optional"].add_argument(
        "--out", default="zones.json", help="Zones file.\nDefault: `zones.json`."
    )
    groups["optional"].add_argument(
        "--labeled-out",
        default="trace_labeled.csv",
        help="Zone labeled trace.\nDefault: `trace_labeled.csv`.",
    )
    # ================== #
    # train              #
    # ================== #
    groups = _subparser(subparsers, "train", "Train a service classifier.")
    groups["required"].add_argument("--trace", required=True, help="Trace CSV.")
    groups["optional"].add_argument(
        "--algo",
        default="knn",
        help=f"Algorithm. Options: {', '.join(ALIASES)}.\nDefault: `knn`.",
    )
    groups["optional"].add_argument("--k", type=int, help="Neighbours of KNN.")
    groups["optional"].add_argument(
        "--zones", help="Zones file used to label the trace before training."
    )
    groups["optional"].add_argument(
        "--include-ue-id", action="store_true", help="Use ue_id as a feature."
    )
    groups["optional"].add_argument(
        "--bundle",
        action="store_true",
        help=(
            "Cluster the trace and write a deployable predictor bundle\n"
            "instead of a bare model."
        ),
    )
    _add_dbscan_arguments(groups["optional"])
    groups["optional"].add_argument(
        "--share-cap", type=int, default=10, help="Seats of a shared instance.\nDefault: 10."
    )
    groups["optional"].add_argument(
        "--prewarm-ttl",
        type=float,
        default=300.0,
        help="Lifetime in seconds of an unattached shared instance.\nDefault: 300.",
    )
    groups["optional"].add_argument(
        "--out", default="model.json", help="Output file.\nDefault: `model.json`."
    )
    # ================== #
    # evaluate           #
    # ================== #
    groups = _subparser(subparsers, "evaluate", "Evaluate a saved model on a trace.")
    groups["required"].add_argument(
        "--model", required=True, help="Model file or predictor bundle."
    )
    groups["required"].add_argument("--trace", required=True, help="Trace CSV.")
    groups["optional"].add_argument("--zones", help="Zones file to label the trace.")
    groups["optional"].add_argument(
        "--out", default="evaluation.json", help="Default: `evaluation.json`."
    )
    # ================== #
    # bench              #
    # ================== #
    groups = _subparser(subparsers, "bench", "Benchmark the classifiers.")
    groups["required"].add_argument("--trace", required=True, help="Trace CSV.")
    groups["optional"].add_argument(
        "--algos",
        nargs="+",
        default=list(ALGORITHMS),
        help=f"Algorithms.\nDefault: {' '.join(ALGORITHMS)}.",
    )
    groups["optional"].add_argument(
        "--reps", type=int, default=5, help="Repetitions.\nDefault: 5."
    )
    groups["optional"].add_argument(
        "--folds", type=int, default=10, help="Cross-validation folds.\nDefault: 10."
    )
    groups["optional"].add_argument("--zones", help="Zones file to label the trace.")
    groups["optional"].add_argument(
        "--include-ue-id", action="store_true", help="Use ue_id as a feature."
    )
    groups["optional"].add_argument(
        "--out", default="bench.csv", help="Benchmark CSV.\nDefault: `bench.csv`."
    )
    # ================== #
    # simulate           #
    # ================== #
    groups = _subparser(subparsers, "simulate", "Run the MEC simulation.")
    groups["required"].add_argument("--trace", required=True, help="Trace CSV.")
    groups["required"].add_argument("--sessions", required=True, help="Sessions CSV.")
    groups["required"].add_argument("--topology", required=True, help="Topology JSON.")
    _add_mec_arguments(groups["optional"])
    groups["optional"].add_argument(
        "--predictor", help="Predictor bundle, or a model file used with --zones."
    )
    groups["optional"].add_argument("--zones", help="Zones file for a bare model.")
    groups["optional"].add_argument(
        "--until",
        type=float,
        help="End of the horizon in seconds.\nDefault: time of the last trace record.",
    )
    groups["optional"].add_argument(
        "--check-invariants",
        action="store_true",
        help="Verify resource conservation after every trigger.",
    )
    # ================== #
    # compare            #
    # ================== #
    groups = _subparser(
        subparsers, "compare", "Paired runs with and without the predictor."
    )
    groups["required"].add_argument(
        "--predictor", required=True, help="Predictor bundle."
    )
    _add_mec_arguments(groups["optional"])
    groups["optional"].add_argument(
        "--runs", type=int, default=10, help="Paired runs.\nDefault: 10."
    )
    groups["optional"].add_argument("--num-ues", type=int, help="Number of UEs.")
    groups["optional"].add_argument(
        "--duration", type=int, help="Simulated time in seconds."
    )
    groups["optional"].add_argument(
        "--out", default="comparison.json", help="Default: `comparison.json`."
    )
    # ================== #
    # report             #
    # ================== #
    groups = _subparser(subparsers, "report", "Write plot-ready CSVs and figures.")
    groups["optional"].add_argument("--bench", help="bench.json from `bench`.")
    groups["optional"].add_argument(
        "--comparison", help="comparison.json from `compare`."
    )
    groups["optional"].add_argument(
        "--figures",
        nargs="?",
        const="png",
        help=(
            "Also render figures. Options: png, pdf, and svg.\n"
            "If the flag is provided without argument, `png` is used."
        ),
    )
    groups["optional"].add_argument(
        "-d",
        "--dpi",
        type=float,
        default=300.0,
        help="Resolution in dots per inch.\nDefault: 300 (high resolution for print).",
    )
    return parser


def _add_dbscan_arguments(group) -> None:
    group.add_argument(
        "--eps-km", type=float, default=0.5, help="DBSCAN radius in km.\nDefault: 0.5."
    )
    group.add_argument(
        "--min-pts", type=int, default=25, help="DBSCAN core size.\nDefault: 25."
    )
    group.add_argument(
        "--snapshot",
        type=int,
        help="Time in seconds of the clustered positions.\nDefault: last record.",
    )


def _add_mec_arguments(group) -> None:
    group.add_argument(
        "--mec-config", help="TOML file whose [mec] table overrides --config."
    )
    group.add_argument(
        "--policy", help=f"Placement policy. Options: {', '.join(POLICIES)}."
    )


def parse_command_line_input(argv: Union[None, Sequence[str]] = None) -> UserInput:
    """Parse command line arguments provided by user."""
    parser = make_parser()
    command_line_info = parser.parse_args(argv)
    if command_line_info.command is None:
        parser.print_help()
        raise ConfigError("command", f"missing; choose one of {', '.join(COMMANDS)}")
    return get_command_line_arguments(command_line_info, argv)


def get_command_line_arguments(
    command_line_info: Namespace, argv: Union[None, Sequence[str]] = None
) -> UserInput:
    """Store the command line input into a UserInput class."""
    options = dict(vars(command_line_info))
    user_input = UserInput(command=options.pop("command"))
    user_input.argv = list(argv) if argv is not None else []
    if config := options.pop("config"):
        user_input.config = check_input_file(config)
    if mec_config := options.pop("mec_config", None):
        user_input.mec_config = check_input_file(mec_config)
    # If user doesn't provide output folder, use current working directory.
    if out_dir := options.pop("out_dir"):
        user_input.out_dir = check_output_folder(out_dir)
    else:
        user_input.out_dir = Path.cwd()
    user_input.seed = options.pop("seed")
    quiet = options.pop("quiet")
    verbose = options.pop("verbose")
    if quiet and verbose:
        raise ConfigError("verbosity", "`--quiet` and `--verbose` exclude each other")
    user_input.verbosity = "WARNING" if quiet else "DEBUG" if verbose else "INFO"
    # Pipeline artifacts are looked up in the output folder.
    for key in (
        "trace", "sessions", "topology", "zones", "model", "predictor", "bench",
        "comparison",
    ):
        if options.get(key):
            options[key] = check_input_file(options[key], user_input.out_dir)
    if "figures" in options and options["figures"] is not None:
        options["figures"] = check_figure_format(options["figures"])
    user_input.options = options
    return user_input


def check_input_file(input_file: str, base: Union[None, Path] = None) -> Path:
    """Check that an input file exists.

    A relative `input_file` is taken relative to `base` when given.
    """
    document = Path(input_file)
    if base is not None and not document.is_absolute():
        document = base / document
    if not document.exists():
        raise ArtifactIOError(f"`{document}` does not exist")
    if not document.is_file():
        raise ArtifactIOError(f"`{document}` is not a file")
    return document


def check_output_folder(output_folder: str) -> Path:
    """Check output folder, creating it if needed."""
    output_folder = Path(output_folder)
    if output_folder.exists() and not output_folder.is_dir():
        raise ArtifactIOError(f"`{output_folder}` is not a directory")
    try:
        output_folder.mkdir(parents=True, exist_ok=True)
    except OSError as error:
        raise ArtifactIOError(f"cannot create `{output_folder}`: {error}") from None
    return output_folder


def check_figure_format(figure_format: str) -> str:
    """Check the format of the figures."""
    if figure_format in ("png", "pdf", "svg"):
        return figure_format
    raise ConfigError(
        "figures",
        f"format `{figure_format}` is not valid.\n"
        "Valid formats are: `png`, `pdf`, or `svg`.",
    )
