#!/usr/bin/env python3
# Copyright 2026 The SLEC developers
#
# Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance with
# the License. You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on an
# "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""
Command line interface of the landslide erosion simulator.

Usage
-----

Use ``slec --help`` and ``slec <subcommand> --help`` for full usage information.

Here are some examples:

Writing the synthetic test catchment and simulating 1000 years of 400 landslides on it:

    slec synthetic --out work
    slec simulate --config work/slec.conf --n-landslides 400 --iterations 1000 --seed 7 --out work/run

Re-analysing the results with the mean instead of the median as bootstrap statistic:

    slec bootstrap --results work/run/results.csv --bootstrap-statistic mean --seed 7 --out work/mean
"""
import argparse
import enum
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence, Dict

from slec.config import ConfigError, RunConfig, build_config
from slec.erosion import CoverTableError
from slec.landslides import DistributionDomainError, PartitionError, PlacementError
from slec.montecarlo import IterationError
from slec.raster import GridFormatError, ShapeMismatchError, RasterInvariantError
from slec.terrain import FlowRoutingError
from slec import pipeline
from slec.synthetic import write_synthetic_catchment

logger = logging.getLogger(__name__)


class ExitCode(enum.IntEnum):
    OK = 0
    INPUT_ERROR = 2
    MODEL_ERROR = 3

    def to_string(self) -> str:
        return self.name


#: Errors of the model, as opposed to errors in the inputs
MODEL_ERRORS = (
    CoverTableError,
    PlacementError,
    IterationError,
    RasterInvariantError,
    FlowRoutingError,
    DistributionDomainError,
    PartitionError,
)
INPUT_ERRORS = (ConfigError, GridFormatError, ShapeMismatchError, OSError, ValueError)

#: Command line flags which override config keys, as (flag, config key, help)
CONFIG_FLAGS = (
    ("--dem", "dem", "DEM grid (ESRI ASCII)"),
    ("--landcover", "landcover", "Land-cover class grid"),
    ("--r", "r", "Rainfall-runoff erosivity grid"),
    ("--k", "k", "Soil erodibility grid"),
    ("--p", "p", "Support practice factor grid (default: 1)"),
    ("--st", "st", "Stoniness factor grid (default: 1)"),
    ("--cover-table", "cover_table", "CSV file mapping land-cover classes to C factors"),
    ("--eligibility", "eligibility", "Grid of cells where landslides may occur (valid, non-zero cells)"),
    ("--n-landslides", "n_landslides", "Number of landslides per iteration"),
    ("--iterations", "iterations", "Number of Monte Carlo iterations (default: 1000)"),
    ("--seed", "seed", "Master seed of all random streams (required for simulations)"),
    ("--threads", "threads", "Number of worker threads; does not affect the results (default: 1)"),
    ("--rho", "rho", "Power law decay exponent of the area distribution (default: 1.4)"),
    ("--a-param", "a_param", "Location parameter a of the area distribution in km² (default: 1.28e-3)"),
    ("--s-param", "s_param", "Rollover parameter s of the area distribution in km² (default: -1.32e-4)"),
    ("--bare-min", "bare_min", "Lower bound of the bare-soil fraction of footprint cells (default: 0.2)"),
    ("--c-bare", "c_bare", "C factor of bare soil (default: 1.0)"),
    ("--max-area", "max_area", "Upper bound of sampled landslide areas in km² (default: 1.0)"),
    ("--flow-length-mode", "flow_length_mode", "'longest' (default) or 'mean' upslope flow length"),
    ("--l-exponent", "l_exponent", "Fixed slope length exponent, or 'mccool' (default)"),
    ("--s-threshold", "s_threshold_deg", "Slope angle in degrees of the S factor merge (default: 12.73)"),
    ("--bootstrap-resamples", "bootstrap_resamples", "Number of bootstrap resamples (default: 10000)"),
    ("--bootstrap-statistic", "bootstrap_statistic", "'median' (default), 'mean' or 'total'"),
    ("--bins-per-decade", "bins_per_decade", "Logarithmic density bins per decade of area (default: 10)"),
    ("--envelope-resamples", "envelope_resamples", "Number of resamples of the density envelopes (default: 1000)"),
)


def get_arg_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="Config file with 'key = value' lines")
    common.add_argument("-o", "--out", help="Output directory")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Log debug messages")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Only log warnings and errors")
    for flag, key, help_text in CONFIG_FLAGS:
        common.add_argument(flag, dest="cfg_" + key, metavar=key.upper(), help=help_text)
    common.add_argument(
        "--poisson",
        dest="cfg_poisson",
        action="store_const",
        const="true",
        help="Draw the number of landslides of each iteration from a Poisson law",
    )

    arg_parser = argparse.ArgumentParser(
        prog="slec",
        description="""
    Monte Carlo simulation of the effect of rainfall-induced shallow landslides on the soil erosion of a catchment,
    coupling the e-RUSLE erosion model with the inverse-gamma landslide frequency-area distribution.
    """,
    )
    subparsers = arg_parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("terrain", parents=[common], help="Write slope, aspect, flow length and accumulation grids")
    subparsers.add_parser("erode", parents=[common], help="Write the pre-failure erosion grid and print its total")
    subparsers.add_parser("simulate", parents=[common], help="Run the Monte Carlo simulation")
    bootstrap_parser = subparsers.add_parser("bootstrap", parents=[common], help="Re-analyse a results CSV file")
    bootstrap_parser.add_argument("--results", type=Path, required=True, help="Results CSV file of a simulation")
    density_parser = subparsers.add_parser("density", parents=[common], help="Bin a list of landslide areas")
    density_parser.add_argument("--areas", type=Path, required=True, help="Text file with one area (km²) per line")
    synthetic_parser = subparsers.add_parser("synthetic", parents=[common], help="Write the synthetic test catchment")
    synthetic_parser.add_argument("--nrows", type=int, default=500, help="Number of rows (default: 500)")
    synthetic_parser.add_argument("--ncols", type=int, default=800, help="Number of columns (default: 800)")
    synthetic_parser.add_argument("--cellsize", type=float, default=5.0, help="Cell size in m (default: 5)")
    return arg_parser


def _overrides(args: argparse.Namespace) -> Dict[str, Optional[str]]:
    overrides = {name[4:]: value for name, value in vars(args).items() if name.startswith("cfg_")}
    overrides["out"] = args.out
    return overrides


def run_command(args: argparse.Namespace) -> None:
    if args.command == "synthetic":
        if args.out is None:
            raise ConfigError("Missing required setting 'out'")
        config_path = write_synthetic_catchment(args.out, args.nrows, args.ncols, args.cellsize)
        print("Config file: {}".format(config_path))
        return

    config: RunConfig = build_config(args.config, _overrides(args))
    if args.command == "terrain":
        pipeline.terrain_command(config)
    elif args.command == "erode":
        print("Total pre-failure soil loss: {:.10g} t/yr".format(pipeline.erode_command(config)))
    elif args.command == "simulate":
        _outcome, report = pipeline.simulate_command(config)
        for key, value in report.headline:
            print("{} = {}".format(key, value))
    elif args.command == "bootstrap":
        pipeline.bootstrap_command(config, args.results)
    elif args.command == "density":
        pipeline.density_command(config, args.areas)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = get_arg_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        run_command(args)
    except MODEL_ERRORS as e:
        return exit_with_report(ExitCode.MODEL_ERROR, e)
    except INPUT_ERRORS as e:
        return exit_with_report(ExitCode.INPUT_ERROR, e)
    return ExitCode.OK


def exit_with_report(code: ExitCode, error: BaseException) -> int:
    message = str(error)
    if isinstance(error, IterationError) and error.__cause__ is not None:
        message += " ({})".format(type(error.__cause__).__name__)
    print("{}: {}".format(code.to_string(), message), file=sys.stderr)
    logger.debug("Error details", exc_info=error)
    return code


if __name__ == "__main__":
    sys.exit(main())
