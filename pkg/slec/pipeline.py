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
Wiring of input files, model modules and output files for the subcommands of the command line interface
"""
import hashlib
import logging
from pathlib import Path
from typing import NamedTuple, List, Tuple, Any, Optional

import numpy as np

import slec
from slec.config import RunConfig, ConfigError, INPUT_FIELDS, OPTIONAL_INPUT_FIELDS
from slec.erosion import FactorStack, read_cover_table, s_factor, l_factor, c_factor, erosion
from slec.landslides import EligibilityMask
from slec.montecarlo import CatchmentModel, SimulationOutcome, run_simulation, write_results_csv, read_results_csv
from slec.raster import Raster, ShapeMismatchError, read_grid, write_grid, total
from slec.report import SummaryReport, summary_report, write_report, write_run_metadata, read_key_values
from slec.stats import QUANTILE_METHOD, DensityBins, density_bins, density_envelopes, write_density_csv, read_areas
from slec.terrain import FlowField, slope_aspect, dinf_directions, flow_length, flow_accumulation

logger = logging.getLogger(__name__)

#: Spawn key prefix of the density envelope random stream
ENVELOPE_STREAM = 2


class TerrainProducts(NamedTuple):
    slope: Raster
    aspect: Raster
    field: FlowField
    flow_length: Raster


class Catchment(NamedTuple):
    """
    Everything derived from the input files of a run
    """

    terrain: TerrainProducts
    stack: FactorStack
    eligible: EligibilityMask

    @property
    def area_ha(self) -> float:
        erosion_mask = self.stack.without_cover().mask & self.stack.C.mask
        return int(np.count_nonzero(erosion_mask)) * self.stack.R.header.cell_area_ha


def derive_terrain(dem: Raster, config: RunConfig) -> TerrainProducts:
    logger.info("Deriving slope, D∞ flow directions and flow length of %s", dem)
    slope, aspect = slope_aspect(dem)
    field = dinf_directions(dem)
    n_no_flow = int(np.count_nonzero(field.no_flow))
    if n_no_flow:
        logger.warning("DEM contains %s flat or pit cells without flow direction", n_no_flow)
    length = flow_length(field, dem.header.cellsize, config.flow_length_mode)
    return TerrainProducts(slope, aspect, field, length)


def _read_input(config: RunConfig, name: str) -> Raster:
    return read_grid(getattr(config, name))


def _read_optional(config: RunConfig, name: str, like: Raster) -> Raster:
    if getattr(config, name) is None:
        return Raster.full(like.header, 1.0)
    return _read_input(config, name)


def load_catchment(config: RunConfig) -> Catchment:
    """
    Read all input files and derive the static factors of the e-RUSLE model.

    :raises ConfigError: if a required input is missing
    :raises GridFormatError: if an input grid cannot be parsed
    :raises ShapeMismatchError: if the input grids do not share the same header
    :raises CoverTableError: if a land-cover class is missing in the cover table
    """
    config.require(*INPUT_FIELDS)
    dem = _read_input(config, "dem")
    terrain = derive_terrain(dem, config)
    landcover = _read_input(config, "landcover")
    if landcover.header != dem.header:
        raise ShapeMismatchError("Header of the landcover grid {} differs from the DEM".format(config.landcover))
    stack = FactorStack(
        R=_read_input(config, "r"),
        K=_read_input(config, "k"),
        L=l_factor(terrain.flow_length, terrain.slope, config.l_exponent, terrain.field.no_flow),
        S=s_factor(terrain.slope, config.s_threshold_deg),
        C=c_factor(landcover, read_cover_table(config.cover_table)),
        P=_read_optional(config, "p", dem),
        St=_read_optional(config, "st", dem),
    )
    for name in ("R", "K", "P", "St"):
        if getattr(stack, name).header != dem.header:
            raise ShapeMismatchError("Header of the {} grid differs from the DEM".format(name))
    stack.validate()
    if config.eligibility is not None:
        eligible = EligibilityMask.from_raster(read_grid(config.eligibility))
        if eligible.header != dem.header:
            raise ShapeMismatchError("Header of the eligibility grid differs from the DEM")
    else:
        eligible = EligibilityMask.of_catchment(dem)
    return Catchment(terrain, stack, eligible)


def _out_dir(config: RunConfig) -> Path:
    if config.out is None:
        raise ConfigError("Missing required setting 'out'")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def terrain_command(config: RunConfig) -> TerrainProducts:
    """
    Write slope, aspect, flow length and flow accumulation grids of the DEM
    """
    config.require("dem")
    out = _out_dir(config)
    dem = _read_input(config, "dem")
    products = derive_terrain(dem, config)
    write_grid(products.slope, out / "slope.asc")
    write_grid(products.aspect, out / "aspect.asc")
    write_grid(products.flow_length, out / "flowlen.asc")
    write_grid(flow_accumulation(products.field, dem.header.cell_area_m2), out / "flowacc.asc")
    logger.info("Wrote terrain grids to %s", out)
    return products


def erode_command(config: RunConfig) -> float:
    """
    Write the pre-failure soil loss rate grid and return the total soil loss of the catchment (t yr⁻¹)
    """
    out = _out_dir(config)
    catchment = load_catchment(config)
    rate = erosion(catchment.stack)
    write_grid(rate, out / "erosion_pre.asc")
    result = total(rate)
    logger.info("Pre-failure soil loss: %s t/yr", result)
    return result


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_metadata(config: RunConfig, catchment: Catchment) -> List[Tuple[str, Any]]:
    """
    Key-value items of the run metadata file. Two runs with equal metadata produce equal outputs.
    """
    items: List[Tuple[str, Any]] = [
        ("software", "slec"),
        ("version", slec.__version__),
        ("config_sha256", config.config_hash()),
        ("seed", config.seed),
        ("min_area_km2", catchment.stack.R.header.cell_area_km2),
        ("max_area_km2", float(config.max_area)),
        ("quantile_method", QUANTILE_METHOD),
        ("catchment_area_ha", catchment.area_ha),
        ("eligible_cells", catchment.eligible.count),
    ]
    for name in INPUT_FIELDS + OPTIONAL_INPUT_FIELDS:
        path = getattr(config, name)
        if path is not None:
            items.append(("{}_sha256".format(name), file_digest(path)))
    return items


def envelope_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(ENVELOPE_STREAM,))))


def simulation_density(outcome: SimulationOutcome, config: RunConfig, seed: int) -> DensityBins:
    areas = np.concatenate([np.asarray(r.areas_km2, dtype=np.float64) for r in outcome.results])
    bins = density_bins(areas, bins_per_decade=config.bins_per_decade)
    return density_envelopes(bins, envelope_rng(seed), config.envelope_resamples)


def simulate_command(config: RunConfig) -> Tuple[SimulationOutcome, SummaryReport]:
    """
    Run the Monte Carlo simulation and write results, summary report, headline numbers, area density and run
    metadata to the output directory
    """
    sim_config = config.simulation_config()
    out = _out_dir(config)
    catchment = load_catchment(config)
    model = CatchmentModel.from_factors(catchment.stack, catchment.eligible)
    outcome = run_simulation(sim_config, model, config.threads)
    write_results_csv(outcome.results, out / "results.csv")
    report = summary_report(
        outcome.results, catchment.area_ha, sim_config.seed, config.bootstrap_statistic, config.bootstrap_resamples
    )
    write_report(report, out)
    if any(r.areas_km2 for r in outcome.results):
        write_density_csv(simulation_density(outcome, config, sim_config.seed), out / "density.csv")
    else:
        logger.warning("No landslides were sampled, density.csv is not written")
    write_run_metadata(run_metadata(config, catchment), out / "run_metadata.txt")
    return outcome, report


def _catchment_area_from_metadata(results_path: Path) -> Optional[float]:
    metadata = results_path.parent / "run_metadata.txt"
    if not metadata.is_file():
        return None
    values = dict(read_key_values(metadata))
    return float(values["catchment_area_ha"]) if "catchment_area_ha" in values else None


def bootstrap_command(config: RunConfig, results_path: Path) -> SummaryReport:
    """
    Re-analyse an existing results CSV file with the bootstrap settings of `config`.

    The catchment area is taken from the ``run_metadata.txt`` next to the results file, or from the valid cells of the
    DEM if that file is missing.
    """
    if config.seed is None:
        raise ConfigError("An explicit seed is required for the bootstrap")
    if not Path(results_path).is_file():
        raise ConfigError("Results file {} does not exist".format(results_path))
    out = _out_dir(config)
    results = read_results_csv(results_path)
    area_ha = _catchment_area_from_metadata(Path(results_path))
    if area_ha is None:
        if config.dem is None:
            raise ConfigError("Catchment area unknown: no run_metadata.txt next to {} and no DEM".format(results_path))
        dem = read_grid(config.require("dem").dem)
        area_ha = dem.n_valid * dem.header.cell_area_ha
    report = summary_report(results, area_ha, config.seed, config.bootstrap_statistic, config.bootstrap_resamples)
    write_report(report, out)
    return report


def density_command(config: RunConfig, areas_path: Path) -> DensityBins:
    """
    Bin a list of landslide areas into density.csv, with bootstrap envelopes
    """
    if config.seed is None:
        raise ConfigError("An explicit seed is required for the density envelopes")
    if not Path(areas_path).is_file():
        raise ConfigError("Area list {} does not exist".format(areas_path))
    out = _out_dir(config)
    bins = density_bins(read_areas(areas_path), bins_per_decade=config.bins_per_decade)
    bins = density_envelopes(bins, envelope_rng(config.seed), config.envelope_resamples)
    write_density_csv(bins, out / "density.csv")
    return bins
