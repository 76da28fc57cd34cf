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
A synthetic test catchment: a hillslope tilted to the south with gentle east-west undulations, uniform land cover and
uniform erosivity and erodibility.

With the default size of 500 x 800 cells of 5 m, the catchment covers 10 km². Every cell has a downslope neighbour, so
the DEM has neither flats nor pits.
"""
import logging
import math
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from slec.erosion import CoverTable, write_cover_table
from slec.raster import GridHeader, Raster, write_grid

logger = logging.getLogger(__name__)

#: Land-cover class of the whole synthetic catchment
LANDCOVER_CLASS = 1
#: Its cover-management factor
LANDCOVER_C = 0.2
#: Rainfall-runoff erosivity (MJ mm ha⁻¹ h⁻¹ yr⁻¹)
EROSIVITY = 800.0
#: Soil erodibility (t ha h ha⁻¹ MJ⁻¹ mm⁻¹)
ERODIBILITY = 0.035


class SyntheticCatchment(NamedTuple):
    dem: Raster
    landcover: Raster
    r: Raster
    k: Raster
    cover_table: CoverTable


def synthetic_dem(
    nrows: int = 500,
    ncols: int = 800,
    cellsize: float = 5.0,
    gradient: float = 0.2,
    amplitude: float = 8.0,
    wavelength: float = 500.0,
) -> Raster:
    """
    DEM of a plane rising northwards with `gradient` (m/m), overlaid with east-west sine undulations of the given
    amplitude (m) and wavelength (m). The undulation amplitude grows northwards, but slower than the plane, so
    every cell drains southwards.
    """
    if amplitude / (nrows * cellsize) >= gradient:
        raise ValueError("Undulations are too steep for a DEM without pits")
    header = GridHeader(ncols, nrows, 0.0, 0.0, cellsize)
    y = (nrows - 1 - np.arange(nrows))[:, np.newaxis] * cellsize
    x = np.arange(ncols)[np.newaxis, :] * cellsize
    z = 300.0 + gradient * y + amplitude * np.sin(2 * math.pi * x / wavelength) * (1 + y / (nrows * cellsize))
    return Raster(header, z)


def synthetic_catchment(nrows: int = 500, ncols: int = 800, cellsize: float = 5.0) -> SyntheticCatchment:
    dem = synthetic_dem(nrows, ncols, cellsize)
    return SyntheticCatchment(
        dem=dem,
        landcover=Raster.full(dem.header, LANDCOVER_CLASS),
        r=Raster.full(dem.header, EROSIVITY),
        k=Raster.full(dem.header, ERODIBILITY),
        cover_table=CoverTable({LANDCOVER_CLASS: LANDCOVER_C}),
    )


def write_synthetic_catchment(
    out_dir: Union[str, Path], nrows: int = 500, ncols: int = 800, cellsize: float = 5.0
) -> Path:
    """
    Write the synthetic catchment as ASCII grids and cover table, together with a config file referencing them.

    :return: Path of the config file ``slec.conf``
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    catchment = synthetic_catchment(nrows, ncols, cellsize)
    write_grid(catchment.dem, out_dir / "dem.asc")
    write_grid(catchment.landcover, out_dir / "landcover.asc")
    write_grid(catchment.r, out_dir / "r.asc")
    write_grid(catchment.k, out_dir / "k.asc")
    write_cover_table(catchment.cover_table, out_dir / "cover.csv")
    config_path = out_dir / "slec.conf"
    config_path.write_text(
        "# Synthetic catchment of {} x {} cells of {} m\n"
        "dem = dem.asc\n"
        "landcover = landcover.asc\n"
        "r = r.asc\n"
        "k = k.asc\n"
        "cover_table = cover.csv\n".format(nrows, ncols, cellsize)
    )
    logger.info("Wrote synthetic catchment of %s x %s cells to %s", nrows, ncols, out_dir)
    return config_path
