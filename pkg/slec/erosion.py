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
The e-RUSLE soil loss model E = R·K·L·S·C·P·St and the factors computed from terrain and land cover.

Units: R in MJ mm ha⁻¹ h⁻¹ yr⁻¹, K in t ha h ha⁻¹ MJ⁻¹ mm⁻¹, all other factors dimensionless, E in t ha⁻¹ yr⁻¹.
"""
import csv
import logging
import math
from pathlib import Path
from typing import NamedTuple, Dict, Optional, Union, Mapping

import numpy as np

from slec.raster import (
    Raster,
    ShapeMismatchError,
    RasterInvariantError,
    check_nonnegative,
    check_proportion,
    map1,
    map2,
    product,
)

logger = logging.getLogger(__name__)

#: Slope angle (degrees) below which the Moore & Burch steepness relation is used instead of Nearing's
S_THRESHOLD_DEG = 12.73
#: Length of the RUSLE unit plot in metres
UNIT_PLOT_LENGTH = 22.13
#: sin(9%) slope of the RUSLE unit plot
UNIT_PLOT_SIN = 0.0896


class CoverTableError(ValueError):
    """
    Raised when a land-cover class has no cover-management factor, or the cover table itself is invalid.

    :ivar class_code: The offending land-cover class code, if any
    """

    def __init__(self, message: str, class_code: Optional[int] = None):
        super().__init__(message)
        self.class_code = class_code


class FactorStack(NamedTuple):
    """
    The per-cell factors of the e-RUSLE model. All rasters share the same header.
    """

    #: Rainfall-runoff erosivity
    R: Raster
    #: Soil erodibility
    K: Raster
    #: Slope length factor
    L: Raster
    #: Slope steepness factor
    S: Raster
    #: Cover-management factor, in [0, 1]
    C: Raster
    #: Support practice factor, in (0, 1]
    P: Raster
    #: Stoniness factor, in (0, 1]
    St: Raster

    def validate(self) -> "FactorStack":
        """
        Check headers and the semantic ranges of all factors

        :raises ShapeMismatchError: if the headers differ
        :raises RasterInvariantError: if a factor leaves its range
        """
        for name, raster in self._asdict().items():
            if raster.header != self.R.header:
                raise ShapeMismatchError("Header of factor {} differs from the header of R".format(name))
        for name in ("R", "K", "L", "S"):
            check_nonnegative(getattr(self, name), name)
        check_proportion(self.C, "C")
        check_proportion(self.P, "P", open_lower=True)
        check_proportion(self.St, "St", open_lower=True)
        return self

    def without_cover(self) -> Raster:
        """
        The product of all static factors except C, i.e. the soil loss of bare soil (C = 1)
        """
        return product([self.R, self.K, self.L, self.S, self.P, self.St])


class CoverTable(Dict[int, float]):
    """
    Mapping from integer land-cover class codes to cover-management factors in [0, 1]
    """

    def __init__(self, entries: Mapping[int, float]):
        super().__init__()
        for class_code, c in entries.items():
            if not 0.0 <= c <= 1.0:
                raise CoverTableError(
                    "C factor {} of land-cover class {} is not a proportion".format(c, class_code), class_code
                )
            self[int(class_code)] = float(c)


def read_cover_table(path: Union[str, Path]) -> CoverTable:
    """
    Read a cover table CSV file with header ``class,c_factor``.

    :raises CoverTableError: for a wrong header, unparsable rows, duplicate classes or C values outside [0, 1]
    """
    path = Path(path)
    entries: Dict[int, float] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["class", "c_factor"]:
            raise CoverTableError("{}: expected header 'class,c_factor'".format(path))
        for line_no, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            try:
                class_code = int(row[0])
                c = float(row[1])
            except (ValueError, IndexError):
                raise CoverTableError("{}:{}: invalid row {}".format(path, line_no, ",".join(row)))
            if class_code in entries:
                raise CoverTableError("{}:{}: duplicate class {}".format(path, line_no, class_code), class_code)
            entries[class_code] = c
    logger.debug("Read %s cover classes from %s", len(entries), path)
    return CoverTable(entries)


def write_cover_table(table: Mapping[int, float], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["class", "c_factor"])
        for class_code in sorted(table):
            writer.writerow([class_code, repr(float(table[class_code]))])


def moore_burch_s(sin_slope: np.ndarray) -> np.ndarray:
    return (sin_slope / UNIT_PLOT_SIN) ** 1.3


def nearing_s(sin_slope: np.ndarray) -> np.ndarray:
    return -1.5 + 17.0 / (1.0 + np.exp(2.3 - 6.1 * sin_slope))


def s_factor(slope: Raster, threshold_deg: float = S_THRESHOLD_DEG) -> Raster:
    """
    Slope steepness factor, merged from Moore & Burch for gentle slopes and Nearing for steep slopes.

    The Moore & Burch relation (sin θ / 0.0896)^1.3 is used below `threshold_deg`, as it has the correct limit S = 0 on
    a flat surface; Nearing's −1.5 + 17 / (1 + exp(2.3 − 6.1·sin θ)) is used above. Both curves intersect at the
    default threshold of 12.73°.

    :param slope: Slope raster in radians
    :raises RasterInvariantError: if a valid slope is negative
    """
    check_nonnegative(slope, "Slope")
    threshold = math.radians(threshold_deg)

    def s(theta: np.ndarray) -> np.ndarray:
        sin_theta = np.sin(theta)
        return np.where(theta < threshold, moore_burch_s(sin_theta), nearing_s(sin_theta))

    return map1(slope, s)


def mccool_exponent(slope: np.ndarray) -> np.ndarray:
    """
    Variable slope length exponent m = β/(1+β) with β = (sin θ/0.0896) / (3·sin^0.8 θ + 0.56)
    """
    sin_theta = np.sin(slope)
    beta = (sin_theta / UNIT_PLOT_SIN) / (3.0 * sin_theta**0.8 + 0.56)
    return beta / (1.0 + beta)


def l_factor(
    flow_length: Raster,
    slope: Raster,
    exponent: Optional[float] = None,
    no_flow: Optional[np.ndarray] = None,
) -> Raster:
    """
    Slope length factor L = (λ'/22.13)^m with λ' = max(λ, cell size).

    :param flow_length: Upslope flow length λ in metres
    :param slope: Slope raster in radians
    :param exponent: A fixed exponent m. If None (default), McCool's slope-dependent exponent is used.
    :param no_flow: Optional boolean array of flat and pit cells. These cells get L = 1.
    :raises RasterInvariantError: if a valid flow length is negative
    """
    check_nonnegative(flow_length, "Flow length")
    cellsize = flow_length.header.cellsize

    def lf(lam: np.ndarray, theta: np.ndarray) -> np.ndarray:
        m = mccool_exponent(theta) if exponent is None else np.full_like(theta, exponent)
        return (np.maximum(lam, cellsize) / UNIT_PLOT_LENGTH) ** m

    result = map2(flow_length, slope, lf)
    if no_flow is not None:
        result = result.with_values(np.where(no_flow, 1.0, result.values))
    return result


def c_factor(landcover: Raster, table: Mapping[int, float]) -> Raster:
    """
    Look up the cover-management factor of each land-cover class.

    :raises CoverTableError: if a class code in the raster (or a non-integral code) is missing in the table, naming
        the smallest such code
    """
    codes = landcover.valid_values()
    unique_codes = np.unique(codes)
    missing = [c for c in unique_codes.tolist() if c != int(c) or int(c) not in table]
    if missing:
        code = missing[0]
        raise CoverTableError(
            "Land-cover class {} is not in the cover table".format(int(code) if code == int(code) else code),
            int(code) if code == int(code) else None,
        )
    lookup = np.array([table[int(c)] for c in unique_codes.tolist()])
    c_values = np.full(landcover.header.shape, np.nan)
    c_values[landcover.mask] = lookup[np.searchsorted(unique_codes, codes)]
    return check_proportion(landcover.with_values(c_values), "C")


def erosion(stack: FactorStack) -> Raster:
    """
    Soil loss rate E = R·K·L·S·C·P·St per cell, in t ha⁻¹ yr⁻¹.

    Cells where any factor is invalid are invalid in the result.

    :raises ShapeMismatchError: if the factor headers differ
    :raises RasterInvariantError: if a factor violates its range
    """
    stack.validate()
    result = product(list(stack))
    if result.n_valid and not np.all(result.valid_values() >= 0):
        raise RasterInvariantError("Erosion must be a nonnegative matrix")
    return result
