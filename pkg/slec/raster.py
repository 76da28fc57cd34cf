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
Georeferenced raster data model, nodata-aware map algebra and ESRI ASCII grid I/O.

A :class:`Raster` couples a :class:`GridHeader` with a 64 bit float value array and a validity mask. Rasters are
immutable after construction; all map algebra functions return new rasters. Invalid (nodata) cells are strictly
propagated: an output cell is valid iff all contributing input cells are valid.
"""
import logging
import math
import re
from pathlib import Path
from typing import NamedTuple, Optional, Callable, Union, List, Tuple

import numpy as np

logger = logging.getLogger(__name__)

HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")
DEFAULT_NODATA = -9999.0
M2_PER_HA = 10_000.0
M2_PER_KM2 = 1_000_000.0

_TOKEN_RE = re.compile(r"\S+")


class GridFormatError(ValueError):
    """
    Raised when an ASCII grid file does not conform to the expected format.

    :ivar path: The offending file
    :ivar line: 1-based line number of the error (0 if not related to a specific line)
    :ivar column: 1-based character column of the offending token (0 if not related to a specific token)
    """

    def __init__(self, path: Union[str, Path], line: int, column: int, message: str):
        super().__init__("{}:{}:{}: {}".format(path, line, column, message))
        self.path = path
        self.line = line
        self.column = column


class ShapeMismatchError(ValueError):
    """
    Raised when rasters with different headers are combined, or a raster is too small for an operation.
    """

    pass


class RasterInvariantError(ValueError):
    """
    Raised when a raster violates a semantic constraint of its role (e.g. a negative erosion rate or a cover factor
    outside of [0, 1]).
    """

    pass


class GridHeader(NamedTuple):
    """
    Georeferencing information of a raster: dimensions, lower left corner and cell size in metres
    """

    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    cellsize: float
    nodata_value: float = DEFAULT_NODATA

    def validate(self) -> "GridHeader":
        if self.ncols < 1 or self.nrows < 1:
            raise RasterInvariantError("Grid dimensions must be positive, got {}x{}".format(self.nrows, self.ncols))
        if not (self.cellsize > 0 and math.isfinite(self.cellsize)):
            raise RasterInvariantError("Cell size must be positive, got {}".format(self.cellsize))
        if not math.isfinite(self.nodata_value):
            raise RasterInvariantError("NODATA_VALUE must be a finite number")
        return self

    @property
    def shape(self) -> Tuple[int, int]:
        return self.nrows, self.ncols

    @property
    def cell_area_m2(self) -> float:
        return self.cellsize * self.cellsize

    @property
    def cell_area_ha(self) -> float:
        return self.cell_area_m2 / M2_PER_HA

    @property
    def cell_area_km2(self) -> float:
        return self.cell_area_m2 / M2_PER_KM2


class Raster:
    """
    An immutable georeferenced grid of 64 bit float values with a validity mask.

    Values are stored row-major, north row first. Invalid cells hold NaN in :attr:`values`; their nodata token is only
    materialised when writing a grid file.

    :param header: The grid header
    :param values: 2-D array of shape (nrows, ncols)
    :param mask: 2-D boolean array of the same shape, True for valid cells. If omitted, all finite values are valid.
    """

    __slots__ = ("header", "values", "mask")

    def __init__(self, header: GridHeader, values: np.ndarray, mask: Optional[np.ndarray] = None):
        header.validate()
        values = np.array(values, dtype=np.float64)
        if values.shape != header.shape:
            raise ShapeMismatchError("Value array of shape {} does not match header {}".format(values.shape, header))
        if mask is None:
            mask = np.isfinite(values)
        else:
            mask = np.array(mask, dtype=bool)
            if mask.shape != header.shape:
                raise ShapeMismatchError("Mask of shape {} does not match header {}".format(mask.shape, header))
            mask &= np.isfinite(values)
        values[~mask] = np.nan
        values.setflags(write=False)
        mask.setflags(write=False)
        self.header = header
        self.values = values
        self.mask = mask

    @classmethod
    def full(cls, header: GridHeader, value: float) -> "Raster":
        return cls(header, np.full(header.shape, value, dtype=np.float64))

    def with_values(self, values: np.ndarray, mask: Optional[np.ndarray] = None) -> "Raster":
        """
        Create a new raster with the same header and the given values. The new mask is this raster's mask combined
        with the validity of the new values (and the given `mask`, if any).
        """
        new_mask = self.mask if mask is None else (self.mask & mask)
        return Raster(self.header, values, new_mask)

    def valid_values(self) -> np.ndarray:
        return self.values[self.mask]

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.mask))

    def equals(self, other: "Raster") -> bool:
        """
        Value-wise equality: identical headers, identical masks and identical values on valid cells.
        """
        return (
            self.header == other.header
            and bool(np.array_equal(self.mask, other.mask))
            and bool(np.array_equal(self.values[self.mask], other.values[other.mask]))
        )

    def __repr__(self) -> str:
        return "Raster({}x{}, cellsize={}, valid={})".format(
            self.header.nrows, self.header.ncols, self.header.cellsize, self.n_valid
        )


def _require_same_header(a: Raster, b: Raster) -> None:
    if a.header != b.header:
        raise ShapeMismatchError("Raster headers differ: {} vs. {}".format(a.header, b.header))


def map1(r: Raster, f: Callable[[np.ndarray], np.ndarray]) -> Raster:
    """
    Apply a vectorised unary function to all valid cells of a raster.
    """
    out = np.full(r.header.shape, np.nan)
    out[r.mask] = f(r.values[r.mask])
    return Raster(r.header, out, r.mask)


def map2(a: Raster, b: Raster, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> Raster:
    """
    Combine two rasters cellwise with a vectorised binary function.

    The function is evaluated on cells which are valid in both rasters only; all other cells are invalid in the result.

    :raises ShapeMismatchError: if the headers of `a` and `b` differ
    """
    _require_same_header(a, b)
    mask = a.mask & b.mask
    out = np.full(a.header.shape, np.nan)
    out[mask] = f(a.values[mask], b.values[mask])
    return Raster(a.header, out, mask)


def product(rasters: List[Raster]) -> Raster:
    """
    Cellwise product of any number of rasters with identical headers
    """
    if not rasters:
        raise ValueError("At least one raster is required")
    mask = rasters[0].mask.copy()
    for r in rasters[1:]:
        _require_same_header(rasters[0], r)
        mask &= r.mask
    out = np.ones(rasters[0].header.shape)
    for r in rasters:
        out = np.multiply(out, r.values, where=mask, out=out)
    out[~mask] = np.nan
    return Raster(rasters[0].header, out, mask)


def check_nonnegative(r: Raster, name: str) -> Raster:
    """
    Check the *nonnegative matrix* constraint on all valid cells.

    :raises RasterInvariantError: if any valid cell is negative
    """
    valid = r.valid_values()
    if valid.size and valid.min() < 0:
        raise RasterInvariantError("{} must be nonnegative, found minimum {}".format(name, valid.min()))
    return r


def check_proportion(r: Raster, name: str, open_lower: bool = False) -> Raster:
    """
    Check the *proportion* constraint on all valid cells: values in [0, 1], or in (0, 1] if `open_lower` is True.

    :raises RasterInvariantError: if any valid cell is outside of the range
    """
    valid = r.valid_values()
    if not valid.size:
        return r
    lo, hi = valid.min(), valid.max()
    if hi > 1 or lo < 0 or (open_lower and lo <= 0):
        raise RasterInvariantError(
            "{} must be a proportion in {}0, 1], found range [{}, {}]".format(name, "(" if open_lower else "[", lo, hi)
        )
    return r


def total(r: Raster, cell_area_ha: Optional[float] = None) -> float:
    """
    Integrate an erosion rate raster (t ha⁻¹ yr⁻¹) over its valid cells to a soil loss in t yr⁻¹.

    The sum is computed with :func:`math.fsum`, i.e. exactly rounded and independent of summation order.

    :param r: Erosion rate raster
    :param cell_area_ha: Area of a single cell in hectares. Defaults to the area derived from the raster header.
    :raises RasterInvariantError: if a valid cell is negative
    """
    if cell_area_ha is None:
        cell_area_ha = r.header.cell_area_ha
    if not cell_area_ha > 0:
        raise ValueError("Cell area must be positive, got {}".format(cell_area_ha))
    check_nonnegative(r, "Erosion rate")
    return math.fsum(r.valid_values() * cell_area_ha)


def read_grid(path: Union[str, Path]) -> Raster:
    """
    Read an ESRI-style ASCII grid file.

    The file consists of the six header lines ``NCOLS``, ``NROWS``, ``XLLCORNER``, ``YLLCORNER``, ``CELLSIZE``,
    ``NODATA_VALUE`` (case-insensitive keys), followed by NROWS lines of NCOLS whitespace-separated numbers, north row
    first. Cells equal to the nodata value are masked invalid.

    :raises GridFormatError: for malformed header lines, wrong cell counts and non-numeric tokens, naming the line and
        column of the problem
    :raises FileNotFoundError: if the file does not exist
    """
    path = Path(path)
    logger.debug("Reading grid %s ...", path)
    with open(path, "r", encoding="ascii", errors="replace") as f:
        lines = f.read().splitlines()

    header_values = {}
    line_no = 0
    for line_no in range(1, len(HEADER_KEYS) + 1):
        if line_no > len(lines):
            raise GridFormatError(path, line_no, 0, "unexpected end of file in header")
        tokens = _TOKEN_RE.findall(lines[line_no - 1])
        if len(tokens) != 2:
            raise GridFormatError(path, line_no, 1, "header line must be '<KEY> <value>'")
        key = tokens[0].lower()
        if key not in HEADER_KEYS or key in header_values:
            raise GridFormatError(path, line_no, 1, "unexpected header key {!r}".format(tokens[0]))
        header_values[key] = (tokens[1], line_no, lines[line_no - 1].index(tokens[1], len(tokens[0])) + 1)

    def header_field(key: str, type_: type):
        text, line, column = header_values[key]
        try:
            return type_(text)
        except ValueError:
            raise GridFormatError(path, line, column, "invalid value {!r} for {}".format(text, key.upper()))

    ncols = header_field("ncols", int)
    nrows = header_field("nrows", int)
    for key, value in (("ncols", ncols), ("nrows", nrows), ("cellsize", header_field("cellsize", float))):
        if not value > 0:
            _text, line, column = header_values[key]
            raise GridFormatError(path, line, column, "{} must be positive".format(key.upper()))
    header = GridHeader(
        ncols,
        nrows,
        header_field("xllcorner", float),
        header_field("yllcorner", float),
        header_field("cellsize", float),
        header_field("nodata_value", float),
    )

    values = np.empty((nrows, ncols), dtype=np.float64)
    row = 0
    for line_index in range(len(HEADER_KEYS), len(lines)):
        line = lines[line_index]
        if not line.strip():
            continue
        if row >= nrows:
            raise GridFormatError(path, line_index + 1, 1, "more than NROWS={} data rows".format(nrows))
        tokens = line.split()
        if len(tokens) != ncols:
            raise GridFormatError(
                path,
                line_index + 1,
                0,
                "expected NCOLS={} values, found {}".format(ncols, len(tokens)),
            )
        try:
            parsed = np.array(tokens, dtype=np.float64)
            bad = np.flatnonzero(~np.isfinite(parsed))
        except ValueError:
            parsed = None
            bad = np.array([_first_non_numeric(tokens)])
        if bad.size:
            match = list(_TOKEN_RE.finditer(line))[bad[0]]
            raise GridFormatError(path, line_index + 1, match.start() + 1, "invalid number {!r}".format(match.group()))
        values[row] = parsed
        row += 1
    if row != nrows:
        raise GridFormatError(path, len(lines) + 1, 0, "expected NROWS={} data rows, found {}".format(nrows, row))

    return Raster(header, values, values != header.nodata_value)


def _first_non_numeric(tokens: List[str]) -> int:
    for i, token in enumerate(tokens):
        try:
            if math.isfinite(float(token)):
                continue
        except ValueError:
            pass
        return i
    return 0


def format_number(value: float) -> str:
    """
    Shortest decimal representation of a float which reads back to the identical value
    """
    return repr(float(value))


def write_grid(r: Raster, path: Union[str, Path]) -> None:
    """
    Write a raster as ESRI-style ASCII grid in canonical formatting.

    Canonical formatting means uppercase header keys, a single space as separator and the shortest round-trip decimal
    representation of every number. Invalid cells are written as the header's nodata value. The output is a pure
    function of the raster.

    :raises RasterInvariantError: if a valid cell holds the nodata value, which would read back as invalid
    """
    path = Path(path)
    h = r.header
    clashes = int(np.count_nonzero(r.mask & (r.values == h.nodata_value)))
    if clashes:
        raise RasterInvariantError(
            "{} valid cells hold the nodata value {}, cannot write {}".format(clashes, h.nodata_value, path)
        )
    nodata_token = format_number(h.nodata_value)
    out = [
        "NCOLS {}".format(h.ncols),
        "NROWS {}".format(h.nrows),
        "XLLCORNER {}".format(format_number(h.xllcorner)),
        "YLLCORNER {}".format(format_number(h.yllcorner)),
        "CELLSIZE {}".format(format_number(h.cellsize)),
        "NODATA_VALUE {}".format(nodata_token),
    ]
    for values, mask in zip(r.values.tolist(), r.mask.tolist()):
        out.append(" ".join(repr(v) if valid else nodata_token for v, valid in zip(values, mask)))
    logger.debug("Writing grid %s ...", path)
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write("\n".join(out))
        f.write("\n")
