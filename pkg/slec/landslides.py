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
The three-parameter inverse-gamma frequency-area distribution of landslides, class counts, exact area sampling and
the placement of landslide footprints on a raster.

The probability density of a landslide area A (km²) is

    p(A) = 1 / (a·Γ(ρ)) · (a / (A − s))^(ρ+1) · exp(−a / (A − s))        for A > s

With t = a / (A − s), the cumulative distribution is the regularized upper incomplete gamma function Q(ρ, t), and
A = s + a/G is distributed by p(A) when G is a unit-scale gamma variate with shape ρ.
"""
import logging
import math
from typing import NamedTuple, Optional, Union

import numpy as np
import scipy.special

from slec.raster import GridHeader, Raster, ShapeMismatchError

logger = logging.getLogger(__name__)

#: Upper area bound (km²) of sampled landslides and top edge of the default class partition
DEFAULT_MAX_AREA_KM2 = 1.0
#: Lower bound of the bare-soil fraction of a footprint cell
DEFAULT_BARE_MIN = 0.2

ArrayOrFloat = Union[float, np.ndarray]


class DistributionDomainError(ValueError):
    """
    Raised when the distribution is evaluated at an area A ≤ s or with invalid parameters
    """

    pass


class PartitionError(ValueError):
    """
    Raised for class partitions with non-increasing edges or a bottom edge not above s
    """

    pass


class PlacementError(RuntimeError):
    """
    Raised when a landslide does not fit into the eligible region, or a footprint leaves the valid catchment
    """

    pass


class InverseGammaParams(NamedTuple):
    """
    Parameters of the inverse-gamma landslide area distribution. Defaults are the values fitted to landslide inventories
    of the Italian Apennines.
    """

    #: Power law decay exponent of the tail (–)
    rho: float = 1.4
    #: Location of the maximum probability (km²)
    a: float = 1.28e-3
    #: Exponential rollover for small areas (km²)
    s: float = -1.32e-4

    def validate(self) -> "InverseGammaParams":
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise DistributionDomainError("rho must be positive, got {}".format(self.rho))
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DistributionDomainError("a must be positive, got {}".format(self.a))
        if not math.isfinite(self.s):
            raise DistributionDomainError("s must be finite, got {}".format(self.s))
        if not self.mode > 0:
            raise DistributionDomainError("The mode s + a/(rho+1) = {} is not a positive area".format(self.mode))
        return self

    @property
    def mode(self) -> float:
        return self.s + self.a / (self.rho + 1)

    @property
    def mean(self) -> Optional[float]:
        """
        The mean area s + a/(ρ−1), or None if ρ ≤ 1 (infinite mean)
        """
        if self.rho <= 1:
            return None
        return self.s + self.a / (self.rho - 1)


def _scaled(params: InverseGammaParams, area: ArrayOrFloat) -> np.ndarray:
    area = np.asarray(area, dtype=np.float64)
    if np.any(np.isnan(area)) or np.any(area <= params.s):
        raise DistributionDomainError("Landslide area must be greater than s = {}".format(params.s))
    with np.errstate(divide="ignore"):
        return params.a / (area - params.s)


def _unwrap(value: np.ndarray) -> ArrayOrFloat:
    return float(value) if value.ndim == 0 else value


def pdf(params: InverseGammaParams, area: ArrayOrFloat) -> ArrayOrFloat:
    """
    Probability density (km⁻²) of landslide areas. Accepts a scalar or an array of areas.

    Evaluated in log space, so it is accurate far into the power law tail and towards the exponential cutoff at s.

    :raises DistributionDomainError: if any area is ≤ s
    """
    params.validate()
    t = _scaled(params, area)
    with np.errstate(divide="ignore"):
        log_p = (params.rho + 1) * np.log(t) - t - math.log(params.a) - scipy.special.gammaln(params.rho)
    return _unwrap(np.exp(log_p))


def cdf(params: InverseGammaParams, area: ArrayOrFloat) -> ArrayOrFloat:
    """
    Cumulative probability P(A_L ≤ area) = Q(ρ, a/(area − s))

    :raises DistributionDomainError: if any area is ≤ s
    """
    params.validate()
    return _unwrap(scipy.special.gammaincc(params.rho, _scaled(params, area)))


def survival(params: InverseGammaParams, area: ArrayOrFloat) -> ArrayOrFloat:
    """
    Exceedance probability P(A_L > area) = P(ρ, a/(area − s)), accurate for very large areas where 1 − cdf cancels

    :raises DistributionDomainError: if any area is ≤ s
    """
    params.validate()
    return _unwrap(scipy.special.gammainc(params.rho, _scaled(params, area)))


def truncated_cdf(
    params: InverseGammaParams, area: ArrayOrFloat, min_area_km2: float = 0.0, max_area_km2: float = math.inf
) -> ArrayOrFloat:
    """
    Cumulative distribution of the areas returned by :func:`sample_area` with the same bounds, i.e. the distribution
    conditioned on min_area_km2 ≤ A ≤ max_area_km2 (and A > 0).

    Areas outside of the bounds are clipped, so this function is defined for any real area.
    """
    params.validate()
    lower = max(min_area_km2, 0.0, params.s)
    area = np.asarray(area, dtype=np.float64)
    lo_cdf = scipy.special.gammaincc(params.rho, params.a / (lower - params.s)) if lower > params.s else 0.0
    hi_cdf = 1.0 if math.isinf(max_area_km2) else cdf(params, max_area_km2)
    clipped = np.clip(area, np.nextafter(lower, math.inf), max_area_km2)
    result = (np.asarray(cdf(params, clipped)) - lo_cdf) / (hi_cdf - lo_cdf)
    result = np.where(area <= lower, 0.0, np.clip(result, 0.0, 1.0))
    return _unwrap(result)


class ClassPartition(NamedTuple):
    """
    A partition of landslide areas into contiguous classes [edges[h], edges[h+1]).

    The top edge may be infinite.
    """

    edges: np.ndarray

    @classmethod
    def log_spaced(cls, lo: float, hi: float, n_classes: int) -> "ClassPartition":
        """
        A partition of [lo, hi] into `n_classes` classes of equal logarithmic width
        """
        if not 0 < lo < hi or n_classes < 1:
            raise PartitionError("Invalid log-spaced partition [{}, {}] with {} classes".format(lo, hi, n_classes))
        edges = np.geomspace(lo, hi, n_classes + 1)
        edges[0], edges[-1] = lo, hi
        return cls(edges)

    def validate(self, params: Optional[InverseGammaParams] = None) -> "ClassPartition":
        """
        :raises PartitionError: if the edges are not a strictly increasing sequence of at least two areas, or the
            bottom edge is not greater than the parameter s
        """
        edges = np.asarray(self.edges, dtype=np.float64)
        if edges.ndim != 1 or edges.size < 2:
            raise PartitionError("A class partition needs at least two edges")
        if np.any(np.isnan(edges)) or not np.all(np.diff(edges) > 0):
            raise PartitionError("Class edges must be strictly increasing")
        if not np.isfinite(edges[0]):
            raise PartitionError("The bottom class edge must be finite")
        if params is not None and not edges[0] > params.s:
            raise PartitionError("The bottom class edge {} must be greater than s = {}".format(edges[0], params.s))
        return self

    @property
    def n_classes(self) -> int:
        return len(self.edges) - 1

    def class_of(self, areas: np.ndarray) -> np.ndarray:
        """
        Class index of each area, −1 for areas outside of the partition
        """
        idx = np.searchsorted(self.edges, areas, side="right") - 1
        return np.where((idx >= 0) & (idx < self.n_classes), idx, -1)


def class_counts(params: InverseGammaParams, partition: ClassPartition, n_total: float) -> np.ndarray:
    """
    Expected number of landslides δN_L(h) per class for a total of `n_total` landslides.

    :return: Array of n_total · (cdf(edges[h+1]) − cdf(edges[h])) for each class h
    :raises PartitionError: for invalid partitions
    """
    params.validate()
    partition.validate(params)
    if not n_total > 0:
        raise ValueError("The total number of landslides must be positive, got {}".format(n_total))
    return n_total * np.diff(np.asarray(cdf(params, np.asarray(partition.edges, dtype=np.float64))))


def _accept(areas: np.ndarray, min_area_km2: float, max_area_km2: float) -> np.ndarray:
    return np.isfinite(areas) & (areas > 0) & (areas >= min_area_km2) & (areas <= max_area_km2)


def sample_area(
    params: InverseGammaParams,
    rng: np.random.Generator,
    min_area_km2: float = 0.0,
    max_area_km2: float = math.inf,
) -> float:
    """
    Draw one landslide area (km²) as A = s + a/G with G ~ Gamma(ρ, 1).

    Draws outside of [min_area_km2, max_area_km2] (or nonpositive ones) are rejected and redrawn. Callers pass one cell
    area as lower bound, as smaller landslides cannot be rasterized.
    """
    params.validate()
    if not min_area_km2 < max_area_km2:
        raise DistributionDomainError("Empty sampling range [{}, {}]".format(min_area_km2, max_area_km2))
    while True:
        g = rng.standard_gamma(params.rho)
        with np.errstate(divide="ignore"):
            area = params.s + np.float64(params.a) / g
        if _accept(np.asarray(area), min_area_km2, max_area_km2):
            return float(area)


def sample_areas(
    params: InverseGammaParams,
    rng: np.random.Generator,
    n: int,
    min_area_km2: float = 0.0,
    max_area_km2: float = math.inf,
) -> np.ndarray:
    """
    Vectorised version of :func:`sample_area`: draw `n` landslide areas with the same rejection rule.
    """
    params.validate()
    if not min_area_km2 < max_area_km2:
        raise DistributionDomainError("Empty sampling range [{}, {}]".format(min_area_km2, max_area_km2))
    result = np.empty(n)
    filled = 0
    while filled < n:
        missing = n - filled
        g = rng.standard_gamma(params.rho, size=missing + missing // 8 + 16)
        with np.errstate(divide="ignore"):
            drawn = params.s + params.a / g
        accepted = drawn[_accept(drawn, min_area_km2, max_area_km2)][:missing]
        result[filled : filled + accepted.size] = accepted
        filled += accepted.size
    return result


class LandslideEvent(NamedTuple):
    """
    One landslide placed on the raster
    """

    #: Sampled area in km²
    area_km2: float
    #: Flat (row-major) index of the centroid cell
    centroid: int
    #: Sorted flat indices of the footprint cells
    footprint: np.ndarray
    #: Bare-soil fraction of each footprint cell, aligned with `footprint`
    bare_fraction: np.ndarray

    @property
    def n_cells(self) -> int:
        return int(self.footprint.size)


class EligibilityMask:
    """
    The set of cells a landslide centroid and footprint may occupy.

    :param header: Header of the catchment grid
    :param mask: Boolean array, True for eligible cells
    """

    __slots__ = ("header", "mask", "indices")

    def __init__(self, header: GridHeader, mask: np.ndarray):
        mask = np.array(mask, dtype=bool)
        if mask.shape != header.shape:
            raise ShapeMismatchError("Eligibility mask of shape {} does not match {}".format(mask.shape, header))
        mask.setflags(write=False)
        self.header = header
        self.mask = mask
        self.indices = np.flatnonzero(mask)

    @classmethod
    def of_catchment(cls, catchment: Raster) -> "EligibilityMask":
        """
        All valid cells of the catchment are eligible
        """
        return cls(catchment.header, catchment.mask)

    @classmethod
    def from_raster(cls, eligibility: Raster, catchment: Optional[Raster] = None) -> "EligibilityMask":
        """
        Valid, non-zero cells of an eligibility (e.g. susceptibility) raster are eligible, restricted to the valid
        cells of `catchment` if given.
        """
        mask = eligibility.mask & (np.nan_to_num(eligibility.values) != 0)
        if catchment is not None:
            if catchment.header != eligibility.header:
                raise ShapeMismatchError("Eligibility raster header differs from the catchment header")
            mask &= catchment.mask
        return cls(eligibility.header, mask)

    @property
    def count(self) -> int:
        return int(self.indices.size)

    def __repr__(self) -> str:
        return "EligibilityMask({} of {} cells)".format(self.count, self.mask.size)


def footprint_cells(area_km2: float, header: GridHeader) -> int:
    """
    Number of cells of a footprint: area / cell area, rounded half up, at least one cell
    """
    return max(1, int(math.floor(area_km2 / header.cell_area_km2 + 0.5)))


def nearest_cells(eligible: EligibilityMask, centroid: int, n: int) -> np.ndarray:
    """
    The `n` eligible cells whose centers are nearest to the center of the centroid cell, ties broken by (row, col).

    Candidates are searched in a growing square window around the centroid.
    """
    nrows, ncols = eligible.header.shape
    r0, c0 = divmod(int(centroid), ncols)
    radius = int(math.ceil(math.sqrt(n / math.pi))) + 1
    while True:
        row_lo, row_hi = max(0, r0 - radius), min(nrows, r0 + radius + 1)
        col_lo, col_hi = max(0, c0 - radius), min(ncols, c0 + radius + 1)
        rows, cols = np.nonzero(eligible.mask[row_lo:row_hi, col_lo:col_hi])
        rows += row_lo
        cols += col_lo
        d2 = (rows - r0) ** 2 + (cols - c0) ** 2
        covers_grid = row_lo == 0 and col_lo == 0 and row_hi == nrows and col_hi == ncols
        if not covers_grid:
            inside = d2 <= radius**2
            if np.count_nonzero(inside) < n:
                radius *= 2
                continue
            rows, cols, d2 = rows[inside], cols[inside], d2[inside]
        order = np.lexsort((cols, rows, d2))[:n]
        if order.size < n:
            raise PlacementError("Only {} eligible cells available for a footprint of {} cells".format(order.size, n))
        return np.sort(rows[order] * ncols + cols[order])


def place_landslide(
    area_km2: float,
    eligible: EligibilityMask,
    rng: np.random.Generator,
    bare_min: float = DEFAULT_BARE_MIN,
) -> LandslideEvent:
    """
    Place a landslide of the given area on the eligible cells.

    The centroid is drawn uniformly from the eligible cells. The footprint is the discretised disk of the
    round(area / cell area) eligible cells nearest to the centroid. Each footprint cell gets a bare-soil fraction drawn
    uniformly from [bare_min, 1].

    :raises PlacementError: if the footprint needs more cells than are eligible
    """
    if not 0.0 <= bare_min <= 1.0:
        raise ValueError("bare_min must be a proportion, got {}".format(bare_min))
    n = footprint_cells(area_km2, eligible.header)
    if n > eligible.count:
        raise PlacementError(
            "Landslide of {} km² needs {} cells, but only {} cells are eligible".format(area_km2, n, eligible.count)
        )
    centroid = int(eligible.indices[rng.integers(eligible.count)])
    footprint = nearest_cells(eligible, centroid, n)
    bare_fraction = rng.uniform(bare_min, 1.0, size=n)
    logger.debug("Placed landslide of %s km² (%s cells) at cell %s", area_km2, n, centroid)
    return LandslideEvent(float(area_km2), centroid, footprint, bare_fraction)
