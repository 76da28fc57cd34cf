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
Bootstrap quantiles of Monte Carlo results and frequency-density binning of landslide areas.

All quantiles are nearest-rank quantiles: the p-quantile of N sorted values is the value of rank ⌈p·N⌉. They involve no
interpolation, so they are always one of the bootstrapped statistics.
"""
import csv
import logging
import math
from pathlib import Path
from typing import NamedTuple, Sequence, Tuple, Optional, Union

import numpy as np

from slec.datatypes import Statistic
from slec.landslides import DistributionDomainError

logger = logging.getLogger(__name__)

#: Probability levels of the reported quantiles
QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)
#: Name of the quantile method, as written to the run metadata
QUANTILE_METHOD = "nearest-rank"
#: Header of the density CSV file
DENSITY_HEADER = ("bin_lo_km2", "bin_hi_km2", "count", "density_km-2", "env_lo", "env_hi")

# Upper limit of the number of resampled values held in memory at once
_CHUNK_VALUES = 1 << 22


def nearest_rank(sorted_values: np.ndarray, p: float, axis: int = 0) -> np.ndarray:
    """
    Nearest-rank p-quantile of values sorted along `axis`
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("Quantile level {} is not a probability".format(p))
    n = sorted_values.shape[axis]
    rank = min(max(1, math.ceil(p * n)), n)
    return np.take(sorted_values, rank - 1, axis=axis)


class BootstrapTable(NamedTuple):
    """
    Quantiles of a statistic over bootstrap resamples
    """

    statistic: Statistic
    n_resamples: int
    levels: Tuple[float, ...]
    quantiles: Tuple[float, ...]

    def quantile(self, level: float) -> float:
        try:
            return self.quantiles[self.levels.index(level)]
        except ValueError as e:
            raise KeyError("No quantile at level {}".format(level)) from e

    @property
    def lower_bound(self) -> float:
        """
        The lowest reported quantile, i.e. the value the statistic exceeds with bootstrap probability ≥ 95%
        """
        return self.quantiles[0]

    @property
    def median(self) -> float:
        return self.quantile(0.5)


def _statistic(samples: np.ndarray, statistic: Statistic) -> np.ndarray:
    if statistic is Statistic.MEDIAN:
        return np.median(samples, axis=1)
    if statistic is Statistic.MEAN:
        return np.mean(samples, axis=1)
    return np.sum(samples, axis=1)


def bootstrap(
    values: Sequence[float],
    rng: np.random.Generator,
    statistic: Statistic = Statistic.MEDIAN,
    n_resamples: int = 10000,
    levels: Sequence[float] = QUANTILE_LEVELS,
) -> BootstrapTable:
    """
    Bootstrap a statistic of `values`: draw `n_resamples` resamples of size len(values) with replacement, compute the
    statistic of each and report its nearest-rank quantiles.

    :raises DistributionDomainError: if `values` is empty or contains NaN
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DistributionDomainError("Cannot bootstrap an empty sample")
    if np.any(np.isnan(values)):
        raise DistributionDomainError("Cannot bootstrap a sample containing NaN")
    if n_resamples < 1:
        raise ValueError("At least one resample is required")
    n = values.size
    stats = np.empty(n_resamples)
    chunk = max(1, _CHUNK_VALUES // n)
    for start in range(0, n_resamples, chunk):
        rows = min(chunk, n_resamples - start)
        samples = values[rng.integers(0, n, size=(rows, n))]
        stats[start : start + rows] = _statistic(samples, statistic)
    stats.sort()
    quantiles = tuple(float(nearest_rank(stats, p)) for p in levels)
    logger.debug("Bootstrapped %s of %s values with %s resamples: %s", statistic.value, n, n_resamples, quantiles)
    return BootstrapTable(statistic, n_resamples, tuple(levels), quantiles)


class DensityBins(NamedTuple):
    """
    Frequency density of landslide areas in logarithmic bins
    """

    #: Bin edges (km²), n_bins + 1 values
    edges: np.ndarray
    counts: np.ndarray
    #: count / (n_total · width), in km⁻²
    density: np.ndarray
    n_total: int
    #: Lower bootstrap envelope of the density, if computed
    env_lo: Optional[np.ndarray] = None
    env_hi: Optional[np.ndarray] = None

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        """
        Geometric bin centers
        """
        return np.sqrt(self.edges[:-1] * self.edges[1:])

    def total_probability(self) -> float:
        return math.fsum((self.density * self.widths).tolist())


def decade_edges(lo: float, hi: float, bins_per_decade: int) -> np.ndarray:
    """
    Logarithmic bin edges 10^(k/bins_per_decade), aligned to decades, with lo ≥ edges[0] and hi < edges[-1]
    """
    k_lo = math.floor(math.log10(lo) * bins_per_decade)
    k_hi = math.ceil(math.log10(hi) * bins_per_decade)
    while 10 ** (k_lo / bins_per_decade) > lo:
        k_lo -= 1
    while 10 ** (k_hi / bins_per_decade) <= hi:
        k_hi += 1
    return np.array([10 ** (k / bins_per_decade) for k in range(k_lo, k_hi + 1)])


def density_bins(areas: Sequence[float], n_total: Optional[int] = None, bins_per_decade: int = 10) -> DensityBins:
    """
    Bin landslide areas into logarithmic bins and normalize the counts to a frequency density, comparable to the
    probability density of the area distribution.

    :param areas: Landslide areas in km²
    :param n_total: Total number of landslides to normalize by. Defaults to the number of areas.
    :param bins_per_decade: Number of bins per factor of ten
    :raises DistributionDomainError: if an area is not positive or there are no areas
    """
    areas = np.asarray(areas, dtype=np.float64)
    if areas.size == 0:
        raise DistributionDomainError("No landslide areas to bin")
    if not np.all(areas > 0) or not np.all(np.isfinite(areas)):
        raise DistributionDomainError("Landslide areas must be positive and finite")
    if bins_per_decade < 1:
        raise ValueError("bins_per_decade must be positive")
    if n_total is None:
        n_total = int(areas.size)
    if n_total < 1:
        raise ValueError("n_total must be positive")
    edges = decade_edges(float(areas.min()), float(areas.max()), bins_per_decade)
    idx = np.searchsorted(edges, areas, side="right") - 1
    counts = np.bincount(idx, minlength=edges.size - 1)
    density = counts / (n_total * np.diff(edges))
    return DensityBins(edges, counts, density, n_total)


def density_envelopes(
    bins: DensityBins, rng: np.random.Generator, n_resamples: int = 1000, levels: Tuple[float, float] = (0.05, 0.95)
) -> DensityBins:
    """
    Add bootstrap envelopes to the density: resampling the binned areas with replacement is equivalent to drawing the
    bin counts from a multinomial law with the observed bin frequencies.
    """
    n = int(bins.counts.sum())
    resampled = rng.multinomial(n, bins.counts / n, size=n_resamples)
    densities = np.sort(resampled / (bins.n_total * bins.widths), axis=0)
    return bins._replace(env_lo=nearest_rank(densities, levels[0]), env_hi=nearest_rank(densities, levels[1]))


def write_density_csv(bins: DensityBins, path: Union[str, Path]) -> None:
    header = DENSITY_HEADER if bins.env_lo is not None else DENSITY_HEADER[:4]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for h in range(len(bins.counts)):
            row = [
                "{:.10g}".format(bins.edges[h]),
                "{:.10g}".format(bins.edges[h + 1]),
                int(bins.counts[h]),
                "{:.10g}".format(bins.density[h]),
            ]
            if bins.env_lo is not None and bins.env_hi is not None:
                row += ["{:.10g}".format(bins.env_lo[h]), "{:.10g}".format(bins.env_hi[h])]
            writer.writerow(row)


def read_areas(path: Union[str, Path]) -> np.ndarray:
    """
    Read a list of landslide areas (km²): one value per line, optionally headed by ``area_km2``. Blank lines and
    ``#`` comments are ignored.

    :raises ValueError: for unparsable lines, naming the file and line
    """
    areas = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            text = line.split("#", 1)[0].strip()
            if not text or (not areas and text == "area_km2"):
                continue
            try:
                areas.append(float(text))
            except ValueError as e:
                raise ValueError("{}:{}: invalid area {!r}".format(path, line_no, text)) from e
    return np.array(areas)


def write_areas(areas: Sequence[float], path: Union[str, Path]) -> None:
    with open(path, "w") as f:
        f.write("area_km2\n")
        for area in areas:
            f.write("{!r}\n".format(float(area)))
