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
The Monte Carlo engine: per iteration, sample landslides, patch the cover-management factor of their footprints with
bare soil and compare the soil loss of the catchment before and after the failures.

Only C changes between iterations, so an iteration patches C on the footprint cells and updates the catchment totals
incrementally. Totals are exactly rounded sums (see :func:`exact_partials`), so the incremental totals are
bit-identical to a full recomputation and independent of summation order.
"""
import asyncio
import concurrent.futures
import csv
import itertools
import logging
import math
import statistics
from pathlib import Path
from typing import NamedTuple, List, Sequence, Tuple, Union, Iterable, Optional

import numpy as np

from slec.datatypes import Proportion, PositiveInt, SeedInt, PositiveFloat
from slec.erosion import FactorStack
from slec.landslides import (
    InverseGammaParams,
    EligibilityMask,
    LandslideEvent,
    PlacementError,
    DEFAULT_BARE_MIN,
    DEFAULT_MAX_AREA_KM2,
    place_landslide,
    sample_area,
)
from slec.raster import Raster, GridHeader, ShapeMismatchError

logger = logging.getLogger(__name__)

#: Header of the per-iteration results CSV file
RESULTS_HEADER = ("run", "pre_total_t", "post_total_t", "union_area_ha", "footprint_pre_t", "footprint_post_t")
#: Spawn key prefix of the per-iteration random streams
ITERATION_STREAM = 0


class IterationError(RuntimeError):
    """
    Raised when a Monte Carlo iteration fails. The original exception is chained as ``__cause__``.

    :ivar run_index: Index of the failing iteration
    """

    def __init__(self, run_index: int, message: str):
        super().__init__("Iteration {} failed: {}".format(run_index, message))
        self.run_index = run_index


class SimulationConfig(NamedTuple):
    """
    Parameters of the Monte Carlo experiment. Input files are part of :class:`slec.config.RunConfig`.
    """

    n_landslides: PositiveInt
    seed: SeedInt
    n_iterations: PositiveInt = PositiveInt(1000)
    #: Cover-management factor of fully bare soil
    c_bare: Proportion = Proportion(1.0)
    #: Lower bound of the per-cell bare-soil fraction
    bare_min: Proportion = Proportion(DEFAULT_BARE_MIN)
    params: InverseGammaParams = InverseGammaParams()
    #: Upper truncation of sampled landslide areas (km²)
    max_area_km2: PositiveFloat = PositiveFloat(DEFAULT_MAX_AREA_KM2)
    #: Draw the number of landslides of each iteration from a Poisson law with mean `n_landslides`
    poisson_count: bool = False

    def validate(self) -> "SimulationConfig":
        Proportion(self.c_bare)
        Proportion(self.bare_min)
        PositiveInt(self.n_iterations)
        PositiveInt(self.n_landslides)
        SeedInt(self.seed)
        PositiveFloat(self.max_area_km2)
        self.params.validate()
        return self


class IterationResult(NamedTuple):
    """
    Soil loss totals of one Monte Carlo run (t yr⁻¹)
    """

    run_index: int
    pre_total_t: float
    post_total_t: float
    landslide_union_area_ha: float
    #: Pre-failure soil loss of the footprint union
    landslide_pixel_pre_t: float
    #: Post-failure soil loss of the footprint union
    landslide_pixel_post_t: float
    #: Sampled landslide areas (km²). Not written to the results CSV.
    areas_km2: Tuple[float, ...] = ()

    @property
    def total_ratio(self) -> float:
        return self.post_total_t / self.pre_total_t if self.pre_total_t > 0 else math.nan

    @property
    def footprint_ratio(self) -> float:
        return self.landslide_pixel_post_t / self.landslide_pixel_pre_t if self.landslide_pixel_pre_t > 0 else math.nan

    @property
    def increase_t(self) -> float:
        return self.post_total_t - self.pre_total_t


class SimulationSummary(NamedTuple):
    """
    Estimators over all runs: the mean of the Monte Carlo estimator and the (more stable) median
    """

    n_iterations: int
    mean_pre_t: float
    mean_post_t: float
    median_pre_t: float
    median_post_t: float
    median_union_area_ha: float
    median_footprint_pre_t: float
    median_footprint_post_t: float


class SimulationOutcome(NamedTuple):
    results: List[IterationResult]
    summary: SimulationSummary


def exact_partials(values: Iterable[float]) -> List[float]:
    """
    Non-overlapping partial sums whose exact sum equals the exact sum of `values` (Shewchuk's algorithm, as used by
    :func:`math.fsum`).

    ``math.fsum(exact_partials(x) + more)`` is the exactly rounded sum of ``x`` and ``more``.
    """
    partials: List[float] = []
    for x in values:
        i = 0
        for y in partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                partials[i] = lo
                i += 1
            x = hi
        partials[i:] = [x]
    return partials


def merge_footprints(events: Sequence[LandslideEvent]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Union of the footprints of all events.

    :return: Sorted unique flat cell indices and the bare-soil fraction of each, the maximum over overlapping events
    """
    if not events:
        return np.empty(0, dtype=np.intp), np.empty(0)
    cells = np.concatenate([e.footprint for e in events]).astype(np.intp)
    fractions = np.concatenate([e.bare_fraction for e in events])
    order = np.argsort(cells, kind="stable")
    cells, fractions = cells[order], fractions[order]
    starts = np.flatnonzero(np.r_[True, cells[1:] != cells[:-1]])
    return cells[starts], np.maximum.reduceat(fractions, starts)


def mix_cover(c_pre: np.ndarray, bare_fraction: np.ndarray, c_bare: float) -> np.ndarray:
    """
    Cover factor of partially bare cells: f·c_bare + (1−f)·C_pre, evaluated as C_pre + f·(c_bare − C_pre) and
    clamped to [0, 1]. The result is never below C_pre if c_bare ≥ C_pre.
    """
    return np.clip(c_pre + bare_fraction * (c_bare - c_pre), 0.0, 1.0)


def _check_footprint(header: GridHeader, valid: np.ndarray, cells: np.ndarray) -> None:
    if cells.size and (cells.min() < 0 or cells.max() >= valid.size):
        raise PlacementError("Landslide footprint leaves the grid {}".format(header))
    invalid = cells[~valid[cells]]
    if invalid.size:
        row, col = divmod(int(invalid[0]), header.ncols)
        raise PlacementError("Landslide footprint covers invalid cell (row {}, col {})".format(row, col))


def patch_c_factor(c_pre: Raster, events: Sequence[LandslideEvent], c_bare: float) -> Raster:
    """
    The cover-management factor after the landslides: footprint cells are mixed with bare soil by their bare-soil
    fraction, all other cells keep C_pre.

    :raises PlacementError: if a footprint cell is invalid in `c_pre`
    """
    Proportion(c_bare)
    cells, fractions = merge_footprints(events)
    _check_footprint(c_pre.header, c_pre.mask.ravel(), cells)
    values = c_pre.values.copy()
    flat = values.reshape(-1)
    flat[cells] = mix_cover(flat[cells], fractions, c_bare)
    return c_pre.with_values(values)


class CatchmentModel:
    """
    The static part of an experiment, computed once and shared read-only by all iterations: the soil loss of bare soil
    per cell (all factors except C), the pre-failure cover factor and soil loss, and the eligible cells.

    Use :meth:`from_factors` to construct it.
    """

    def __init__(self, header: GridHeader, bare_loss: np.ndarray, c_pre: np.ndarray, eligible: EligibilityMask):
        self.header = header
        self.valid = np.isfinite(bare_loss) & np.isfinite(c_pre)
        self.cell_area_ha = header.cell_area_ha
        self.bare_loss = np.where(self.valid, bare_loss, 0.0).reshape(-1)
        self.c_pre = np.where(self.valid, c_pre, 0.0).reshape(-1)
        self.pre_loss = self.bare_loss * self.c_pre * self.cell_area_ha
        for a in (self.bare_loss, self.c_pre, self.pre_loss):
            a.setflags(write=False)
        if not np.all(self.valid.reshape(-1)[eligible.indices]):
            raise ShapeMismatchError("Eligible cells must be valid cells of the catchment")
        self.eligible = eligible
        self._pre_partials = exact_partials(self.pre_loss[self.valid.reshape(-1)].tolist())
        self.pre_total_t = math.fsum(self._pre_partials)

    @classmethod
    def from_factors(cls, stack: FactorStack, eligible: Optional[EligibilityMask] = None) -> "CatchmentModel":
        """
        :param stack: The static factors. Cells invalid in any factor are excluded from the catchment.
        :param eligible: Cells where landslides may occur. Defaults to all valid cells.
        """
        stack.validate()
        bare_loss = stack.without_cover()
        valid = bare_loss.mask & stack.C.mask
        if eligible is None:
            eligible = EligibilityMask(stack.R.header, valid)
        else:
            eligible = EligibilityMask(eligible.header, eligible.mask & valid)
        model = cls(stack.R.header, bare_loss.values, stack.C.values, eligible)
        logger.info(
            "Catchment of %s valid cells (%s eligible), pre-failure soil loss %s t/yr",
            int(np.count_nonzero(model.valid)),
            eligible.count,
            model.pre_total_t,
        )
        return model

    def post_loss(self, cells: np.ndarray, fractions: np.ndarray, c_bare: float) -> np.ndarray:
        """
        Post-failure soil loss (t yr⁻¹) of the given cells
        """
        c_post = mix_cover(self.c_pre[cells], fractions, c_bare)
        return self.bare_loss[cells] * c_post * self.cell_area_ha

    def evaluate(self, run_index: int, events: Sequence[LandslideEvent], c_bare: float) -> IterationResult:
        """
        Compute the totals of one run from its landslide events, updating the pre-failure totals on the footprint cells
        """
        cells, fractions = merge_footprints(events)
        _check_footprint(self.header, self.valid.reshape(-1), cells)
        pre = self.pre_loss[cells]
        post = self.post_loss(cells, fractions, c_bare)
        post_total = math.fsum(self._pre_partials + (-pre).tolist() + post.tolist())
        return IterationResult(
            run_index=run_index,
            pre_total_t=self.pre_total_t,
            post_total_t=post_total,
            landslide_union_area_ha=cells.size * self.cell_area_ha,
            landslide_pixel_pre_t=math.fsum(pre.tolist()),
            landslide_pixel_post_t=math.fsum(post.tolist()),
            areas_km2=tuple(e.area_km2 for e in events),
        )


def iteration_rng(seed: int, run_index: int, *draw: int) -> np.random.Generator:
    """
    The random stream of an iteration (no `draw`) or of one landslide draw within it. Streams depend only on
    (seed, run_index, draw), not on the order of execution.
    """
    seed_sequence = np.random.SeedSequence(seed, spawn_key=(ITERATION_STREAM, run_index) + draw)
    return np.random.Generator(np.random.PCG64(seed_sequence))


def landslide_count(config: SimulationConfig, run_index: int) -> int:
    if not config.poisson_count:
        return int(config.n_landslides)
    return int(iteration_rng(config.seed, run_index).poisson(config.n_landslides))


def draw_events(config: SimulationConfig, model: CatchmentModel, run_index: int) -> List[LandslideEvent]:
    events = []
    min_area = model.header.cell_area_km2
    for draw in range(landslide_count(config, run_index)):
        rng = iteration_rng(config.seed, run_index, draw)
        area = sample_area(config.params, rng, min_area_km2=min_area, max_area_km2=config.max_area_km2)
        events.append(place_landslide(area, model.eligible, rng, config.bare_min))
    return events


def run_iteration(config: SimulationConfig, model: CatchmentModel, run_index: int) -> IterationResult:
    """
    Run one Monte Carlo iteration: sample the landslides of this run and compute the pre- and post-failure totals.

    The result is a pure function of (config, model, run_index).

    :raises IterationError: if a landslide cannot be placed or a result violates its invariants
    """
    try:
        events = draw_events(config, model, run_index)
        result = model.evaluate(run_index, events, config.c_bare)
    except (PlacementError, ValueError) as e:
        raise IterationError(run_index, str(e)) from e
    if config.c_bare >= model.c_pre.max(initial=0.0) and (
        result.post_total_t < result.pre_total_t or result.landslide_pixel_post_t < result.landslide_pixel_pre_t
    ):
        raise IterationError(run_index, "post-failure soil loss below pre-failure soil loss")
    return result


async def _run_all(config: SimulationConfig, model: CatchmentModel, threads: int) -> List[IterationResult]:
    loop = asyncio.get_running_loop()
    progress = itertools.count(1)

    def run(run_index: int) -> IterationResult:
        result = run_iteration(config, model, run_index)
        done = next(progress)
        if done % 100 == 0:
            logger.info("%s of %s iterations done", done, config.n_iterations)
        return result

    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        futures = [loop.run_in_executor(executor, run, i) for i in range(config.n_iterations)]
        try:
            return list(await asyncio.gather(*futures))
        except Exception:
            for future in futures:
                future.cancel()
            raise


def summarize(results: Sequence[IterationResult]) -> SimulationSummary:
    if not results:
        raise ValueError("No iteration results to summarize")
    pre = [r.pre_total_t for r in results]
    post = [r.post_total_t for r in results]
    return SimulationSummary(
        n_iterations=len(results),
        mean_pre_t=math.fsum(pre) / len(pre),
        mean_post_t=math.fsum(post) / len(post),
        median_pre_t=statistics.median(pre),
        median_post_t=statistics.median(post),
        median_union_area_ha=statistics.median(r.landslide_union_area_ha for r in results),
        median_footprint_pre_t=statistics.median(r.landslide_pixel_pre_t for r in results),
        median_footprint_post_t=statistics.median(r.landslide_pixel_post_t for r in results),
    )


def run_simulation(config: SimulationConfig, model: CatchmentModel, threads: int = 1) -> SimulationOutcome:
    """
    Run all iterations of the experiment, concurrently on `threads` worker threads.

    Results are ordered by run index and identical for any number of threads.

    :raises IterationError: for the first failing iteration; pending iterations are cancelled
    """
    config.validate()
    if threads < 1:
        raise ValueError("At least one worker thread is required")
    logger.info(
        "Starting %s iterations with %s landslides each on %s threads (seed %s)",
        config.n_iterations,
        config.n_landslides,
        threads,
        config.seed,
    )
    results = asyncio.run(_run_all(config, model, threads))
    results.sort(key=lambda r: r.run_index)
    summary = summarize(results)
    logger.info(
        "Simulation finished: median soil loss %s t/yr before, %s t/yr after",
        summary.median_pre_t,
        summary.median_post_t,
    )
    return SimulationOutcome(results, summary)


def format_value(value: float) -> str:
    return "{:.10g}".format(value)


def write_results_csv(results: Sequence[IterationResult], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RESULTS_HEADER)
        for r in sorted(results, key=lambda r: r.run_index):
            writer.writerow(
                [
                    r.run_index,
                    format_value(r.pre_total_t),
                    format_value(r.post_total_t),
                    format_value(r.landslide_union_area_ha),
                    format_value(r.landslide_pixel_pre_t),
                    format_value(r.landslide_pixel_post_t),
                ]
            )
    logger.debug("Wrote %s results to %s", len(results), path)


def read_results_csv(path: Union[str, Path]) -> List[IterationResult]:
    """
    Read a per-iteration results CSV file, as written by :func:`write_results_csv`

    :raises ValueError: for a wrong header or unparsable rows
    """
    results = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != RESULTS_HEADER:
            raise ValueError("{}: expected header '{}'".format(path, ",".join(RESULTS_HEADER)))
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RESULTS_HEADER):
                raise ValueError("{}:{}: expected {} columns".format(path, line_no, len(RESULTS_HEADER)))
            try:
                results.append(IterationResult(int(row[0]), *(float(v) for v in row[1:])))
            except ValueError as e:
                raise ValueError("{}:{}: {}".format(path, line_no, e)) from e
    return results
