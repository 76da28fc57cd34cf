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
Summary reports of a simulation: the bootstrap table of footprint soil loss and affected area (``summary.csv``), the
headline numbers (``headline.txt``) and the run metadata (``run_metadata.txt``).
"""
import csv
import logging
import statistics
from pathlib import Path
from typing import NamedTuple, Sequence, List, Tuple, Union, Any

import jinja2
import numpy as np

from slec.datatypes import Statistic
from slec.montecarlo import IterationResult, summarize
from slec.stats import BootstrapTable, bootstrap, QUANTILE_LEVELS

logger = logging.getLogger(__name__)

jinja_env = jinja2.Environment(
    loader=jinja2.PackageLoader("slec", "templates"),
    autoescape=False,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)

#: Header of the summary CSV file
SUMMARY_HEADER = ("quantile", "footprint_pre_loss_t", "footprint_post_loss_t", "landslide_area_ha")
#: Spawn key prefix of the bootstrap random streams
BOOTSTRAP_STREAM = 1


class SummaryReport(NamedTuple):
    """
    Bootstrap tables of the footprint soil loss before and after the landslides and of the affected area, plus the
    derived headline numbers
    """

    footprint_pre: BootstrapTable
    footprint_post: BootstrapTable
    area: BootstrapTable
    increase: BootstrapTable
    catchment_area_ha: float
    headline: List[Tuple[str, Any]]

    def rows(self) -> List[Tuple[str, str, str, str]]:
        """
        Rows of the summary table: quantile, footprint pre- and post-failure soil loss, area with share of the
        catchment
        """
        rows = []
        for i, level in enumerate(self.area.levels):
            area = self.area.quantiles[i]
            rows.append(
                (
                    "{:g}%".format(level * 100),
                    format_value(self.footprint_pre.quantiles[i]),
                    format_value(self.footprint_post.quantiles[i]),
                    "{:.2f} ({:.2f}%)".format(area, 100 * area / self.catchment_area_ha),
                )
            )
        return rows


def format_value(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return "{:.10g}".format(value)
    return str(value)


def bootstrap_rng(seed: int, table: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(BOOTSTRAP_STREAM, table))))


def _ratios(results: Sequence[IterationResult], attr: str) -> List[float]:
    ratios = [getattr(r, attr) for r in results]
    valid = [r for r in ratios if r == r]
    if len(valid) < len(ratios):
        logger.warning("%s runs excluded from the %s: zero pre-failure soil loss", len(ratios) - len(valid), attr)
    return valid


def summary_report(
    results: Sequence[IterationResult],
    catchment_area_ha: float,
    seed: int,
    statistic: Statistic = Statistic.MEDIAN,
    n_resamples: int = 10000,
) -> SummaryReport:
    """
    Bootstrap the per-run results and derive the headline numbers.

    :param results: Per-iteration results, at least one
    :param catchment_area_ha: Area of the catchment, for the affected share
    :param seed: Master seed. The bootstrap streams are independent of the simulation streams.
    :param statistic: Statistic of the run values computed on each resample
    :param n_resamples: Number of bootstrap resamples
    """
    if not results:
        raise ValueError("Cannot report on an empty list of results")
    if not catchment_area_ha > 0:
        raise ValueError("Catchment area must be positive")

    def boot(values: List[float], table: int) -> BootstrapTable:
        return bootstrap(values, bootstrap_rng(seed, table), statistic, n_resamples, QUANTILE_LEVELS)

    footprint_pre = boot([r.landslide_pixel_pre_t for r in results], 0)
    footprint_post = boot([r.landslide_pixel_post_t for r in results], 1)
    area = boot([r.landslide_union_area_ha for r in results], 2)
    increase = boot([r.increase_t for r in results], 3)

    total_ratios = _ratios(results, "total_ratio")
    footprint_ratios = _ratios(results, "footprint_ratio")
    median_total_ratio = statistics.median(total_ratios) if total_ratios else float("nan")
    totals = summarize(results)
    headline: List[Tuple[str, Any]] = [
        ("n_iterations", len(results)),
        ("median_pre_total_t", totals.median_pre_t),
        ("median_post_total_t", totals.median_post_t),
        ("mean_pre_total_t", totals.mean_pre_t),
        ("mean_post_total_t", totals.mean_post_t),
        ("median_total_ratio", median_total_ratio),
        ("total_increase_pct", 100 * (median_total_ratio - 1)),
        ("median_footprint_ratio", statistics.median(footprint_ratios) if footprint_ratios else float("nan")),
        ("median_increase_t", statistics.median(r.increase_t for r in results)),
        ("increase_lower_bound_t", increase.lower_bound),
        ("area_lower_bound_ha", area.lower_bound),
        ("area_lower_bound_pct", 100 * area.lower_bound / catchment_area_ha),
        ("bootstrap_statistic", statistic.value),
        ("bootstrap_resamples", n_resamples),
    ]
    return SummaryReport(footprint_pre, footprint_post, area, increase, catchment_area_ha, headline)


def render_key_values(title: str, items: Sequence[Tuple[str, Any]]) -> str:
    template = jinja_env.get_template("keyvalue.txt")
    return template.render(title=title, items=[(key, format_value(value)) for key, value in items])


def write_summary_csv(report: SummaryReport, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        writer.writerows(report.rows())


def write_headline(report: SummaryReport, path: Union[str, Path]) -> None:
    Path(path).write_text(render_key_values("Headline numbers of the landslide erosion simulation", report.headline))


def write_run_metadata(items: Sequence[Tuple[str, Any]], path: Union[str, Path]) -> None:
    Path(path).write_text(render_key_values("Run metadata", items))


def read_key_values(path: Union[str, Path]) -> List[Tuple[str, str]]:
    """
    Read a key-value file as written by :func:`render_key_values`, skipping comments
    """
    items = []
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, _, value = line.partition("=")
        items.append((key.strip(), value.strip()))
    return items


def write_report(report: SummaryReport, out_dir: Union[str, Path]) -> None:
    out_dir = Path(out_dir)
    write_summary_csv(report, out_dir / "summary.csv")
    write_headline(report, out_dir / "headline.txt")
    logger.info("Wrote summary report to %s", out_dir)
