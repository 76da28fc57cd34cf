import unittest

import numpy as np

from slec import landslides, stats
from slec.datatypes import Statistic
from slec.landslides import DistributionDomainError, InverseGammaParams
from ._helper import TempDirTestCase


class NearestRankTest(unittest.TestCase):
    def test_ranks(self) -> None:
        values = np.arange(1.0, 11.0)
        self.assertEqual(1.0, stats.nearest_rank(values, 0.0))
        self.assertEqual(1.0, stats.nearest_rank(values, 0.05))
        self.assertEqual(3.0, stats.nearest_rank(values, 0.25))
        self.assertEqual(5.0, stats.nearest_rank(values, 0.5))
        self.assertEqual(10.0, stats.nearest_rank(values, 0.95))
        self.assertEqual(10.0, stats.nearest_rank(values, 1.0))
        with self.assertRaises(ValueError):
            stats.nearest_rank(values, 1.5)

    def test_axis(self) -> None:
        values = np.sort(np.random.default_rng(1).uniform(size=(20, 3)), axis=0)
        self.assertEqual(values[9].tolist(), stats.nearest_rank(values, 0.5).tolist())


class BootstrapTest(unittest.TestCase):
    def test_constant(self) -> None:
        for statistic in Statistic:
            with self.subTest(statistic=statistic):
                table = stats.bootstrap([2.5] * 40, np.random.default_rng(0), statistic, 200)
                expected = 100.0 if statistic is Statistic.TOTAL else 2.5
                self.assertEqual((expected,) * 5, table.quantiles)

    def test_quantiles(self) -> None:
        values = np.random.default_rng(3).lognormal(0, 1, 1000)
        table = stats.bootstrap(values, np.random.default_rng(4), n_resamples=5000)
        self.assertEqual(stats.QUANTILE_LEVELS, table.levels)
        self.assertEqual(5000, table.n_resamples)
        self.assertEqual(Statistic.MEDIAN, table.statistic)
        self.assertEqual(sorted(table.quantiles), list(table.quantiles))
        self.assertTrue(values.min() <= table.lower_bound <= table.median <= values.max())
        self.assertAlmostEqual(float(np.median(values)), table.median, delta=0.1)
        self.assertEqual(table.quantiles[2], table.quantile(0.5))
        with self.assertRaises(KeyError):
            table.quantile(0.1)

    def test_deterministic(self) -> None:
        values = np.random.default_rng(5).normal(size=50)
        self.assertEqual(
            stats.bootstrap(values, np.random.default_rng(6), Statistic.MEAN, 300),
            stats.bootstrap(values, np.random.default_rng(6), Statistic.MEAN, 300),
        )

    def test_single_value(self) -> None:
        table = stats.bootstrap([7.0], np.random.default_rng(0), n_resamples=10)
        self.assertEqual((7.0,) * 5, table.quantiles)

    def test_invalid(self) -> None:
        with self.assertRaises(DistributionDomainError):
            stats.bootstrap([], np.random.default_rng(0))
        with self.assertRaises(DistributionDomainError):
            stats.bootstrap([1.0, float("nan")], np.random.default_rng(0))
        with self.assertRaises(ValueError):
            stats.bootstrap([1.0], np.random.default_rng(0), n_resamples=0)


class DensityTest(unittest.TestCase):
    def test_edges(self) -> None:
        edges = stats.decade_edges(1e-3, 0.5, 10)
        self.assertLessEqual(edges[0], 1e-3)
        self.assertGreater(edges[-1], 0.5)
        self.assertEqual(28, edges.size)
        self.assertTrue(np.allclose(np.diff(np.log10(edges)), 0.1))

    def test_single_bin(self) -> None:
        bins = stats.density_bins([1.5e-3] * 100)
        self.assertEqual(100, int(bins.counts.sum()))
        self.assertEqual(1, int(np.count_nonzero(bins.counts)))
        self.assertAlmostEqual(1.0, bins.total_probability())

        half = stats.density_bins([1.5e-3] * 100, n_total=200)
        self.assertAlmostEqual(0.5, half.total_probability())

    def test_known_density(self) -> None:
        # 10 areas in the bin [1, 10^0.1) of width 10^0.1 − 1
        bins = stats.density_bins([1.0, 1.1, 1.2] + [1.05] * 7, bins_per_decade=10)
        self.assertEqual([10], bins.counts.tolist())
        self.assertAlmostEqual(1 / (10**0.1 - 1), float(bins.density[0]))
        self.assertAlmostEqual(10**0.05, float(bins.centers[0]))

    def test_refinement(self) -> None:
        areas = landslides.sample_areas(InverseGammaParams(), np.random.default_rng(8), 20_000, 1e-5, 1.0)
        coarse = stats.density_bins(areas, bins_per_decade=5)
        fine = stats.density_bins(areas, bins_per_decade=10)
        fine_mass = fine.density * fine.widths
        for h in range(coarse.counts.size):
            inside = (fine.edges[:-1] >= coarse.edges[h]) & (fine.edges[1:] <= coarse.edges[h + 1])
            self.assertEqual(int(coarse.counts[h]), int(fine.counts[inside].sum()))
            self.assertAlmostEqual(coarse.density[h] * coarse.widths[h], float(fine_mass[inside].sum()), delta=1e-12)

    def test_matches_pdf(self) -> None:
        params = InverseGammaParams()
        lo, hi = 2.5e-5, 1.0
        areas = landslides.sample_areas(params, np.random.default_rng(21), 1_000_000, lo, hi)
        bins = stats.density_bins(areas)
        mass = landslides.cdf(params, hi) - landslides.cdf(params, lo)
        well_populated = bins.counts >= 10_000
        self.assertGreater(int(np.count_nonzero(well_populated)), 5)
        expected = np.asarray(landslides.pdf(params, bins.centers[well_populated])) / mass
        self.assertTrue(np.allclose(bins.density[well_populated], expected, rtol=0.05, atol=0))

    def test_envelopes(self) -> None:
        areas = landslides.sample_areas(InverseGammaParams(), np.random.default_rng(9), 5000, 1e-5, 1.0)
        bins = stats.density_envelopes(stats.density_bins(areas), np.random.default_rng(10), n_resamples=500)
        assert bins.env_lo is not None and bins.env_hi is not None
        self.assertTrue(np.all(bins.env_lo <= bins.env_hi))
        self.assertTrue(np.all(bins.env_lo >= 0))
        populated = bins.counts >= 100
        self.assertTrue(np.all(bins.env_lo[populated] <= bins.density[populated]))
        self.assertTrue(np.all(bins.density[populated] <= bins.env_hi[populated]))
        self.assertTrue(np.all(bins.env_hi[bins.counts == 0] == 0))

    def test_invalid(self) -> None:
        with self.assertRaises(DistributionDomainError):
            stats.density_bins([])
        with self.assertRaises(DistributionDomainError):
            stats.density_bins([1e-3, 0.0])
        with self.assertRaises(ValueError):
            stats.density_bins([1e-3], bins_per_decade=0)


class DensityFileTest(TempDirTestCase):
    def test_density_csv(self) -> None:
        bins = stats.density_bins([1.0, 1.05, 2.0], n_total=4, bins_per_decade=10)
        path = self.tmp / "density.csv"
        stats.write_density_csv(bins, path)
        lines = path.read_text().splitlines()
        self.assertEqual("bin_lo_km2,bin_hi_km2,count,density_km-2", lines[0])
        self.assertEqual(bins.counts.size + 1, len(lines))
        self.assertTrue(lines[1].startswith("1,1.258925412,2,"))

        stats.write_density_csv(stats.density_envelopes(bins, np.random.default_rng(0), 10), path)
        self.assertEqual(",".join(stats.DENSITY_HEADER), path.read_text().splitlines()[0])

    def test_areas(self) -> None:
        path = self.tmp / "areas.txt"
        stats.write_areas([1e-3, 2.5e-4], path)
        self.assertEqual("area_km2\n0.001\n0.00025\n", path.read_text())
        self.assertEqual([1e-3, 2.5e-4], stats.read_areas(path).tolist())

        path.write_text("# inventory\n0.5\n\n0.25  # large\n")
        self.assertEqual([0.5, 0.25], stats.read_areas(path).tolist())

        path.write_text("0.5\nlarge\n")
        with self.assertRaises(ValueError) as ctx:
            stats.read_areas(path)
        self.assertIn(":2:", str(ctx.exception))
