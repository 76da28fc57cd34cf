import math
import statistics
import unittest
from typing import Sequence

import numpy as np
import scipy.integrate

from slec import erosion, landslides, montecarlo, raster, stats
from slec.datatypes import PositiveFloat, PositiveInt, Proportion, SeedInt, Statistic
from slec.landslides import EligibilityMask, InverseGammaParams, LandslideEvent, PlacementError
from slec.montecarlo import CatchmentModel, IterationError, IterationResult, SimulationConfig
from slec.raster import Raster, ShapeMismatchError
from ._helper import header, constant, unit_stack, random_raster, TempDirTestCase


def event(cells: Sequence[int], fractions: Sequence[float], area_km2: float = 1e-4) -> LandslideEvent:
    footprint = np.array(sorted(cells), dtype=np.intp)
    return LandslideEvent(area_km2, int(footprint[0]), footprint, np.array(fractions, dtype=float))


def random_stack(nrows: int, ncols: int, cellsize: float, seed: int) -> erosion.FactorStack:
    h = header(nrows, ncols, cellsize)
    return unit_stack(h)._replace(
        R=random_raster(h, seed, 500.0, 1500.0, nodata_share=0.05),
        K=random_raster(h, seed + 1, 0.01, 0.05),
        L=random_raster(h, seed + 2, 0.5, 3.0),
        S=random_raster(h, seed + 3, 0.0, 8.0),
        C=random_raster(h, seed + 4, 0.0, 0.4),
    )


def sim_config(n_landslides: int, seed: int, n_iterations: int, **kwargs) -> SimulationConfig:
    return SimulationConfig(PositiveInt(n_landslides), SeedInt(seed), PositiveInt(n_iterations), **kwargs)


class CoverPatchTest(unittest.TestCase):
    def test_mix(self) -> None:
        c_pre = constant(header(3, 3), 0.2)
        patched = montecarlo.patch_c_factor(c_pre, [event([4], [0.2])], 1.0)
        self.assertAlmostEqual(0.36, patched.values[1, 1])
        self.assertEqual(8, int(np.count_nonzero(patched.values == 0.2)))

        patched = montecarlo.patch_c_factor(c_pre, [event([0, 1], [1.0, 0.0])], 1.0)
        self.assertAlmostEqual(1.0, patched.values[0, 0])
        self.assertEqual(0.2, patched.values[0, 1])

    def test_no_events(self) -> None:
        c_pre = random_raster(header(4, 4), 1, nodata_share=0.2)
        self.assertTrue(c_pre.equals(montecarlo.patch_c_factor(c_pre, [], 1.0)))

    def test_overlap_takes_largest_fraction(self) -> None:
        cells, fractions = montecarlo.merge_footprints([event([1, 2, 3], [0.3, 0.9, 0.5]), event([3, 4], [0.7, 0.4])])
        self.assertEqual([1, 2, 3, 4], cells.tolist())
        self.assertEqual([0.3, 0.9, 0.7, 0.4], fractions.tolist())

    def test_invalid_cell(self) -> None:
        c_pre = Raster(header(2, 2), np.array([[0.2, np.nan], [0.2, 0.2]]))
        with self.assertRaises(PlacementError):
            montecarlo.patch_c_factor(c_pre, [event([1], [0.5])], 1.0)
        with self.assertRaises(PlacementError):
            montecarlo.patch_c_factor(c_pre, [event([7], [0.5])], 1.0)

    def test_clamped(self) -> None:
        mixed = montecarlo.mix_cover(np.array([0.0, 0.5, 1.0]), np.array([1.0, 0.5, 0.3]), 1.0)
        self.assertEqual([1.0, 0.75, 1.0], mixed.tolist())


class ExactSumTest(unittest.TestCase):
    def test_partials(self) -> None:
        values = np.random.default_rng(4).normal(0, 1e10, 5000).tolist() + [1e-8, -1e-8, 3.0]
        more = [1e-3, -7.5, 1e12]
        partials = montecarlo.exact_partials(values)
        self.assertEqual(math.fsum(values), math.fsum(partials))
        self.assertEqual(math.fsum(values + more), math.fsum(partials + more))
        self.assertEqual([], montecarlo.exact_partials([]))


class CatchmentModelTest(unittest.TestCase):
    def test_incremental_totals_are_exact(self) -> None:
        stack = random_stack(40, 50, 5.0, 10)
        model = CatchmentModel.from_factors(stack)
        valid = model.valid.reshape(-1)
        config = sim_config(20, 3, 5, max_area_km2=PositiveFloat(0.005))
        self.assertAlmostEqual(raster.total(erosion.erosion(stack)), model.pre_total_t, delta=1e-9 * model.pre_total_t)

        for run_index in range(5):
            events = montecarlo.draw_events(config, model, run_index)
            result = model.evaluate(run_index, events, 1.0)
            c_post = montecarlo.patch_c_factor(stack.C, events, 1.0)
            full = model.bare_loss * c_post.values.reshape(-1) * model.cell_area_ha
            self.assertEqual(math.fsum(full[valid].tolist()), result.post_total_t)
            self.assertEqual(math.fsum(model.pre_loss[valid].tolist()), result.pre_total_t)

            recomputed = raster.total(erosion.erosion(stack._replace(C=c_post)))
            self.assertAlmostEqual(recomputed, result.post_total_t, delta=1e-9 * recomputed)

            cells, _fractions = montecarlo.merge_footprints(events)
            self.assertAlmostEqual(cells.size * 25.0 / 10_000, result.landslide_union_area_ha)
            self.assertAlmostEqual(
                result.post_total_t - result.pre_total_t,
                result.landslide_pixel_post_t - result.landslide_pixel_pre_t,
                delta=1e-9 * result.pre_total_t,
            )

    def test_eligible_cells_must_be_valid(self) -> None:
        h = header(2, 2)
        bare_loss = np.array([[1.0, np.nan], [1.0, 1.0]])
        with self.assertRaises(ShapeMismatchError):
            CatchmentModel(h, bare_loss, np.full((2, 2), 0.2), EligibilityMask(h, np.ones((2, 2), dtype=bool)))

        eligible = EligibilityMask(h, np.array([[False, True], [True, True]]))
        model = CatchmentModel.from_factors(unit_stack(h)._replace(R=Raster(h, bare_loss)), eligible)
        self.assertEqual([2, 3], model.eligible.indices.tolist())

    def test_bare_cover_equal_to_pre_failure_cover(self) -> None:
        model = CatchmentModel.from_factors(unit_stack(header(30, 30, 5.0), R=800.0, K=0.035, C=0.2))
        config = sim_config(10, 8, 5, c_bare=Proportion(0.2), max_area_km2=PositiveFloat(0.005))
        for run_index in range(5):
            result = montecarlo.run_iteration(config, model, run_index)
            self.assertEqual(result.pre_total_t, result.post_total_t)
            self.assertEqual(result.landslide_pixel_pre_t, result.landslide_pixel_post_t)
            self.assertGreater(result.landslide_union_area_ha, 0.0)


class IterationTest(unittest.TestCase):
    def setUp(self) -> None:
        self.model = CatchmentModel.from_factors(random_stack(30, 30, 5.0, 20))

    def test_deterministic(self) -> None:
        config = sim_config(8, 1234, 3, max_area_km2=PositiveFloat(0.005))
        self.assertEqual(
            montecarlo.run_iteration(config, self.model, 2), montecarlo.run_iteration(config, self.model, 2)
        )
        self.assertNotEqual(
            montecarlo.run_iteration(config, self.model, 1).areas_km2,
            montecarlo.run_iteration(config, self.model, 2).areas_km2,
        )
        other_seed = config._replace(seed=SeedInt(1235))
        self.assertNotEqual(
            montecarlo.run_iteration(config, self.model, 2), montecarlo.run_iteration(other_seed, self.model, 2)
        )

    def test_landslide_count(self) -> None:
        config = sim_config(8, 99, 1, max_area_km2=PositiveFloat(0.005))
        self.assertEqual(8, len(montecarlo.run_iteration(config, self.model, 0).areas_km2))

        poisson = config._replace(poisson_count=True)
        counts = [montecarlo.landslide_count(poisson, i) for i in range(400)]
        self.assertAlmostEqual(8.0, statistics.mean(counts), delta=0.5)
        self.assertGreater(len(set(counts)), 3)
        self.assertEqual(counts[17], len(montecarlo.run_iteration(poisson, self.model, 17).areas_km2))

    def test_sampled_areas(self) -> None:
        config = sim_config(50, 5, 1, max_area_km2=PositiveFloat(0.002))
        areas = montecarlo.run_iteration(config, self.model, 0).areas_km2
        self.assertTrue(all(25e-6 <= a <= 0.002 for a in areas))

    def test_failure(self) -> None:
        model = CatchmentModel.from_factors(unit_stack(header(3, 3)))
        config = sim_config(3, 1, 4)
        with self.assertRaises(IterationError) as ctx:
            montecarlo.run_iteration(config, model, 7)
        self.assertEqual(7, ctx.exception.run_index)
        self.assertIsInstance(ctx.exception.__cause__, PlacementError)
        self.assertIn("Iteration 7", str(ctx.exception))

        with self.assertRaises(IterationError):
            montecarlo.run_simulation(config, model, threads=2)


class SimulationTest(unittest.TestCase):
    def test_independent_of_threads(self) -> None:
        model = CatchmentModel.from_factors(random_stack(30, 40, 5.0, 30))
        config = sim_config(10, 77, 24, max_area_km2=PositiveFloat(0.005))
        single = montecarlo.run_simulation(config, model, threads=1)
        multi = montecarlo.run_simulation(config, model, threads=4)
        self.assertEqual(single, multi)
        self.assertEqual(list(range(24)), [r.run_index for r in multi.results])
        self.assertEqual(24, multi.summary.n_iterations)

    def test_monotone(self) -> None:
        model = CatchmentModel.from_factors(random_stack(30, 30, 5.0, 40))
        outcome = montecarlo.run_simulation(sim_config(15, 3, 30, max_area_km2=PositiveFloat(0.005)), model)
        for r in outcome.results:
            self.assertGreaterEqual(r.post_total_t, r.pre_total_t)
            self.assertGreaterEqual(r.landslide_pixel_post_t, r.landslide_pixel_pre_t)
            self.assertGreaterEqual(r.total_ratio, 1.0)
        self.assertGreaterEqual(outcome.summary.median_post_t, outcome.summary.median_pre_t)

    def test_footprint_ratio(self) -> None:
        # With C = 0.2 and bare fractions uniform in [0.2, 1], the footprint loss grows by 1 + 4·0.6
        model = CatchmentModel.from_factors(unit_stack(header(100, 100, 5.0), R=800.0, K=0.035, C=0.2))
        outcome = montecarlo.run_simulation(sim_config(5, 11, 200, max_area_km2=PositiveFloat(0.01)), model)
        median_ratio = statistics.median(r.footprint_ratio for r in outcome.results)
        self.assertAlmostEqual(3.4, median_ratio, delta=0.1)

    def test_coverage(self) -> None:
        params = InverseGammaParams()
        h = header(200, 200, 5.0)
        lo, hi = h.cell_area_km2, 0.01
        first_moment, _err = scipy.integrate.quad(lambda x: x * landslides.pdf(params, x), lo, hi, limit=200)
        mean_area = first_moment / (landslides.cdf(params, hi) - landslides.cdf(params, lo))
        catchment_km2 = 200 * 200 * h.cell_area_km2
        n = 40
        expected_ha = 100 * catchment_km2 * (1 - math.exp(-n * mean_area / catchment_km2))

        model = CatchmentModel.from_factors(unit_stack(h, C=0.1))
        outcome = montecarlo.run_simulation(sim_config(n, 2024, 100, max_area_km2=PositiveFloat(hi)), model, threads=2)
        mean_union = statistics.mean(r.landslide_union_area_ha for r in outcome.results)
        self.assertAlmostEqual(expected_ha, mean_union, delta=0.15 * expected_ha)

    def test_invalid_config(self) -> None:
        model = CatchmentModel.from_factors(unit_stack(header(5, 5)))
        with self.assertRaises(ValueError):
            montecarlo.run_simulation(sim_config(1, 1, 1, c_bare=1.5), model)
        with self.assertRaises(ValueError):
            montecarlo.run_simulation(sim_config(1, 1, 1), model, threads=0)


class ConvergenceTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.model = CatchmentModel.from_factors(unit_stack(header(50, 50, 5.0), R=800.0, K=0.035, C=0.2))
        cls.config = sim_config(10, 515, 1000, max_area_km2=PositiveFloat(0.002))
        cls.outcome = montecarlo.run_simulation(cls.config, cls.model, threads=4)

    def test_prefix_of_longer_run(self) -> None:
        shorter = montecarlo.run_simulation(self.config._replace(n_iterations=PositiveInt(250)), self.model, threads=2)
        self.assertEqual(self.outcome.results[:250], shorter.results)

    def test_median_self_convergence(self) -> None:
        half = statistics.median(r.post_total_t for r in self.outcome.results[:500])
        full = self.outcome.summary.median_post_t
        self.assertGreater(full, self.outcome.summary.median_pre_t)
        self.assertLess(abs(full - half) / full, 0.01)

    def test_bootstrap_interval_shrinks(self) -> None:
        def half_width(n: int) -> float:
            table = stats.bootstrap(
                [r.post_total_t for r in self.outcome.results[:n]],
                np.random.default_rng(n),
                Statistic.MEAN,
                n_resamples=2000,
                levels=(0.05, 0.5, 0.95),
            )
            return (table.quantile(0.95) - table.quantile(0.05)) / 2

        narrow, wide = half_width(1000), half_width(250)
        self.assertGreater(narrow, 0.0)
        self.assertLess(narrow, 0.75 * wide)


class ResultTest(TempDirTestCase):
    def test_ratios(self) -> None:
        r = IterationResult(0, 10.0, 12.5, 0.75, 1.0, 3.5)
        self.assertEqual(1.25, r.total_ratio)
        self.assertEqual(3.5, r.footprint_ratio)
        self.assertEqual(2.5, r.increase_t)
        self.assertTrue(math.isnan(IterationResult(0, 0.0, 0.0, 0.0, 0.0, 0.0).total_ratio))
        self.assertTrue(math.isnan(IterationResult(0, 1.0, 1.0, 0.0, 0.0, 0.0).footprint_ratio))

    def test_summary(self) -> None:
        results = [IterationResult(i, 10.0, 10.0 + i, 0.5 * i, 1.0, 1.0 + i) for i in range(5)]
        summary = montecarlo.summarize(results)
        self.assertEqual(5, summary.n_iterations)
        self.assertEqual(12.0, summary.median_post_t)
        self.assertEqual(12.0, summary.mean_post_t)
        self.assertEqual(1.0, summary.median_union_area_ha)
        with self.assertRaises(ValueError):
            montecarlo.summarize([])

    def test_csv(self) -> None:
        results = [IterationResult(1, 10.0, 1 / 3, 0.75, 1.0, 3.5, (1e-3,)), IterationResult(0, 10.0, 12.5, 0.0, 0, 0)]
        path = self.tmp / "results.csv"
        montecarlo.write_results_csv(results, path)
        self.assertEqual(
            "run,pre_total_t,post_total_t,union_area_ha,footprint_pre_t,footprint_post_t\n"
            "0,10,12.5,0,0,0\n"
            "1,10,0.3333333333,0.75,1,3.5\n",
            path.read_text(),
        )
        read = montecarlo.read_results_csv(path)
        self.assertEqual([0, 1], [r.run_index for r in read])
        self.assertEqual(results[1], read[0])
        self.assertAlmostEqual(1 / 3, read[1].post_total_t, places=10)

    def test_csv_errors(self) -> None:
        path = self.tmp / "results.csv"
        path.write_text("run,pre,post\n0,1,2\n")
        with self.assertRaises(ValueError):
            montecarlo.read_results_csv(path)
        path.write_text(",".join(montecarlo.RESULTS_HEADER) + "\n0,1,2,3,4\n")
        with self.assertRaises(ValueError):
            montecarlo.read_results_csv(path)
        path.write_text(",".join(montecarlo.RESULTS_HEADER) + "\n0,1,2,3,4,x\n")
        with self.assertRaises(ValueError):
            montecarlo.read_results_csv(path)
