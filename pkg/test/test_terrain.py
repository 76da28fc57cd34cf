import math
import unittest

import numpy as np

from slec import terrain
from slec.datatypes import FlowLengthMode
from slec.raster import Raster, ShapeMismatchError
from slec.terrain import FlowField, FlowRoutingError
from ._helper import header, plane_dem


def angular_distance(a: np.ndarray, b: float) -> np.ndarray:
    d = np.abs(np.mod(a - b, 2 * math.pi))
    return np.minimum(d, 2 * math.pi - d)


class SlopeAspectTest(unittest.TestCase):
    def test_plane(self) -> None:
        for k in range(8):
            azimuth = (k + 0.3) * math.pi / 4
            with self.subTest(azimuth=azimuth):
                dem = plane_dem(6, 7, azimuth, gradient=0.25, cellsize=2.0)
                slope, aspect = terrain.slope_aspect(dem)
                self.assertTrue(np.allclose(slope.values, math.atan(0.25), rtol=0, atol=1e-12))
                self.assertLess(float(angular_distance(aspect.values, azimuth).max()), 1e-9)

    def test_flat(self) -> None:
        dem = Raster.full(header(4, 4), 10.0)
        slope, aspect = terrain.slope_aspect(dem)
        self.assertEqual(0.0, float(slope.values.max()))
        self.assertEqual(0, aspect.n_valid)

    def test_too_small(self) -> None:
        with self.assertRaises(ShapeMismatchError):
            terrain.slope_aspect(Raster.full(header(2, 5), 1.0))


class FlowDirectionTest(unittest.TestCase):
    def test_plane_angles(self) -> None:
        for k in range(8):
            azimuth = (k + 0.3) * math.pi / 4
            with self.subTest(azimuth=azimuth):
                field = terrain.dinf_directions(plane_dem(5, 5, azimuth))
                self.assertEqual(25, field.angle.n_valid)
                self.assertFalse(np.any(field.no_flow))
                self.assertLess(float(angular_distance(field.angle.values, azimuth).max()), 1e-9)
                self.assertTrue(np.allclose(field.weights.sum(axis=0), 1.0))

    def test_facet_split(self) -> None:
        field = terrain.dinf_directions(plane_dem(5, 5, math.pi / 8))
        # Interior cell: half to the east, half to the north-east neighbour
        self.assertEqual([0, 1], field.directions[:, 2, 2].tolist())
        self.assertAlmostEqual(0.5, field.weights[0, 2, 2])
        self.assertAlmostEqual(0.5, field.weights[1, 2, 2])
        self.assertEqual([2 * 5 + 3, 1 * 5 + 3], field.receivers[:, 2, 2].tolist())

    def test_cardinal_direction(self) -> None:
        field = terrain.dinf_directions(plane_dem(5, 5, 3 * math.pi / 2))
        # Flow to the south: all into the southern neighbour
        self.assertAlmostEqual(1.0, field.weights[:, 2, 2].max())
        self.assertEqual(3 * 5 + 2, field.receivers[int(np.argmax(field.weights[:, 2, 2])), 2, 2])
        # Last row drains out of the grid
        self.assertTrue(np.all(field.receivers[:, 4, :] == -1))

    def test_flat_and_pit(self) -> None:
        field = terrain.dinf_directions(Raster.full(header(4, 4), 3.0))
        self.assertTrue(np.all(field.no_flow))
        self.assertEqual(0, field.angle.n_valid)
        self.assertTrue(np.all(field.receivers == -1))

        rows, cols = np.indices((5, 5))
        bowl = Raster(header(5, 5), (rows - 2.0) ** 2 + (cols - 2.0) ** 2)
        field = terrain.dinf_directions(bowl)
        self.assertTrue(field.no_flow[2, 2])
        self.assertFalse(field.angle.mask[2, 2])
        self.assertTrue(field.mask[2, 2])
        # Neighbours of the pit drain into it
        self.assertIn(2 * 5 + 2, field.receivers[:, 2, 3].tolist())

    def test_nodata_is_not_a_receiver(self) -> None:
        values = plane_dem(5, 5, 0.0).values.copy()
        values[2, 3] = np.nan
        field = terrain.dinf_directions(Raster(header(5, 5), values))
        self.assertFalse(field.mask[2, 3])
        self.assertNotIn(2 * 5 + 3, field.receivers.ravel().tolist())


class FlowLengthTest(unittest.TestCase):
    def test_eastward_plane(self) -> None:
        dem = plane_dem(3, 100, 0.0, gradient=0.05, cellsize=5.0)
        field = terrain.dinf_directions(dem)
        length = terrain.flow_length(field, 5.0)
        expected = np.tile(np.arange(100) * 5.0, (3, 1))
        self.assertTrue(np.array_equal(expected, length.values))

        mean_length = terrain.flow_length(field, 5.0, FlowLengthMode.MEAN)
        self.assertTrue(np.allclose(expected, mean_length.values))

    def test_diagonal_chain(self) -> None:
        # Integer elevations falling by 1 per cell towards east and north: all flow goes to the north-east neighbour
        rows, cols = np.indices((8, 8))
        dem = Raster(header(8, 8, 5.0), 1000.0 - cols - (7 - rows))
        field = terrain.dinf_directions(dem)
        self.assertTrue(np.all(field.weights[1] == 1.0))
        length = terrain.flow_length(field, 5.0)
        steps = np.minimum(7 - rows, cols)
        self.assertTrue(np.allclose(steps * 5.0 * math.sqrt(2), length.values, rtol=1e-12, atol=0))
        self.assertAlmostEqual(5.0 * math.sqrt(2), length.values[3, 4] - length.values[4, 3], places=12)

    def test_near_cardinal_plane(self) -> None:
        cardinal = terrain.flow_length(terrain.dinf_directions(plane_dem(40, 40, 0.0, 0.05, 5.0)), 5.0)
        field = terrain.dinf_directions(plane_dem(40, 40, 1e-3, 0.05, 5.0))
        self.assertGreater(float(field.weights[1].max()), 0.0)
        rotated = terrain.flow_length(field, 5.0)
        self.assertEqual(195.0, cardinal.values[20, 39])
        self.assertTrue(np.allclose(cardinal.values, rotated.values, rtol=2e-3, atol=0))

    def test_monotone_along_flow(self) -> None:
        rng = np.random.default_rng(5)
        values = plane_dem(25, 25, 2.2, gradient=0.1).values + rng.uniform(0, 0.3, (25, 25))
        field = terrain.dinf_directions(Raster(header(25, 25), values))
        length = terrain.flow_length(field, 1.0).values.ravel()
        n_edges = 0
        for k in range(2):
            carries = (field.receivers[k] >= 0) & (field.weights[k] > 0)
            donors = np.flatnonzero(carries)
            receivers = field.receivers[k].ravel()[donors]
            n_edges += donors.size
            self.assertTrue(np.all(length[receivers] >= length[donors]))
        self.assertGreater(n_edges, 200)

    def test_mean_below_longest(self) -> None:
        rng = np.random.default_rng(3)
        values = plane_dem(15, 15, 3.5, gradient=0.2).values + rng.uniform(0, 0.1, (15, 15))
        field = terrain.dinf_directions(Raster(header(15, 15), values))
        longest = terrain.flow_length(field, 1.0)
        mean = terrain.flow_length(field, 1.0, FlowLengthMode.MEAN)
        self.assertTrue(np.all(mean.values <= longest.values + 1e-9))
        self.assertGreater(float(longest.values.max()), 10.0)

    def test_no_flow_cells(self) -> None:
        field = terrain.dinf_directions(Raster.full(header(3, 3), 1.0))
        length = terrain.flow_length(field, 1.0)
        self.assertEqual(9, length.n_valid)
        self.assertEqual(0.0, float(length.values.max()))

    def test_cycle(self) -> None:
        h = header(3, 3)
        directions = np.full((2, 3, 3), -1)
        receivers = np.full((2, 3, 3), -1)
        weights = np.zeros((2, 3, 3))
        directions[0, 0, 0], receivers[0, 0, 0], weights[0, 0, 0] = 0, 1, 1.0
        directions[0, 0, 1], receivers[0, 0, 1], weights[0, 0, 1] = 4, 0, 1.0
        field = FlowField(Raster.full(h, 0.0), directions, receivers, weights, np.zeros((3, 3), dtype=bool))
        with self.assertRaises(FlowRoutingError):
            terrain.flow_length(field, 1.0)


class FlowAccumulationTest(unittest.TestCase):
    def test_mass_balance(self) -> None:
        rng = np.random.default_rng(11)
        values = plane_dem(20, 25, 4.0, gradient=0.3, cellsize=3.0).values + rng.uniform(0, 0.5, (20, 25))
        values[rng.uniform(size=(20, 25)) < 0.05] = np.nan
        dem = Raster(header(20, 25, 3.0), values)
        field = terrain.dinf_directions(dem)
        accumulation = terrain.flow_accumulation(field, 9.0)
        leaving = terrain.outflow_fraction(field)
        self.assertTrue(np.all(accumulation.valid_values() >= 9.0))
        self.assertAlmostEqual(
            dem.n_valid * 9.0, math.fsum((np.nan_to_num(accumulation.values) * leaving).ravel()), places=6
        )

    def test_eastward_plane(self) -> None:
        field = terrain.dinf_directions(plane_dem(3, 10, 0.0))
        accumulation = terrain.flow_accumulation(field, 1.0)
        self.assertTrue(np.allclose(np.tile(np.arange(1, 11, dtype=float), (3, 1)), accumulation.values))
