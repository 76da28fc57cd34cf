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
Terrain derivatives of a DEM: slope and aspect, D∞ flow directions and upslope flow length.

Neighbours are indexed counter-clockwise starting east: 0 = E, 1 = NE, 2 = N, 3 = NW, 4 = W, 5 = SW, 6 = S, 7 = SE.
Angles are in radians, counter-clockwise from east, in [0, 2π). Row 0 is the northernmost row.

Neighbours outside of the grid or on nodata cells are replaced by a linear extrapolation through the cell (2·z₀ − z of
the opposite neighbour), or by the cell's own elevation if the opposite neighbour is missing as well. On inclined
planes this makes edge cells as exact as interior cells. Flow towards such a neighbour leaves the grid.
"""
import logging
import math
from typing import NamedTuple, Tuple

import numpy as np

from slec.datatypes import FlowLengthMode
from slec.raster import Raster, ShapeMismatchError

logger = logging.getLogger(__name__)

ROW_OFFSETS = np.array([0, -1, -1, -1, 0, 1, 1, 1])
COL_OFFSETS = np.array([1, 1, 0, -1, -1, -1, 0, 1])

# The eight triangular facets: cardinal neighbour, diagonal neighbour, rotation base (in multiples of π/2) and
# orientation of the in-facet angle
_FACET_CARDINAL = np.array([0, 2, 2, 4, 4, 6, 6, 0])
_FACET_DIAGONAL = np.array([1, 1, 3, 3, 5, 5, 7, 7])
_FACET_BASE = np.array([0, 1, 1, 2, 2, 3, 3, 4])
_FACET_SIGN = np.array([1, -1, 1, -1, 1, -1, 1, -1])

QUARTER_PI = math.pi / 4


class FlowRoutingError(RuntimeError):
    """
    Raised when the flow graph contains a cycle, which can only result from an inconsistent flow direction field.
    """

    pass


class FlowField(NamedTuple):
    """
    D∞ flow directions of a grid.

    Each flowing cell passes its discharge to at most two neighbours: the cardinal and the diagonal neighbour bounding
    the facet of steepest descent. `directions[k]` holds the neighbour index (0–7), `receivers[k]` the flat cell index
    of that neighbour (-1 if it is outside of the grid, invalid or receives nothing) and `weights[k]` the flow
    proportion. For flowing cells, the two weights sum to 1, even if (part of) the flow leaves the grid.
    """

    #: Flow angle raster (radians, counter-clockwise from east); invalid for nodata, flat and pit cells
    angle: Raster
    #: Neighbour indices, shape (2, nrows, ncols), -1 where undefined
    directions: np.ndarray
    #: Flat cell index of the receiving cells, shape (2, nrows, ncols), -1 where no valid cell receives flow
    receivers: np.ndarray
    #: Flow proportions, shape (2, nrows, ncols)
    weights: np.ndarray
    #: True for valid cells without downslope direction (flats and pits)
    no_flow: np.ndarray

    @property
    def mask(self) -> np.ndarray:
        """Valid DEM cells"""
        return self.angle.mask | self.no_flow


def _neighbour_elevations(dem: Raster) -> np.ndarray:
    """
    Elevations of the eight neighbours of each cell, stacked to shape (8, nrows, ncols), with missing neighbours filled
    by extrapolation.
    """
    nrows, ncols = dem.header.shape
    padded = np.full((nrows + 2, ncols + 2), np.nan)
    padded[1:-1, 1:-1] = dem.values
    raw = np.stack(
        [padded[1 + dr : 1 + dr + nrows, 1 + dc : 1 + dc + ncols] for dr, dc in zip(ROW_OFFSETS, COL_OFFSETS)]
    )
    available = np.isfinite(raw)
    center = dem.values
    filled = np.empty_like(raw)
    for k in range(8):
        opposite = raw[(k + 4) % 8]
        extrapolated = np.where(available[(k + 4) % 8], 2 * center - opposite, center)
        filled[k] = np.where(available[k], raw[k], extrapolated)
    return filled


def _require_3x3(dem: Raster) -> None:
    if dem.header.nrows < 3 or dem.header.ncols < 3:
        raise ShapeMismatchError(
            "Terrain analysis requires a grid of at least 3x3 cells, got {}x{}".format(dem.header.nrows, dem.header.ncols)
        )


def slope_aspect(dem: Raster) -> Tuple[Raster, Raster]:
    """
    Compute slope and aspect of a DEM with Horn's third-order finite differences on the 3x3 neighbourhood.

    :return: (slope, aspect) rasters in radians. Slope is in [0, π/2). Aspect is the direction of steepest descent,
        counter-clockwise from east, in [0, 2π); it is invalid on cells without gradient.
    :raises ShapeMismatchError: if the grid is smaller than 3x3 cells
    """
    _require_3x3(dem)
    z = _neighbour_elevations(dem)
    cs = dem.header.cellsize
    east = z[1] + 2 * z[0] + z[7]
    west = z[3] + 2 * z[4] + z[5]
    north = z[3] + 2 * z[2] + z[1]
    south = z[5] + 2 * z[6] + z[7]
    dz_dx = (east - west) / (8 * cs)
    dz_dy = (north - south) / (8 * cs)

    slope = np.arctan(np.hypot(dz_dx, dz_dy))
    aspect = np.mod(np.arctan2(-dz_dy, -dz_dx), 2 * math.pi)
    has_gradient = (dz_dx != 0) | (dz_dy != 0)
    return dem.with_values(slope), dem.with_values(aspect, has_gradient)


def dinf_directions(dem: Raster) -> FlowField:
    """
    Compute D∞ flow directions.

    For each cell, the steepest downslope direction is searched among the eight triangular facets formed by the cell
    and two adjacent neighbours (one cardinal, one diagonal). If the steepest direction lies inside a facet, the flow is
    split between the two neighbours bounding it, proportional to the angular proximity of the flow direction to each
    neighbour's direction. Cells with no descending facet are flagged as flat (steepest slope 0) or pit (all facets
    ascending) in :attr:`FlowField.no_flow`.
    """
    nrows, ncols = dem.header.shape
    cs = dem.header.cellsize
    z = _neighbour_elevations(dem)
    e0 = dem.values

    e1 = z[_FACET_CARDINAL]
    e2 = z[_FACET_DIAGONAL]
    s1 = (e0 - e1) / cs
    s2 = (e1 - e2) / cs
    r = np.arctan2(s2, s1)
    s = np.hypot(s1, s2)
    below = r < 0
    r = np.where(below, 0.0, r)
    s = np.where(below, s1, s)
    above = r > QUARTER_PI
    r = np.where(above, QUARTER_PI, r)
    s = np.where(above, (e0 - e2) / (math.sqrt(2) * cs), s)

    s_fill = np.where(np.isfinite(s), s, -np.inf)
    facet = np.argmax(s_fill, axis=0)
    s_max = np.take_along_axis(s_fill, facet[None], axis=0)[0]
    r_max = np.take_along_axis(r, facet[None], axis=0)[0]

    valid = dem.mask
    flowing = valid & (s_max > 0)
    no_flow = valid & ~flowing
    n_pits = int(np.count_nonzero(valid & (s_max < 0)))
    if np.any(no_flow):
        logger.info(
            "D-infinity routing found %s flat and %s pit cells without downslope direction",
            int(np.count_nonzero(no_flow)) - n_pits,
            n_pits,
        )

    angle = np.mod(_FACET_SIGN[facet] * r_max + _FACET_BASE[facet] * (math.pi / 2), 2 * math.pi)

    directions = np.stack([_FACET_CARDINAL[facet], _FACET_DIAGONAL[facet]])
    diagonal_share = r_max / QUARTER_PI
    weights = np.stack([1.0 - diagonal_share, diagonal_share])
    weights[:, ~flowing] = 0.0
    directions[:, ~flowing] = -1

    rows, cols = np.indices((nrows, ncols))
    receivers = np.full((2, nrows, ncols), -1, dtype=np.int64)
    for k in range(2):
        d = np.where(directions[k] >= 0, directions[k], 0)
        rr = rows + ROW_OFFSETS[d]
        cc = cols + COL_OFFSETS[d]
        inside = (rr >= 0) & (rr < nrows) & (cc >= 0) & (cc < ncols)
        target = np.where(inside, rr * ncols + cc, 0)
        receives = inside & (weights[k] > 0) & valid.ravel()[target].reshape(nrows, ncols) & flowing
        receivers[k] = np.where(receives, target, -1)

    return FlowField(dem.with_values(angle, flowing), directions, receivers, weights, no_flow)


class _FlowGraph(NamedTuple):
    src: np.ndarray
    dst: np.ndarray
    step: np.ndarray
    weight: np.ndarray
    starts: np.ndarray
    counts: np.ndarray


def _flow_graph(field: FlowField, cellsize: float) -> _FlowGraph:
    """Edge list of the flow field in CSR layout, sorted by source cell"""
    mask = field.mask.ravel()
    # Step length of each donor: the geometric steps towards both receivers, weighted by their flow proportions
    geometric = np.where(field.directions % 2 == 1, cellsize * math.sqrt(2), cellsize)
    donor_step = (field.weights * geometric).sum(axis=0).ravel()
    src, dst, step, weight = [], [], [], []
    for k in range(2):
        receivers = field.receivers[k].ravel()
        sel = np.flatnonzero((receivers >= 0) & mask)
        src.append(sel)
        dst.append(receivers[sel])
        step.append(donor_step[sel])
        weight.append(field.weights[k].ravel()[sel])
    src_a = np.concatenate(src)
    order = np.argsort(src_a, kind="stable")
    counts = np.bincount(src_a, minlength=mask.size)
    return _FlowGraph(
        src_a[order],
        np.concatenate(dst)[order],
        np.concatenate(step)[order],
        np.concatenate(weight)[order],
        np.cumsum(counts) - counts,
        counts,
    )


def _edges_of(graph: _FlowGraph, cells: np.ndarray) -> np.ndarray:
    """Indices into the edge arrays of all outgoing edges of the given cells"""
    counts = graph.counts[cells]
    n = int(counts.sum())
    if n == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.cumsum(counts) - counts
    return np.repeat(graph.starts[cells] - offsets, counts) + np.arange(n)


def _topological_sweep(field: FlowField, graph: _FlowGraph, visit) -> None:
    """
    Process cells in topological order, level by level: a cell is visited when all of its donors have been. Calls
    `visit(frontier, edges)` with the cells of each level and the indices of their outgoing edges.
    """
    mask = field.mask.ravel()
    indegree = np.bincount(graph.dst, minlength=mask.size)
    frontier = np.flatnonzero(mask & (indegree == 0))
    processed = 0
    levels = 0
    while frontier.size:
        processed += frontier.size
        levels += 1
        edges = _edges_of(graph, frontier)
        visit(frontier, edges)
        if not edges.size:
            break
        targets = graph.dst[edges]
        np.subtract.at(indegree, targets, 1)
        candidates = np.unique(targets)
        frontier = candidates[indegree[candidates] == 0]
    n_valid = int(np.count_nonzero(mask))
    if processed != n_valid:
        raise FlowRoutingError(
            "Flow graph contains a cycle: only {} of {} valid cells could be ordered".format(processed, n_valid)
        )
    logger.debug("Topological flow sweep finished after %s levels", levels)


def flow_length(field: FlowField, cellsize: float, mode: FlowLengthMode = FlowLengthMode.LONGEST) -> Raster:
    """
    Compute the upslope flow length λ (m) of each cell.

    Headwater cells (without donors) get 0. Otherwise, each donor contributes its own flow length plus its step length:
    the cell size for cardinal and cell size·√2 for diagonal steps, weighted by the flow proportions of the donor's two
    receivers. A donor sending a tiny share of its flow diagonally thus steps only slightly further than cellsize. With
    :attr:`FlowLengthMode.LONGEST` (default), the maximum over all donors with a non-zero flow proportion is taken; with
    :attr:`FlowLengthMode.MEAN`, the contributions are averaged, weighted by the flow proportion received from each
    donor.

    :raises FlowRoutingError: if the flow graph is not acyclic
    """
    graph = _flow_graph(field, cellsize)
    n = field.mask.size
    length = np.zeros(n)
    numerator = np.zeros(n)
    denominator = np.zeros(n)

    def visit(frontier: np.ndarray, edges: np.ndarray) -> None:
        if mode is FlowLengthMode.MEAN:
            received = denominator[frontier] > 0
            length[frontier[received]] = numerator[frontier[received]] / denominator[frontier[received]]
        if not edges.size:
            return
        candidate = length[graph.src[edges]] + graph.step[edges]
        if mode is FlowLengthMode.LONGEST:
            np.maximum.at(length, graph.dst[edges], candidate)
        else:
            np.add.at(numerator, graph.dst[edges], graph.weight[edges] * candidate)
            np.add.at(denominator, graph.dst[edges], graph.weight[edges])

    _topological_sweep(field, graph, visit)
    return Raster(field.angle.header, length.reshape(field.mask.shape), field.mask)


def flow_accumulation(field: FlowField, cell_area: float) -> Raster:
    """
    Compute the D∞ contributing area of each cell: its own area plus the proportional discharge of all donors.

    Flow towards invalid cells or out of the grid leaves the system; the sum over all cells of the accumulated area
    times the proportion leaving the system equals the total valid area.
    """
    graph = _flow_graph(field, 1.0)
    mask = field.mask.ravel()
    accumulated = np.where(mask, cell_area, 0.0)

    def visit(_frontier: np.ndarray, edges: np.ndarray) -> None:
        if edges.size:
            np.add.at(accumulated, graph.dst[edges], accumulated[graph.src[edges]] * graph.weight[edges])

    _topological_sweep(field, graph, visit)
    return Raster(field.angle.header, accumulated.reshape(field.mask.shape), field.mask)


def outflow_fraction(field: FlowField) -> np.ndarray:
    """
    Proportion of each valid cell's discharge which is not passed to another valid cell (1 for flats and pits)
    """
    delivered = np.where(field.receivers >= 0, field.weights, 0.0).sum(axis=0)
    return np.where(field.mask, 1.0 - delivered, 0.0)
