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
Validated scalar types for model parameters.

Each type checks its semantic constraint on construction, so a value that made it into a config object is known to be
a proportion, a positive scalar, etc. The types are registered with :mod:`slec.conversion` for parsing from config
text.
"""
import enum
import logging

from slec.conversion import register_converter

logger = logging.getLogger(__name__)


class Proportion(float):
    """
    A proportion, represented as a floating point number from 0.0 to 1.0 (both inclusive).

    Used for cover-management factors, bare-soil fractions and quantile probabilities.
    """

    def __new__(cls, *args, **kwargs):
        # noinspection PyArgumentList
        res = float.__new__(cls, *args, **kwargs)
        if not 0.0 <= res <= 1.0:
            raise ValueError("{} is out of the allowed range for type {}".format(res, cls.__name__))
        return res


class PositiveFloat(float):
    """
    A strictly positive, finite floating point number, like a cell size or an area
    """

    def __new__(cls, *args, **kwargs):
        res = float.__new__(cls, *args, **kwargs)
        if not 0.0 < res < float("inf"):
            raise ValueError("{} is not a valid {}".format(res, cls.__name__))
        return res


class PositiveInt(int):
    """
    An integer ≥ 1, e.g. a number of iterations or landslides.
    """

    def __new__(cls, *args, **kwargs):
        res = int.__new__(cls, *args, **kwargs)
        if res < 1:
            raise ValueError("{} is not a valid {}".format(res, cls.__name__))
        return res


class SeedInt(int):
    """
    A master seed for the random streams: an unsigned 64 bit integer.
    """

    def __new__(cls, *args, **kwargs):
        res = int.__new__(cls, *args, **kwargs)
        if not 0 <= res < 2**64:
            raise ValueError("{} is not a valid 64 bit unsigned seed".format(res))
        return res


class FlowLengthMode(enum.Enum):
    """
    How the upslope flow length of a cell is combined from its donor cells
    """

    #: Longest upstream path over all donors with non-zero flow proportion
    LONGEST = "longest"
    #: Mean upstream path, weighted by the D∞ proportions received from each donor
    MEAN = "mean"


class Statistic(enum.Enum):
    """
    Statistic computed on each bootstrap resample
    """

    MEDIAN = "median"
    MEAN = "mean"
    TOTAL = "total"


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError("{!r} is not a boolean".format(value))


register_converter(str, Proportion, lambda v: Proportion(float(v)))
register_converter(str, PositiveFloat, lambda v: PositiveFloat(float(v)))
register_converter(str, PositiveInt, lambda v: PositiveInt(int(v)))
register_converter(str, SeedInt, lambda v: SeedInt(int(v, 0)))
register_converter(str, FlowLengthMode, lambda v: FlowLengthMode(v.strip().lower()))
register_converter(str, Statistic, lambda v: Statistic(v.strip().lower()))
register_converter(str, bool, _parse_bool)
