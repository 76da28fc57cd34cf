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
Run configuration: a flat ``key = value`` text file with ``#`` comments, overridden by command line flags.

Example::

    # Synthetic test catchment
    dem = dem.asc
    landcover = landcover.asc
    r = r.asc
    k = k.asc
    cover_table = cover.csv
    n_landslides = 400
    iterations = 1000
    seed = 7
"""
import hashlib
import logging
import typing
from pathlib import Path
from typing import NamedTuple, Optional, Dict, Any, Mapping, Union, Callable

from slec.conversion import from_text, canonical_json
from slec.datatypes import Proportion, PositiveFloat, PositiveInt, SeedInt, FlowLengthMode, Statistic
from slec.landslides import InverseGammaParams, DEFAULT_BARE_MIN, DEFAULT_MAX_AREA_KM2
from slec.montecarlo import SimulationConfig
from slec.erosion import S_THRESHOLD_DEG

logger = logging.getLogger(__name__)

#: Fields which do not influence the results and are excluded from the config hash
NON_RESULT_FIELDS = ("threads", "out")
#: Config spelling of McCool's slope dependent L exponent
MCCOOL = "mccool"


class ConfigError(ValueError):
    """
    Raised for unknown config keys, unparsable or missing values and missing input files
    """

    pass


class RunConfig(NamedTuple):
    """
    The complete configuration of a run: inputs, model parameters and outputs
    """

    # Input files
    dem: Optional[Path] = None
    landcover: Optional[Path] = None
    r: Optional[Path] = None
    k: Optional[Path] = None
    p: Optional[Path] = None
    st: Optional[Path] = None
    eligibility: Optional[Path] = None
    cover_table: Optional[Path] = None

    # Terrain and erosion
    flow_length_mode: FlowLengthMode = FlowLengthMode.LONGEST
    #: Fixed slope length exponent. None selects McCool's slope dependent exponent.
    l_exponent: Optional[float] = None
    s_threshold_deg: PositiveFloat = PositiveFloat(S_THRESHOLD_DEG)

    # Monte Carlo
    n_landslides: Optional[PositiveInt] = None
    iterations: PositiveInt = PositiveInt(1000)
    seed: Optional[SeedInt] = None
    c_bare: Proportion = Proportion(1.0)
    bare_min: Proportion = Proportion(DEFAULT_BARE_MIN)
    rho: PositiveFloat = PositiveFloat(InverseGammaParams().rho)
    a_param: PositiveFloat = PositiveFloat(InverseGammaParams().a)
    s_param: float = InverseGammaParams().s
    max_area: PositiveFloat = PositiveFloat(DEFAULT_MAX_AREA_KM2)
    poisson: bool = False

    # Statistics
    bootstrap_resamples: PositiveInt = PositiveInt(10000)
    bootstrap_statistic: Statistic = Statistic.MEDIAN
    bins_per_decade: PositiveInt = PositiveInt(10)
    envelope_resamples: PositiveInt = PositiveInt(1000)

    # Execution and output
    threads: PositiveInt = PositiveInt(1)
    out: Optional[Path] = None

    @property
    def params(self) -> InverseGammaParams:
        return InverseGammaParams(float(self.rho), float(self.a_param), float(self.s_param))

    def require(self, *fields: str) -> "RunConfig":
        """
        Check that the given fields are set and, for input files, that the files exist

        :raises ConfigError: naming the first missing field or file
        """
        for name in fields:
            value = getattr(self, name)
            if value is None:
                raise ConfigError("Missing required setting '{}'".format(name))
            if name in INPUT_FIELDS and not Path(value).is_file():
                raise ConfigError("Input file {} ('{}') does not exist".format(value, name))
        for name in OPTIONAL_INPUT_FIELDS:
            value = getattr(self, name)
            if value is not None and not Path(value).is_file():
                raise ConfigError("Input file {} ('{}') does not exist".format(value, name))
        return self

    def simulation_config(self) -> SimulationConfig:
        """
        The Monte Carlo parameters of this run

        :raises ConfigError: if the seed or the number of landslides is missing or a parameter is invalid
        """
        if self.seed is None:
            raise ConfigError("An explicit seed is required for simulations")
        if self.n_landslides is None:
            raise ConfigError("Missing required setting 'n_landslides'")
        try:
            return SimulationConfig(
                n_landslides=self.n_landslides,
                seed=self.seed,
                n_iterations=self.iterations,
                c_bare=self.c_bare,
                bare_min=self.bare_min,
                params=self.params,
                max_area_km2=self.max_area,
                poisson_count=self.poisson,
            ).validate()
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def result_settings(self) -> Dict[str, Any]:
        """
        All settings which influence the results, i.e. everything except threads and output directory
        """
        return {k: v for k, v in self._asdict().items() if k not in NON_RESULT_FIELDS}

    def config_hash(self) -> str:
        """
        SHA-256 hex digest of the canonical JSON representation of :meth:`result_settings`
        """
        return hashlib.sha256(canonical_json(self.result_settings()).encode("utf-8")).hexdigest()


INPUT_FIELDS = ("dem", "landcover", "r", "k", "cover_table")
OPTIONAL_INPUT_FIELDS = ("p", "st", "eligibility")
PATH_FIELDS = INPUT_FIELDS + OPTIONAL_INPUT_FIELDS + ("out",)


def _parse_l_exponent(value: str) -> Optional[float]:
    if value.strip().lower() == MCCOOL:
        return None
    return from_text(Optional[float], value)


#: Parsers for fields whose text form is not covered by the converter registry
_FIELD_PARSERS: Dict[str, Callable[[str], Any]] = {
    "l_exponent": _parse_l_exponent,
}
#: Alternative config keys
_ALIASES = {
    "n_iterations": "iterations",
    "max_area_km2": "max_area",
    "poisson_count": "poisson",
    "a": "a_param",
    "s": "s_param",
}


def normalize_key(key: str) -> str:
    key = key.strip().lower().replace("-", "_")
    return _ALIASES.get(key, key)


def parse_value(key: str, text: str) -> Any:
    """
    Parse the text of a config value into the type of the RunConfig field `key`

    :raises ConfigError: for unknown keys or unparsable values
    """
    key = normalize_key(key)
    if key not in RunConfig._fields:
        raise ConfigError("Unknown config key '{}'".format(key))
    try:
        if key in _FIELD_PARSERS:
            return _FIELD_PARSERS[key](text)
        return from_text(typing.get_type_hints(RunConfig)[key], text)
    except (ValueError, TypeError) as e:
        raise ConfigError("Invalid value {!r} for '{}': {}".format(text, key, e)) from e


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a ``key = value`` config file. Relative input paths are resolved against the directory of the file.

    :raises ConfigError: for missing files, malformed lines, unknown or duplicate keys and unparsable values, naming
        the file and line
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise ConfigError("Cannot read config file {}: {}".format(path, e)) from e
    values: Dict[str, Any] = {}
    for line_no, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        key, sep, value = text.partition("=")
        if not sep:
            raise ConfigError("{}:{}: expected 'key = value'".format(path, line_no))
        try:
            name = normalize_key(key)
            if name in values:
                raise ConfigError("duplicate key '{}'".format(name))
            parsed = parse_value(name, value)
        except ConfigError as e:
            raise ConfigError("{}:{}: {}".format(path, line_no, e)) from e
        if name in PATH_FIELDS and parsed is not None and not parsed.is_absolute():
            parsed = path.parent / parsed
        values[name] = parsed
    logger.debug("Read %s settings from %s", len(values), path)
    return values


def build_config(
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Optional[str]]] = None,
    defaults: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Build the run configuration from (lowest to highest precedence) the RunConfig defaults, the given `defaults`, the
    config file and the textual `overrides` (e.g. from command line flags). Overrides with value None are ignored.

    :raises ConfigError: for any invalid key or value
    """
    values: Dict[str, Any] = dict(defaults or {})
    if config_file is not None:
        values.update(read_config_file(config_file))
    for key, text in (overrides or {}).items():
        if text is not None:
            values[normalize_key(key)] = parse_value(key, text)
    unknown = set(values) - set(RunConfig._fields)
    if unknown:
        raise ConfigError("Unknown config keys: {}".format(", ".join(sorted(unknown))))
    return RunConfig(**values)
