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

import enum
import json
import pathlib
import typing
from typing import TypeVar, Dict, Tuple, Type, Callable, Any

import numpy as np

S = TypeVar("S")
T = TypeVar("T")

_TYPE_CONVERSIONS: Dict[Tuple[Type, Type], Callable[[Any], Any]] = {}

#: Config spellings of an absent optional value
NONE_SPELLINGS = ("", "none", "null")


def register_converter(from_type: Type[S], to_type: Type[T], converter: Callable[[S], T]) -> None:
    _TYPE_CONVERSIONS[(from_type, to_type)] = converter


def get_converter(from_type: Type[S], to_type: Type[T]) -> Callable[[S], T]:
    """
    Get the default conversion function for converting values from ``from_type`` to ``to_type``.

    :param from_type: The source type
    :param to_type: The target type
    :return: A function, which converts a value of type ``from_type`` to ``to_type``.
    :raises TypeError: If no converter is known for this particular type conversion
    """
    try:
        return _TYPE_CONVERSIONS[(from_type, to_type)]
    except KeyError as e:
        raise TypeError(
            "No converter available to convert {} into {}".format(from_type.__name__, to_type.__name__)
        ) from e


def from_text(type_: Any, value: str) -> Any:
    """
    Parse a config text value into the given (annotated) type.

    ``Optional[X]`` annotations accept the spellings in :data:`NONE_SPELLINGS` as None and parse everything else as X.

    :raises TypeError: If no converter from str is registered for the type
    :raises ValueError: If the text cannot be parsed or violates the type's constraints
    """
    if typing.get_origin(type_) is typing.Union:
        args = [a for a in typing.get_args(type_) if a is not type(None)]
        if value.strip().lower() in NONE_SPELLINGS:
            return None
        if len(args) != 1:
            raise TypeError("Cannot parse text into {}".format(type_))
        type_ = args[0]
    if type_ is str:
        return value
    return get_converter(str, type_)(value.strip())


class SlecJsonEncoder(json.JSONEncoder):
    """
    JSON encoder for config values, used to compute a canonical representation of a run configuration
    """

    def default(self, o: Any) -> Any:
        if isinstance(o, enum.Enum):
            return o.value
        if isinstance(o, pathlib.PurePath):
            return o.as_posix()
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        return super().default(o)


def canonical_json(value: Any) -> str:
    return json.dumps(value, cls=SlecJsonEncoder, sort_keys=True, separators=(",", ":"))


register_converter(str, int, lambda v: int(v))
register_converter(str, float, lambda v: float(v))
register_converter(str, pathlib.Path, lambda v: pathlib.Path(v))
