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

from . import conversion
from . import datatypes
from . import raster
from . import terrain
from . import erosion
from . import landslides
from . import montecarlo
from . import stats

from .raster import Raster, GridHeader, read_grid, write_grid
from .erosion import FactorStack
from .landslides import InverseGammaParams
from .montecarlo import SimulationConfig, CatchmentModel, run_simulation

__version__ = "0.1.0"
