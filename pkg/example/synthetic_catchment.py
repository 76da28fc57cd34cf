#!/usr/bin/env python3
"""
Simulate landslide-driven soil erosion on a small synthetic catchment.

Writes the synthetic input grids and all outputs of a short simulation to the given directory (default: a new
temporary directory) and prints the headline numbers.
"""
import logging
import sys
import tempfile
from pathlib import Path
from typing import Optional, Dict, Any

from slec import pipeline
from slec.config import build_config
from slec.synthetic import write_synthetic_catchment


def main(work_dir: Optional[Path] = None) -> Dict[str, Any]:
    if work_dir is None:
        work_dir = Path(tempfile.mkdtemp(prefix="slec-"))
    config_path = write_synthetic_catchment(work_dir / "catchment", nrows=60, ncols=80, cellsize=5.0)
    config = build_config(
        config_path,
        {
            "n_landslides": "20",
            "iterations": "50",
            "seed": "2026",
            "max_area": "0.005",
            "bootstrap_resamples": "1000",
            "out": str(work_dir / "run"),
        },
    )
    _outcome, report = pipeline.simulate_command(config)
    for key, value in report.headline:
        print("{} = {}".format(key, value))
    return dict(report.headline)


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else None)
