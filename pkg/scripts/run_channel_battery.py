#!/usr/bin/env python3
"""Run the full analysis battery for all three cell shapes.

For each shape this produces, under results/<shape>/, the ray trace and
focus report, the cumulative path-loss curve, the impulse response and
power delay profile, the pulse waveforms and spectra, and the detector
power map, plus a cell-count sweep under results/<shape>_sweep/.

Usage: python scripts/run_channel_battery.py [results_dir]
"""

import sys
from pathlib import Path

from cellray.cli import main as cellray_main

ROOT = Path(__file__).resolve().parent.parent
COMMANDS = ("trace", "pathloss", "cir", "pulse", "detector")


def main() -> int:
    results = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "results"
    for shape in ("fusiform", "spherical", "pyramidal"):
        scenario = str(ROOT / "scenarios" / f"{shape}.json")
        out = results / shape
        for command in COMMANDS:
            code = cellray_main(["--command", command, "--scenario", scenario,
                                 "--out", str(out / command)])
            if code != 0:
                return code
        code = cellray_main([
            "--command", "sweep", "--scenario", scenario,
            "--out", str(results / f"{shape}_sweep"),
            "--set", "sweep=n_cells=1..18", "--set", "k_rays=301",
        ])
        if code != 0:
            return code
    print(f"\nall outputs under {results}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
