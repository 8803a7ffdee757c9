#!/usr/bin/env python3
"""Regenerate the default scenario files under scenarios/."""

import json
from pathlib import Path

from cellray.config import default_scenario

OUT = Path(__file__).resolve().parent.parent / "scenarios"


def main() -> None:
    OUT.mkdir(exist_ok=True)
    for shape in ("fusiform", "spherical", "pyramidal"):
        path = OUT / f"{shape}.json"
        with open(path, "w") as fh:
            json.dump(default_scenario(shape).to_dict(), fh,
                      indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
