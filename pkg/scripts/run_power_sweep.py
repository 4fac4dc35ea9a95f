#!/usr/bin/env python3
"""Average-minimum-power-versus-SINR-target experiment at paper scale.

Writes power_sweep.csv (plus manifest) into results/power/.  Expect hours at
the full 3000 trials; pass --trials for a quicker look.
"""
import pathlib
import sys

from relaybf.cli import main

HERE = pathlib.Path(__file__).resolve().parent
CONFIG = HERE.parent / "configs" / "paper.ini"
OUT = HERE.parent / "results" / "power"

if __name__ == "__main__":
    extra = sys.argv[1:]
    sys.exit(main([
        "sweep", "--config", str(CONFIG), "--experiment", "power",
        "--out-dir", str(OUT), "--per-trial", *extra,
    ]))
