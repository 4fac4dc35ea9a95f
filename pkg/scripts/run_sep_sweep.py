#!/usr/bin/env python3
"""Symbol-error-probability-versus-power experiment at paper scale.

Writes sep_sweep.csv (plus manifest) into results/sep/.  The x-axis of the
figure is mean_power_w, the y-axis sep_mean (log scale); sep_max gives the
max-over-sampled-perturbations variant.
"""
import pathlib
import sys

from relaybf.cli import main

HERE = pathlib.Path(__file__).resolve().parent
CONFIG = HERE.parent / "configs" / "paper.ini"
OUT = HERE.parent / "results" / "sep"

if __name__ == "__main__":
    extra = sys.argv[1:]
    sys.exit(main([
        "sweep", "--config", str(CONFIG), "--experiment", "sep",
        "--out-dir", str(OUT), "--per-trial", *extra,
    ]))
