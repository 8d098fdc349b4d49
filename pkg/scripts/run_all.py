"""Run every experiment with its default scan and write reports to results/.

    python3 scripts/run_all.py [--out results] [--plot]
"""
import argparse
import sys
from pathlib import Path

from trapsmooth.cli import main

JOBS = [
    ("spectrum", ["--m", "2"]),
    ("lower-bound", ["--m", "1", "--check", "slope=1±0.02"]),
    ("lower-bound", ["--m", "2", "--check", "slope=1.3333±0.02"]),
    ("lower-bound", ["--m", "3", "--check", "slope=1.5±0.02"]),
    ("microlocal-resolvent", ["--m", "2", "--check", "slope=-1.3333±0.1"]),
    ("microlocal-resolvent", ["--m", "3", "--check", "slope=-1.5±0.1"]),
    ("microlocal-resolvent", ["--m", "2", "--z", "1.5", "--check", "slope=0±0.3"]),
    ("full-resolvent", ["--m", "2", "--check", "slope=-0.6667±0.1"]),
    ("full-resolvent", ["--m", "3", "--check", "slope=-0.5±0.1"]),
    ("quasimode", ["--m", "2"]),
    ("quasimode", ["--m", "3"]),
    ("smoothing", ["--m", "2"]),
    ("saturation", ["--m", "2", "--check", "rho_ratio=1±3"]),
]


def run(out: Path, plot: bool) -> int:
    out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for experiment, args in JOBS:
        tag = "-".join([experiment] + [a.lstrip("-") for a in args[:4] if not a.startswith("slope")])
        extra = ["--plot"] if plot else []
        print(f"== {tag}", flush=True)
        code = main(["run", experiment, *args, "--out", str(out / tag), *extra])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--plot", action="store_true")
    ns = ap.parse_args()
    sys.exit(run(Path(ns.out), ns.plot))
