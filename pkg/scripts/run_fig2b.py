"""Objective error vs time for the window, thresholded-current and exponential-kernel readouts."""

import argparse
import json

from slca.experiments import ExperimentSpec, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/fig2b")
    ap.add_argument("--t-end", type=float, default=100.0)
    ap.add_argument("--t0", type=float, default=None)
    args = ap.parse_args()
    summary = run_experiment(ExperimentSpec(name="fig2b", output_dir=args.out, t0=args.t0,
                                            spiking={"t_end": args.t_end}))
    print(json.dumps(summary["final_error"], indent=2))
    raise SystemExit(0 if summary["passed"] else 1)


if __name__ == "__main__":
    main()
