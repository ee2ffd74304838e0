"""Three-neuron dynamics: potentials, currents, raster, spike counts vs analog integral."""

import argparse
import json

from slca.experiments import ExperimentSpec, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/fig1")
    ap.add_argument("--t-end", type=float, default=20.0)
    args = ap.parse_args()
    summary = run_experiment(ExperimentSpec(name="fig1", output_dir=args.out,
                                            spiking={"t_end": args.t_end}))
    print(json.dumps(summary["spike_count_vs_alca"], indent=2, default=list))
    raise SystemExit(0 if summary["passed"] else 1)


if __name__ == "__main__":
    main()
