"""Wall-clock objective traces for fixed-step S-LCA (h = 0.01) and FISTA on random instances.

Timings depend on the machine; nothing here is asserted.
"""

import argparse
import json
from pathlib import Path

from slca.experiments import ExperimentSpec, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/bench")
    ap.add_argument("--sizes", nargs="+", default=["16x64", "128x400"])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--t-end", type=float, default=50.0)
    args = ap.parse_args()
    for size in args.sizes:
        M, N = (int(x) for x in size.split("x"))
        for seed in args.seeds:
            out = Path(args.out) / f"{size}_seed{seed}"
            summary = run_experiment(ExperimentSpec(
                name="bench", source="random", M=M, N=N, density=0.5, seed=seed,
                output_dir=str(out), spiking={"t_end": args.t_end, "step": 0.01}))
            timing = json.loads((out / "timing.json").read_text())
            print(f"{size} seed={seed}: slca err={summary['slca_final_error']:.3e} "
                  f"in {timing['slca_wall']:.3f}s, fista err={summary['fista_final_error']:.3e} "
                  f"in {timing['fista_wall']:.3f}s")


if __name__ == "__main__":
    main()
