#!/usr/bin/env python3
"""Run the desk-scale cross-process transfer experiment.

Generates the synthetic LPBF-like source and DED-like target streams,
trains the source autoencoder, fine-tunes it on the target under all
three layer-freezing strategies against a from-scratch baseline, and
evaluates anomaly detection per seed. Uses the bundled recipe unless a
config file is given; expect roughly three minutes per seed on CPU.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from amtransfer.config import ExperimentConfig, load_bundled_config
from amtransfer.recipe import run_desk_recipe


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", help="experiment config JSON (default: bundled recipe)")
    parser.add_argument("--seeds", type=int, nargs="+", help="override config seeds")
    parser.add_argument("--out", help="output directory (default: config output_dir)")
    parser.add_argument("--no-plots", action="store_true")
    args = parser.parse_args()

    config = ExperimentConfig.load(args.config) if args.config else load_bundled_config()
    if args.seeds:
        config = config.with_overrides(seeds=tuple(args.seeds))
    if args.no_plots:
        config = config.with_overrides(make_plots=False)

    out_dir = Path(args.out) if args.out else Path(config.output_dir)
    overall = run_desk_recipe(config, out_dir)

    print(f"recipe summary (config {overall['config_hash']}):")
    for seed, doc in overall["per_seed"].items():
        scratch = doc["scratch"]
        print(f"  seed {seed}: scratch accuracy {scratch['accuracy_pct']:.1f}")
        for name, row in doc["strategies"].items():
            print(
                f"    {name:<20} {row['pre_accuracy_pct']:5.1f} -> "
                f"{row['post_accuracy_pct']:5.1f}  loss {row['final_loss']:.6f}  "
                f"verdict {row['verdict']}"
            )
    print(f"artifacts: {out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
