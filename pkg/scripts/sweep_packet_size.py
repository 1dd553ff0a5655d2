#!/usr/bin/env python3
"""Packet-size impact: sweep the length cap over {200,300,400,500} kbits."""

import argparse
import os
from pathlib import Path

from noma_arena.config import ExperimentConfig, load_config
from noma_arena.harness import SweepSpec, sweep


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None)
    parser.add_argument("--replications", type=int, default=20)
    parser.add_argument("--algos", default="crl,tql,fm-max,opt")
    parser.add_argument("--workers", type=int, default=os.cpu_count())
    parser.add_argument("--out", type=Path, default=Path("packet_size_sweep.csv"))
    args = parser.parse_args()

    spec = SweepSpec(
        param="L_max",
        values=[200_000, 300_000, 400_000, 500_000],
        replications=args.replications,
        algos=tuple(args.algos.split(",")),
        base=load_config(args.config) if args.config else ExperimentConfig(),
        workers=args.workers,
    )
    result = sweep(spec)
    result.to_csv(args.out)
    result.save_summary(args.out.with_suffix(".summary.json"))
    for cell in result.summary()["cells"]:
        print(
            f"L_max={cell['value']:>7} {cell['algo']:7s} "
            f"mean={cell['mean']:6.2f} ci95=({cell['ci95'][0]:.2f}, {cell['ci95'][1]:.2f})"
        )


if __name__ == "__main__":
    main()
