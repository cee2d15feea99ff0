"""Run one or more presets and write figure-panel CSVs.

    python scripts/run_preset.py fig2 fig14 --out results --runs 3 --parallel 2
"""

import argparse
import logging

from wmsindy.harness import PRESET_NAMES, emit_figure_data, preset, sweep


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("presets", nargs="+", choices=PRESET_NAMES)
    parser.add_argument("--out", default="results")
    parser.add_argument("--runs", type=int)
    parser.add_argument("--iters", type=int)
    parser.add_argument("--parallel", type=int, default=1)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    for name in args.presets:
        configs = preset(name)
        if args.runs is not None:
            configs = [c.replace(runs=args.runs) for c in configs]
        if args.iters is not None:
            configs = [c.replace(iters_per_loop=args.iters) for c in configs]
        sweep(configs, args.out, args.parallel)
        for path in emit_figure_data(args.out, name):
            print(path)


if __name__ == "__main__":
    main()
