"""Adaptive (K=4) versus uniform (K=3) refinement on the 2D presets.

Prints a table of final augmented Lagrangian, vertex count and run time per
preset and writes it to ``<out>/comparison.txt`` together with the run logs.
"""
import argparse
from pathlib import Path

from afemtopo.adapt import AfemConfig
from afemtopo.bench import PRESETS, compare_mode, format_table, preset, write_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="presets (default: left_inflow three_inflows)")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    args.names = args.names or ["left_inflow", "three_inflows"]
    unknown = set(args.names) - set(PRESETS)
    if unknown:
        ap.error(f"unknown presets {sorted(unknown)}; available: {sorted(PRESETS)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    blocks = []
    for name in args.names:
        rows, reports = compare_mode(preset(name), AfemConfig(K=4), log=print)
        for strategy, rep in reports.items():
            write_report(rep, out, f"{name}_{strategy}")
        blocks.append(f"{name}\n{format_table(rows)}")
        print(blocks[-1])
    (out / "comparison.txt").write_text("\n\n".join(blocks) + "\n")


if __name__ == "__main__":
    main()
