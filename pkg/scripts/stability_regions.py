"""Export stability-region boundaries and areas for the built-in methods."""

import argparse
from pathlib import Path

from imexglm.harness import emit_stability
from imexglm.methods import BUILTIN_METHODS, resolve_method
from imexglm.stability import StabilityQuery


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/stability")
    ap.add_argument("--methods", default=",".join(sorted(BUILTIN_METHODS)))
    args = ap.parse_args()
    for name in args.methods.split(","):
        m = resolve_method(name)
        report = emit_stability(m, StabilityQuery(), Path(args.out) / name)
        pair_half_plane = next(e for e in report["pair"]
                               if abs(e["alpha"] - 1.5707963267948966) < 1e-12)
        print(f"{name}: explicit area {report['explicit']['area_total']:.4f}, "
              f"pair(pi/2) area {pair_half_plane['area_total']:.4f}, "
              f"x_b {pair_half_plane['x_b']:.4f}")


if __name__ == "__main__":
    main()
