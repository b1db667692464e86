"""Manufactured Stokes solution: errors, estimator and fitted rates under uniform refinement."""
import argparse

from afemtopo.manufactured import convergence_study, fitted_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, default=5)
    ap.add_argument("--n0", type=int, default=4, help="cells per side of the coarsest grid")
    args = ap.parse_args()
    levels = convergence_study(levels=args.levels, n0=args.n0)
    print(f"{'h':>9} {'elements':>9} {'L2':>11} {'energy':>11} {'pressure':>11} {'eta2':>11}")
    for lv in levels:
        print(f"{lv.h:9.4f} {lv.n_elements:9d} {lv.l2:11.3e} {lv.energy:11.3e} {lv.pressure_l2:11.3e} {lv.eta2:11.3e}")
    h = [lv.h for lv in levels]
    for key in ("l2", "energy", "pressure_l2", "eta2"):
        print(f"rate {key}: {fitted_rate(h, [getattr(lv, key) for lv in levels]):.3f}")


if __name__ == "__main__":
    main()
