"""Closed-form bound next to the exact average fidelity for the three overlap values."""

import argparse

from measfid.metrics import avg_error, lower_bound_probs
from measfid.qubit import CoherentQubitPovm, exact_fidelity


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--u0", type=float, nargs="+", default=[0.99, 0.995, 0.999])
    args = ap.parse_args()
    print(f"{'u0':>6} {'lb':>7} {'ub':>7} {'F(gamma=0)':>12} {'F(gamma=Rmax)':>14}")
    for u0 in args.u0:
        lb = lower_bound_probs([u0, u0])
        f0 = exact_fidelity(CoherentQubitPovm(u0)).value
        f1 = exact_fidelity(CoherentQubitPovm.at_fraction(u0, 1.0)).value
        print(f"{u0:>6} {lb:7.4f} {avg_error(lb):7.4f} {f0:12.8f} {f1:14.8f}")


if __name__ == "__main__":
    main()
