"""Exact F, lb and the gap over |gamma| in [0, R_max]; writes plot-ready CSV."""

import argparse
import sys

from measfid.qubit import rows_to_csv, sweep_table1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--u0", type=float, nargs="+", default=[0.99, 0.995, 0.999])
    ap.add_argument("--points", type=int, default=50)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", help="CSV path (default: stdout)")
    args = ap.parse_args()
    rows = sweep_table1(None, args.u0, args.points, threads=args.threads)
    text = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for u0 in args.u0:
        curve = [r for r in rows if r.u0 == u0]
        print(f"u0={u0}: gap {curve[0].gap:.3e} -> {curve[-1].gap:.3e}, min {min(r.gap for r in curve):.3e}",
              file=sys.stderr)


if __name__ == "__main__":
    main()
