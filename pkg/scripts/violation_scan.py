"""Search the qubit family for points where the exact fidelity falls below the bound."""

import argparse
import time

from measfid.qubit import desk_u0_grid, full_u0_grid, violation_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma-points", type=int, default=20)
    ap.add_argument("--full", action="store_true", help="u0 step 1e-4; expect hours")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    grid = full_u0_grid() if args.full else desk_u0_grid()
    t0 = time.perf_counter()
    res = violation_scan(grid, args.gamma_points, threads=args.threads)
    print(f"points={len(res.rows)} violations={len(res.violations)} "
          f"max(lb - F)={res.max_negative_gap:.3e} in {time.perf_counter() - t0:.1f}s")
    for r in res.violations[:20]:
        print(f"  u0={r.u0} |gamma|={r.gamma_abs:.6g} F={r.F_exact:.10f} lb={r.lb:.10f}")


if __name__ == "__main__":
    main()
