"""Repeat the sampling protocol many times and count how often it misses by more than epsilon."""

import argparse

import numpy as np

from measfid.core import Rank1Pvm
from measfid.device import NoisyDevice
from measfid.metrics import lower_bound_probs
from measfid.protocols import EstimationConfig, chebyshev_trials, hoeffding_pairs, run_protocol_probs
from measfid.qubit import CoherentQubitPovm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--u0", type=float, default=0.99)
    ap.add_argument("--frac", type=float, default=0.0, help="|gamma| as a fraction of R_max")
    ap.add_argument("--epsilon", type=float, default=0.005)
    ap.add_argument("--delta", type=float, default=0.05)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    member = CoherentQubitPovm.at_fraction(args.u0, args.frac)
    dev = NoisyDevice(member.povm, seed=args.seed)
    target = lower_bound_probs([args.u0, args.u0])
    est = np.array([
        run_protocol_probs(dev.spawn(i + 1), Rank1Pvm.computational(2),
                           EstimationConfig(args.epsilon, args.delta, seed=args.seed + i)).lb_hat
        for i in range(args.runs)
    ])
    cfg = EstimationConfig(args.epsilon, args.delta)
    miss = np.mean(np.abs(est - target) > args.epsilon)
    print(f"N={chebyshev_trials(cfg)} K={hoeffding_pairs(cfg)} target lb={target:.6f}")
    print(f"mean={est.mean():.6f} sd={est.std(ddof=1):.2e} miss fraction={miss:.3f} (allowed {args.delta})")


if __name__ == "__main__":
    main()
