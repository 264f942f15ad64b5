#!/usr/bin/env python3
"""Lossy-vs-traditional checkpointing ensembles around the decision bound.

Sweeps the forced per-recovery iteration delay across multiples of the
analytic bound and reports which policy wins in simulation, with 95%
confidence intervals.
"""

import argparse
import sys

from lossyckpt import perfmodel as pm
from lossyckpt import simulate as sim


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--lambda", dest="lam", type=float, default=1 / 3600)
    parser.add_argument("--t-it", type=float, default=1.2)
    parser.add_argument("--tckp-trad", type=float, default=120.0)
    parser.add_argument("--tckp-lossy", type=float, default=25.0)
    parser.add_argument("--n", type=int, default=5875)
    parser.add_argument("--trials", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--multipliers", default="0.25,0.5,0.9,1.1,1.5,2.0")
    args = parser.parse_args()

    bound = pm.n_prime_bound(args.lam, args.t_it, args.tckp_trad, args.tckp_lossy)
    print(f"decision bound: {bound:.1f} extra iterations per recovery\n")

    shared = dict(method="synthetic", problem=f"synthetic:{args.n}", t_it=args.t_it,
                  lam=args.lam, trials=args.trials, seed=args.seed)
    trad = sim.run_ensemble(sim.SimConfig(
        policy="traditional", t_ckpt=args.tckp_trad,
        ckpt_intvl=pm.young_k(1 / args.lam, args.tckp_trad, args.t_it), **shared))
    print(f"traditional: mean T_t = {trad.mean_total_time:8.0f} "
          f"+- {trad.ci95_total_time:5.0f}")

    k_lossy = pm.young_k(1 / args.lam, args.tckp_lossy, args.t_it)
    for mult in (float(m) for m in args.multipliers.split(",")):
        lossy = sim.run_ensemble(sim.SimConfig(
            policy="lossy", t_ckpt=args.tckp_lossy, ckpt_intvl=k_lossy,
            forced_n_prime=mult * bound, **shared))
        winner = "lossy" if lossy.mean_total_time < trad.mean_total_time else "traditional"
        print(f"N' = {mult:4.2f} x bound ({mult * bound:6.0f}): mean T_t = "
              f"{lossy.mean_total_time:8.0f} +- {lossy.ci95_total_time:5.0f} "
              f"-> {winner} wins")
    return 0


if __name__ == "__main__":
    sys.exit(main())
