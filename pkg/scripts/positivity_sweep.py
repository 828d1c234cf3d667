"""Integrate from many random positive initial states and tally terminations."""

import argparse
from collections import Counter

import numpy as np

from balanced_rd import BalancedForm, assemble, integrate, monitor_persistency, uniform_interval_mesh
from balanced_rd.network import load_network
from balanced_rd.sim import IntegratorConfig

from run_reference import CONFIG


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--t-end", type=float, default=2.0)
    ap.add_argument("--low", type=float, default=0.05)
    ap.add_argument("--high", type=float, default=5.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    net = load_network(CONFIG.parent / "network_fig3.json")
    bf = BalancedForm.from_equilibrium(net, [1.0, 1.0, 0.25, 0.15])
    sys = assemble(net, bf, uniform_interval_mesh(1.0, 20), [0.33, 0.72, 0.91, 0.67])
    rng = np.random.default_rng(args.seed)
    cfg = IntegratorConfig(t_end=args.t_end)
    tally, warnings, lowest = Counter(), 0, np.inf
    for _ in range(args.runs):
        traj = integrate(sys, rng.uniform(args.low, args.high, sys.size), cfg)
        tally[traj.termination.value] += 1
        rep = monitor_persistency(traj)
        warnings += rep.warning
        lowest = min(lowest, rep.minimum)
    print(f"terminations: {dict(tally)}")
    print(f"persistency warnings: {warnings}, smallest recorded entry: {lowest:.3e}")


if __name__ == "__main__":
    main()
