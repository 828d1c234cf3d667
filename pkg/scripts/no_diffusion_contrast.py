"""Compare the reference run with and without diffusion.

Without transport every compartment relaxes to its own point of the
equilibria set, so the final profile stays non-uniform.
"""

import numpy as np

from balanced_rd import BalancedForm, assemble, integrate, uniform_interval_mesh
from balanced_rd.network import load_network

from compare_scalings import initial_state
from run_reference import CONFIG


def main():
    net = load_network(CONFIG.parent / "network_fig3.json")
    bf = BalancedForm.from_equilibrium(net, [1.0, 1.0, 0.25, 0.15])
    mesh = uniform_interval_mesh(1.0, 20)
    lnS_star = np.log(bf.x_star) @ net.S
    for label, D in [("with diffusion", [0.33, 0.72, 0.91, 0.67]), ("no diffusion", [0.0] * 4)]:
        traj = integrate(assemble(net, bf, mesh, D), initial_state(mesh))
        final = traj.final_blocks
        residual = np.abs(np.log(final) @ net.S - lnS_star).max()
        spread = final.max(axis=0) - final.min(axis=0)
        print(f"{label:15s} {traj.termination.value} at t={traj.times[-1]:.2f}  residual {residual:.1e}  "
              f"spread {np.round(spread, 4).tolist()}")


if __name__ == "__main__":
    main()
