"""Run the reference problem under each diffusion scaling.

The steady state is fixed by the moiety totals and the equilibria set, so it
should not depend on the scaling; transient speed and stiffness do.
"""

import argparse
import time

import numpy as np

from balanced_rd import BalancedForm, assemble, integrate, uniform_interval_mesh
from balanced_rd.model import SCALINGS
from balanced_rd.network import load_network
from balanced_rd.sim import IntegratorConfig, stable_step

from run_reference import CONFIG


def initial_state(mesh):
    xi = mesh.vertices[:, 0]
    return np.column_stack([4 * xi + 0.3, 1.3 * xi**2 + 0.1, 2 * np.sin(xi) ** 2 + 0.2 * xi + 0.2, 3 * xi + 0.1]).ravel()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20)
    args = ap.parse_args()

    net = load_network(CONFIG.parent / "network_fig3.json")
    bf = BalancedForm.from_equilibrium(net, [1.0, 1.0, 0.25, 0.15])
    mesh = uniform_interval_mesh(1.0, args.n)
    D = [0.33, 0.72, 0.91, 0.67]
    for scaling in SCALINGS:
        sys = assemble(net, bf, mesh, D, scaling=scaling)
        start = time.perf_counter()
        traj = integrate(sys, initial_state(mesh), IntegratorConfig())
        mean = traj.final_blocks.mean(axis=0)
        print(f"{scaling:20s} dt cap {stable_step(sys):.2e}  {traj.termination.value} at t={traj.times[-1]:7.3f}  "
              f"steps {traj.n_steps:8d}  {time.perf_counter() - start:5.1f}s  mean {np.round(mean, 5).tolist()}")


if __name__ == "__main__":
    main()
