"""Command-line front end.

Exit codes: 0 success, 2 configuration/validation error, 3 dynamics or
solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import load_run_config, network_data, read_config_dict, resolve_mesh
from .errors import ConfigError, ConsistencyError, ConvergenceError, DomainError, MeshError
from .network import (
    BalancedForm,
    ReactionNetwork,
    conservation_basis,
    equilibria_set_member,
    find_equilibrium,
    mass_action_flux,
    network_arrays,
    network_problems,
)
from .sim import Termination, integrate, monitor_persistency, verify_lyapunov

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE = 0, 2, 3

UNIFORM_TOL = 1e-6
EQ_TOL = 1e-3


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _matrix(M) -> str:
    return "\n".join("  [" + ", ".join(f"{a:g}" for a in row) + "]" for row in np.atleast_2d(M))


def write_trajectory_csv(path, traj) -> None:
    sys_ = traj.system
    names = sys_.net.species_names if sys_.net is not None else [f"x{i + 1}" for i in range(sys_.m)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "compartment", *names])
        for t, X in zip(traj.times, traj.states):
            for j, x in enumerate(X.reshape(sys_.N, sys_.m)):
                w.writerow([_fmt(t), j, *map(_fmt, x)])


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Return ``(times, states, species)`` with states shaped ``(records, N * m)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    species = rows[0][2:]
    times, blocks = [], {}
    for row in rows[1:]:
        t = float(row[0])
        if t not in blocks:
            times.append(t)
            blocks[t] = []
        blocks[t].append([float(v) for v in row[2:]])
    states = np.array([np.ravel(blocks[t]) for t in times])
    return np.array(times), states, species


def write_diagnostics_csv(path, traj) -> None:
    k = traj.system.moieties.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "G_d", "eps_D", "sum_eps_R", "G_d_dot", *[f"moiety_{i + 1}" for i in range(k)], "uniformity"])
        for t, d in zip(traj.times, traj.diagnostics):
            w.writerow([_fmt(t), _fmt(d.G_d), _fmt(d.eps_D), _fmt(d.sum_eps_R), _fmt(d.G_d_dot),
                        *map(_fmt, d.moieties), _fmt(d.uniformity)])


def build_report(traj, bf: BalancedForm) -> dict:
    sys_ = traj.system
    final = traj.final_blocks
    _, residual = equilibria_set_member(bf, sys_.net, final, EQ_TOL)
    per_comp = np.max(np.abs(residual), axis=1)
    lyap = verify_lyapunov(traj, uniform_tol=UNIFORM_TOL, eq_tol=EQ_TOL)
    pers = monitor_persistency(traj)
    last = traj.diagnostics[-1]
    return {
        "termination": traj.termination.value,
        "t_final": float(traj.times[-1]),
        "records": len(traj.times),
        "steps": traj.n_steps,
        "rejected_steps": traj.n_rejected,
        "species": list(sys_.net.species_names),
        "x_star": bf.x_star.tolist(),
        "kappa": bf.kappa.tolist(),
        "steady_state": final.tolist(),
        "mean_state": final.mean(axis=0).tolist(),
        "uniformity": last.uniformity,
        "uniform": bool(last.uniformity < UNIFORM_TOL),
        "equilibrium_residual": float(per_comp.max()),
        "equilibrium_residual_per_compartment": per_comp.tolist(),
        "in_equilibria_set": bool(per_comp.max() < EQ_TOL),
        "moiety_basis": sys_.moieties.tolist(),
        "moiety_totals_initial": traj.diagnostics[0].moieties.tolist(),
        "moiety_totals_final": last.moieties.tolist(),
        "G_d_initial": traj.diagnostics[0].G_d,
        "G_d_final": last.G_d,
        "lyapunov": {
            "passed": lyap.passed,
            "monotone": lyap.monotone,
            "worst_increase": lyap.worst_increase,
            "increase_tol": lyap.increase_tol,
            "max_eps_R": lyap.max_eps_R,
            "min_eps_D": lyap.min_eps_D,
            "uniformity_applicable": lyap.uniformity_applicable,
            "uniform": lyap.uniform,
            "in_equilibria_set": lyap.in_equilibria_set,
            "messages": lyap.messages,
        },
        "persistency": {
            "warning": pers.warning,
            "minimum": pers.minimum,
            "floor": pers.floor,
            "flagged_components": pers.flagged,
        },
    }


def cmd_simulate(config_path, out=None, mesh=None) -> int:
    try:
        cfg = load_run_config(config_path, mesh)
        bf = cfg.balanced_form()
        system = cfg.build_system(bf)
        X0 = cfg.initial_state(bf.x_star)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ConfigError, MeshError, ConsistencyError, DomainError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(out) if out else cfg.outputs
    out_dir.mkdir(parents=True, exist_ok=True)
    traj = integrate(system, X0, cfg.integrator, f_b_hat=cfg.boundary_flux())
    write_trajectory_csv(out_dir / "trajectory.csv", traj)
    write_diagnostics_csv(out_dir / "diagnostics.csv", traj)
    report = build_report(traj, bf)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    print(f"termination: {report['termination']} at t = {report['t_final']:.6g} ({report['steps']} steps)")
    print("mean final state: " + ", ".join(f"{n}={v:.6g}" for n, v in zip(report["species"], report["mean_state"])))
    print(f"uniformity spread: {report['uniformity']:.3e} (uniform: {report['uniform']})")
    print(f"equilibria-set residual: {report['equilibrium_residual']:.3e}")
    print(f"lyapunov check: {'pass' if report['lyapunov']['passed'] else 'FAIL'}; "
          f"persistency warning: {report['persistency']['warning']}")
    print(f"wrote {out_dir}/trajectory.csv, diagnostics.csv, report.json")
    if traj.termination in (Termination.STEADY_STATE, Termination.HORIZON):
        return EXIT_OK
    return EXIT_FAILURE


def cmd_validate(config_path, mesh=None) -> int:
    problems = []
    try:
        data, base = read_config_dict(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    net = None
    try:
        species, Z, B, kf, kr = network_arrays(network_data(data, base))
        net_problems = network_problems(Z, B, kf, kr, species)
        problems += [f"network: {p}" for p in net_problems]
        if not net_problems:
            net = ReactionNetwork(species, Z, B, kf, kr)
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        problems.append(f"network: {exc}")
    try:
        resolve_mesh(mesh or data.get("mesh", "interval:1:20"), base)
    except (ConfigError, MeshError) as exc:
        problems.append(f"mesh: {exc}")

    if net is not None:
        S = net.Z @ net.B
        if not np.array_equal(S, net.S):
            problems.append("network: S differs from Z B")
        print("Z =\n" + _matrix(net.Z))
        print("B =\n" + _matrix(net.B))
        print("S = Z B =\n" + _matrix(net.S))
        print("moiety basis =\n" + _matrix(conservation_basis(net)))
        bf = None
        if data.get("x_star") is not None:
            x_star = np.asarray(data["x_star"], dtype=float)
            try:
                residual = float(np.max(np.abs(mass_action_flux(net, x_star))))
                print(f"|v(x*)|_inf = {residual:.3e}")
                bf = BalancedForm.from_equilibrium(net, x_star)
            except (ConsistencyError, DomainError, ValueError) as exc:
                problems.append(f"balanced form: {exc}")
        else:
            try:
                bf = find_equilibrium(net, data.get("guess") or np.ones(net.m))
                print(f"x* (solved) = {bf.x_star.tolist()}")
            except (ConvergenceError, DomainError) as exc:
                problems.append(f"balanced form: {exc}")
        if bf is not None:
            print("kappa(x*) = [" + ", ".join(f"{k:g}" for k in bf.kappa) + "]")

    if problems:
        for p in problems:
            print(f"INVALID {p}", file=sys.stderr)
        return EXIT_CONFIG
    print("valid")
    return EXIT_OK


def _parse_guess(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError(f"--guess must be comma-separated numbers (got {text!r})") from None


def cmd_equilibrium(config_path, guess: str | None = None) -> int:
    try:
        data, base = read_config_dict(config_path)
        net = ReactionNetwork(*network_arrays(network_data(data, base)))
        g = _parse_guess(guess) if guess else np.asarray(data.get("guess") or np.ones(net.m), dtype=float)
        if g.shape != (net.m,) or np.any(g <= 0):
            raise ConfigError(f"guess must hold {net.m} strictly positive values")
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        bf, iterations = find_equilibrium(net, g, full_output=True)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print("x* = [" + ", ".join(_fmt(v) for v in bf.x_star) + "]")
    print("kappa(x*) = [" + ", ".join(_fmt(v) for v in bf.kappa) + "]")
    print(f"|v(x*)|_inf = {bf.residual(net):.3e}")
    print("S^T Ln x* = [" + ", ".join(f"{v:.6g}" for v in np.log(bf.x_star) @ net.S) + "]")
    print(f"least-squares corrections = {iterations}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="balanced-rd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="integrate a configured system and write CSV/JSON outputs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--mesh", help="mesh override, e.g. interval:1:20")
    p = sub.add_parser("validate", help="check network, equilibrium and mesh")
    p.add_argument("--config", required=True)
    p.add_argument("--mesh")
    p = sub.add_parser("equilibrium", help="solve for a thermodynamic equilibrium")
    p.add_argument("--config", required=True)
    p.add_argument("--guess", help="comma-separated positive starting point")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args.config, args.out, args.mesh)
    if args.command == "validate":
        return cmd_validate(args.config, args.mesh)
    return cmd_equilibrium(args.config, args.guess)


if __name__ == "__main__":
    sys.exit(main())
