import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from balanced_rd import BalancedForm, equilibria_set_member, load_network
from balanced_rd.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, main, read_trajectory_csv
from balanced_rd.config import compile_expression, load_run_config
from balanced_rd.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "src" / "balanced_rd" / "configs"


@pytest.fixture
def workdir(tmp_path):
    for f in CONFIGS.glob("*.json"):
        shutil.copy(f, tmp_path / f.name)
    return tmp_path


def write_config(workdir, name, **changes):
    data = json.loads((workdir / "fig3.json").read_text())
    data.update(changes)
    p = workdir / name
    p.write_text(json.dumps(data))
    return p


def test_simulate_toy(workdir, capsys):
    out = workdir / "out"
    assert main(["simulate", "--config", str(workdir / "toy_isomerization.json"), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["termination"] == "steady_state"
    mean = np.array(report["mean_state"])
    assert mean[1] / mean[0] == pytest.approx(2.0, rel=1e-6)
    assert report["uniform"] and report["in_equilibria_set"] and report["lyapunov"]["passed"]
    assert "termination: steady_state" in capsys.readouterr().out


def test_trajectory_csv_round_trip(workdir):
    out = workdir / "out"
    main(["simulate", "--config", str(workdir / "toy_isomerization.json"), "--out", str(out)])
    times, states, species = read_trajectory_csv(out / "trajectory.csv")
    report = json.loads((out / "report.json").read_text())
    assert species == ["A", "B"]
    assert times[0] == 0 and times[-1] == report["t_final"]
    # '.17g' round trips exactly
    np.testing.assert_array_equal(states[-1].reshape(-1, 2), np.array(report["steady_state"]))
    header = (out / "diagnostics.csv").read_text().splitlines()[0].split(",")
    assert header[:5] == ["t", "G_d", "eps_D", "sum_eps_R", "G_d_dot"]


def test_report_residual_matches_recomputation(workdir):
    out = workdir / "out"
    cfg = write_config(workdir, "short.json", integrator={"t_end": 1.0, "record_every": 0.5})
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["termination"] == "horizon"
    net = load_network(workdir / "network_fig3.json")
    bf = BalancedForm.from_equilibrium(net, report["x_star"])
    _, res = equilibria_set_member(bf, net, np.array(report["steady_state"]), 1e-3)
    assert report["equilibrium_residual"] == pytest.approx(np.abs(res).max(), rel=1e-12)
    np.testing.assert_allclose(report["moiety_totals_final"], [3.1458, 2.9797], atol=1e-4)


def test_equilibrium_config_is_immediately_steady(workdir):
    out = workdir / "out"
    assert main(["simulate", "--config", str(workdir / "fig3_at_equilibrium.json"), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["termination"] == "steady_state" and report["t_final"] == 0


def test_validate_ok(workdir, capsys):
    assert main(["validate", "--config", str(workdir / "fig3.json")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "[-1, 1]" in out and "kappa(x*) = [0.1, 0.075]" in out and out.strip().endswith("valid")


def test_validate_bad_incidence(workdir, capsys):
    net = {"species": ["x1", "x2", "x3", "x4"], "Z": [[1, 0, 1], [1, 0, 0], [0, 1, 0], [0, 0, 1]],
           "B": [[-1, 0], [1, -1], [0, 0]], "k_forw": [0.1, 0.3], "k_rev": [0.4, 0.5]}
    cfg = write_config(workdir, "bad.json", network=net)
    assert main(["validate", "--config", str(cfg)]) == EXIT_CONFIG
    assert "reaction 1" in capsys.readouterr().err


def test_validate_obtuse_mesh(workdir, capsys):
    cfg = write_config(workdir, "obtuse.json", mesh="mesh_obtuse.json")
    assert main(["validate", "--config", str(cfg)]) == EXIT_CONFIG
    assert "triangle 0" in capsys.readouterr().err


def test_validate_non_equilibrium(workdir, capsys):
    cfg = write_config(workdir, "noneq.json", x_star=[1, 1, 1, 1])
    assert main(["validate", "--config", str(cfg)]) == EXIT_CONFIG
    assert "not a thermodynamic equilibrium" in capsys.readouterr().err


@pytest.mark.parametrize(
    "changes",
    [
        dict(diffusion=[0.1, 0.2]),
        dict(initial_condition={"x1": "__import__('os')", "x2": "1", "x3": "1", "x4": "1"}),
        dict(initial_condition={"x1": "xi - 0.5", "x2": "1", "x3": "1", "x4": "1"}),
        dict(integrator={"t_end": -1}),
        dict(integrator={"bogus": 1}),
        dict(mesh="interval:1:1"),
        dict(diffusion_scaling="fick"),
        dict(boundary={"flux": [[1, 2, 3]]}),
    ],
)
def test_simulate_config_errors(workdir, changes, capsys):
    cfg = write_config(workdir, "broken.json", **changes)
    assert main(["simulate", "--config", str(cfg), "--out", str(workdir / "o")]) == EXIT_CONFIG
    assert capsys.readouterr().err


def test_missing_config(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_simulate_positivity_failure_exit_code(workdir):
    flux = [[-50, -50, -50, -50], [-50, -50, -50, -50]]
    cfg = write_config(workdir, "drain.json", boundary={"flux": flux},
                       integrator={"t_end": 5.0, "dt_min": 1e-9})
    assert main(["simulate", "--config", str(cfg), "--out", str(workdir / "o")]) == EXIT_FAILURE
    report = json.loads((workdir / "o" / "report.json").read_text())
    assert report["termination"] == "positivity_failure"


def test_equilibrium_command(workdir, capsys):
    assert main(["equilibrium", "--config", str(workdir / "fig3.json"), "--guess", "1,1,1,1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "S^T Ln x* = [-1.38629, -0.510826]" in out


def test_equilibrium_command_from_equilibrium(workdir, capsys):
    assert main(["equilibrium", "--config", str(workdir / "fig3.json"), "--guess", "1,1,0.25,0.15"]) == EXIT_OK
    assert "least-squares corrections = 0" in capsys.readouterr().out


def test_equilibrium_bad_guess(workdir):
    assert main(["equilibrium", "--config", str(workdir / "fig3.json"), "--guess", "1,a"]) == EXIT_CONFIG
    assert main(["equilibrium", "--config", str(workdir / "fig3.json"), "--guess", "1,1,1"]) == EXIT_CONFIG


def test_equilibrium_inconsistent_network(workdir):
    net = {"species": ["a", "b", "c"], "Z": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
           "B": [[-1, 0, 1], [1, -1, 0], [0, 1, -1]], "k_forw": [2, 2, 2], "k_rev": [1, 1, 1]}
    cfg = workdir / "cycle.json"
    cfg.write_text(json.dumps({"network": net, "diffusion": [1, 1, 1], "initial_condition": ["1", "1", "1"]}))
    assert main(["equilibrium", "--config", str(cfg)]) == EXIT_FAILURE


def test_mesh_override(workdir):
    cfg = load_run_config(workdir / "fig3.json", "interval:2:7")
    assert cfg.mesh.n_vertices == 7
    assert cfg.initial_state(cfg.x_star).shape == (28,)


def test_initial_condition_expressions(workdir):
    cfg = load_run_config(workdir / "fig3.json")
    X = cfg.initial_state().reshape(20, 4)
    xi = np.linspace(0, 1, 20)
    np.testing.assert_allclose(X[:, 2], 2 * np.sin(xi) ** 2 + 0.2 * xi + 0.2, rtol=1e-15)
    np.testing.assert_allclose(X[:, 1], 1.3 * xi**2 + 0.1, rtol=1e-15)


@pytest.mark.parametrize("bad", ["xi.real", "open('x')", "lambda: 1", "[1]", "xi if 1 else 2"])
def test_expression_whitelist(bad):
    with pytest.raises(ConfigError):
        compile_expression(bad)


def test_two_triangle_config(workdir):
    out = workdir / "out"
    assert main(["simulate", "--config", str(workdir / "fig3_two_triangles.json"), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["termination"] == "steady_state" and report["uniform"] and report["in_equilibria_set"]


def test_module_entry_point(workdir):
    res = subprocess.run([sys.executable, "-m", "balanced_rd", "validate", "--config", str(workdir / "fig3.json")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "valid" in res.stdout


@pytest.mark.slow
def test_fig3_end_to_end(workdir):
    out = workdir / "out"
    assert main(["simulate", "--config", str(workdir / "fig3.json"), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["termination"] == "steady_state"
    np.testing.assert_allclose(report["mean_state"], [2.1856, 1.7557, 0.9602, 0.2638], atol=2e-2)
    assert report["uniformity"] < 1e-6 and report["equilibrium_residual"] < 1e-3
    assert report["lyapunov"]["passed"] and not report["persistency"]["warning"]
