"""Run configuration files and initial-condition expressions.

A run config is a JSON object::

    {
      "network": {...} | "network.json",
      "mesh": "interval:1:20" | "mesh.json" | {...},
      "x_star": [..]            (optional; otherwise solved from "guess"),
      "guess": [..],
      "diffusion": [..],
      "diffusion_scaling": "inverse_equilibrium",
      "initial_condition": {"x1": "4*xi + 0.3", ...} | [...] | {"values": [[...], ...]} | "equilibrium",
      "boundary": "zero-flux" | {"flux": [[...], ...]},
      "integrator": {"t_end": 200, ...},
      "outputs": "out"
    }

Relative file paths are resolved against the directory of the config file.
"""

from __future__ import annotations

import ast
import json
import operator
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .mesh import SimplicialMesh, load_mesh, mesh_from_dict, parse_mesh_spec
from .model import SCALINGS, CompartmentalSystem, assemble
from .network import BalancedForm, ReactionNetwork, find_equilibrium, network_arrays
from .sim import IntegratorConfig

__all__ = ["RunConfig", "load_run_config", "read_config_dict", "compile_expression", "resolve_mesh"]

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_VARS = ("xi", "eta")


def compile_expression(text: str):
    """Compile a closed-form expression in ``xi`` (and ``eta`` in 2-D).

    Only numbers, ``+ - * / ^``, parentheses and ``sin``, ``cos``, ``exp`` are
    accepted.  Returns a function of the vertex coordinate array ``(N, dim)``.
    """
    src = str(text).replace("^", "**").replace("ξ", "xi").replace("η", "eta")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def check(node):
        if isinstance(node, ast.Expression):
            return check(node.body)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return check(node.left) and check(node.right)
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return check(node.operand)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return True
        if isinstance(node, ast.Name) and node.id in _VARS:
            return True
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
                and len(node.args) == 1 and not node.keywords):
            return check(node.args[0])
        raise ConfigError(f"unsupported construct {ast.dump(node)[:40]!r} in expression {text!r}")

    check(tree)

    def evaluate(node, env):
        if isinstance(node, ast.Expression):
            return evaluate(node.body, env)
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](evaluate(node.left, env), evaluate(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](evaluate(node.operand, env))
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id]
        return _FUNCS[node.func.id](evaluate(node.args[0], env))

    def fn(coords):
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        env = {"xi": coords[:, 0], "eta": coords[:, 1] if coords.shape[1] > 1 else np.zeros(len(coords))}
        with np.errstate(all="ignore"):
            return np.broadcast_to(np.asarray(evaluate(tree, env), dtype=float), (len(coords),)).copy()

    return fn


def read_config_dict(path) -> tuple[dict, Path]:
    path = Path(path)
    try:
        with open(path) as fh:
            return json.load(fh), path.resolve().parent
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None


def _load_json_ref(ref, base: Path, what: str) -> dict:
    if isinstance(ref, dict):
        return ref
    p = base / ref
    try:
        with open(p) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{what} file {p} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {p} is not valid JSON: {exc}") from None


def network_data(data: dict, base: Path) -> dict:
    if "network" not in data:
        raise ConfigError("config has no 'network'")
    return _load_json_ref(data["network"], base, "network")


def resolve_mesh(ref, base: Path) -> SimplicialMesh:
    """Build a mesh from an ``interval:L:N`` spec, a file path, or an inline object."""
    if isinstance(ref, str) and ref.startswith("interval:"):
        return parse_mesh_spec(ref)
    if isinstance(ref, dict):
        return mesh_from_dict(ref)
    p = base / ref
    if not p.exists():
        raise ConfigError(f"mesh file {p} not found")
    return load_mesh(p)


def _integrator(raw: dict | None) -> IntegratorConfig:
    raw = dict(raw or {})
    known = {f.name for f in fields(IntegratorConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown integrator settings {sorted(unknown)}")
    try:
        return IntegratorConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad integrator settings: {exc}") from None


@dataclass(frozen=True)
class RunConfig:
    network: ReactionNetwork
    mesh: SimplicialMesh
    x_star: np.ndarray | None
    guess: np.ndarray | None
    diffusion: np.ndarray
    scaling: str
    initial_condition: object
    boundary: object
    integrator: IntegratorConfig
    outputs: Path

    def balanced_form(self) -> BalancedForm:
        if self.x_star is not None:
            return BalancedForm.from_equilibrium(self.network, self.x_star)
        guess = self.guess if self.guess is not None else np.ones(self.network.m)
        return find_equilibrium(self.network, guess)

    @property
    def open(self) -> bool:
        return self.boundary != "zero-flux"

    def boundary_flux(self) -> np.ndarray | None:
        if not self.open:
            return None
        fb = np.asarray(self.boundary["flux"], dtype=float)
        expected = (len(self.mesh.boundary_vertices), self.network.m)
        if fb.size != expected[0] * expected[1]:
            raise ConfigError(f"boundary flux needs shape {expected}, got {fb.shape}")
        return fb.reshape(expected)

    def build_system(self, bf: BalancedForm | None = None) -> CompartmentalSystem:
        bf = bf or self.balanced_form()
        return assemble(self.network, bf, self.mesh, self.diffusion,
                        mode="open" if self.open else "closed", scaling=self.scaling)

    def initial_state(self, x_star=None) -> np.ndarray:
        """Evaluate the initial condition at every vertex, stacked per compartment."""
        m, N = self.network.m, self.mesh.n_vertices
        ic = self.initial_condition
        names = self.network.species_names
        if ic == "equilibrium":
            if x_star is None:
                x_star = self.balanced_form().x_star
            X = np.tile(np.asarray(x_star, dtype=float), (N, 1))
        elif isinstance(ic, dict) and "values" in ic:
            X = np.asarray(ic["values"], dtype=float)
            if X.shape != (N, m):
                raise ConfigError(f"initial values need shape ({N}, {m}), got {X.shape}")
        else:
            if isinstance(ic, dict):
                missing = [s for s in names if s not in ic]
                if missing:
                    raise ConfigError(f"initial condition missing species {missing}")
                exprs = [ic[s] for s in names]
            elif isinstance(ic, (list, tuple)) and len(ic) == m:
                exprs = list(ic)
            else:
                raise ConfigError("initial_condition must map every species to an expression")
            X = np.column_stack([compile_expression(e)(self.mesh.vertices) for e in exprs])
        if not np.all(np.isfinite(X)) or np.any(X <= 0):
            j, i = np.argwhere(~(X > 0) | ~np.isfinite(X))[0]
            raise ConfigError(f"initial condition is not strictly positive (species {names[i]}, vertex {j})")
        return X.ravel()


def load_run_config(path, mesh_override: str | None = None) -> RunConfig:
    """Parse and validate a run config; every failure surfaces as :class:`ConfigError`."""
    data, base = read_config_dict(path)
    try:
        network = ReactionNetwork(*network_arrays(network_data(data, base)))
        mesh = resolve_mesh(mesh_override or data.get("mesh", "interval:1:20"), base)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    m = network.m

    def vector(key):
        if data.get(key) is None:
            return None
        v = np.asarray(data[key], dtype=float).ravel()
        if v.shape != (m,):
            raise ConfigError(f"{key} needs {m} entries, got {v.size}")
        return v

    x_star, guess = vector("x_star"), vector("guess")
    if data.get("diffusion") is None:
        raise ConfigError("config has no 'diffusion'")
    diffusion = vector("diffusion")
    if np.any(diffusion < 0):
        raise ConfigError("diffusivities must be nonnegative")
    scaling = data.get("diffusion_scaling", "inverse_equilibrium")
    if scaling not in SCALINGS:
        raise ConfigError(f"diffusion_scaling must be one of {SCALINGS}")
    boundary = data.get("boundary", "zero-flux")
    if boundary != "zero-flux" and not (isinstance(boundary, dict) and "flux" in boundary):
        raise ConfigError("boundary must be 'zero-flux' or {'flux': [[...], ...]}")
    if "initial_condition" not in data:
        raise ConfigError("config has no 'initial_condition'")
    cfg = RunConfig(
        network=network, mesh=mesh, x_star=x_star, guess=guess, diffusion=diffusion, scaling=scaling,
        initial_condition=data["initial_condition"], boundary=boundary,
        integrator=_integrator(data.get("integrator")), outputs=Path(data.get("outputs", "out")),
    )
    cfg.boundary_flux()
    return cfg
