"""Compartmental reaction-diffusion systems on a simplicial mesh.

The state ``X`` stacks one concentration vector per vertex (compartment),
``X = (x^1, ..., x^N)``, so ``X.reshape(N, m)[j]`` is compartment ``j``.
Diffusion acts on the disagreement ``X / X*`` through the Kronecker-lifted
Laplacian ``(d0 (x) I_m)^T (star1 (x) I_m) R_d (d0 (x) I_m)``.  It is applied
blockwise; :func:`laplacian_matrix` materialises the same operator for checks.

Boundary fluxes of the open model are counted positive when they add mass to
the boundary compartments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import ConsistencyError, DomainError
from .mesh import DecOperators, SimplicialMesh, build_dec_operators
from .network import BalancedForm, ReactionNetwork, conservation_basis

__all__ = [
    "SCALINGS",
    "CompartmentalSystem",
    "Diagnostics",
    "assemble",
    "diffusion_only_system",
    "edge_weights",
    "apply_laplacian",
    "laplacian_matrix",
    "linear_diffusion_operator",
    "reaction_term",
    "closed_field",
    "open_field",
    "boundary_output",
    "supply_rate",
    "total_energy",
    "energy_gradient",
    "energy_rate",
    "diagnostics",
    "moiety_basis",
    "moiety_totals",
    "uniformity",
]

# R_d entry per species: D_i / x*_i (literal Fig. 3 recipe), D_i * x*_i
# (Fickian diffusion of x itself), or D_i unchanged.
SCALINGS = ("inverse_equilibrium", "equilibrium", "none")


@dataclass(frozen=True)
class CompartmentalSystem:
    """An assembled compartmental model; build it with :func:`assemble`."""

    net: ReactionNetwork | None
    bf: BalancedForm | None
    x_star: np.ndarray
    mesh: SimplicialMesh
    ops: DecOperators
    diffusivity: np.ndarray | None
    edge_diffusion: Callable[[np.ndarray], np.ndarray] | None
    mode: str
    scaling: str
    const_weights: np.ndarray | None  # (N_e, m) star1 * R_d, constant case
    moieties: np.ndarray

    @property
    def m(self) -> int:
        return self.x_star.size

    @property
    def N(self) -> int:
        return self.mesh.n_vertices

    @property
    def size(self) -> int:
        return self.m * self.N

    @property
    def n_boundary(self) -> int:
        return len(self.mesh.boundary_vertices)

    @property
    def diffusing(self) -> np.ndarray:
        """Mask of species that take part in diffusion."""
        if self.const_weights is None:
            return np.ones(self.m, dtype=bool)
        return np.any(self.const_weights > 0, axis=0)

    @property
    def X_star(self) -> np.ndarray:
        return np.tile(self.x_star, self.N)


@dataclass(frozen=True)
class Diagnostics:
    """Energy and dissipation at one state.

    ``eps_R`` follows the sign of the energy balance (every entry <= 0) and
    ``G_d_dot = sum_j |*sigma_j| eps_R[j] - eps_D``.
    """

    G_d: float
    eps_R: np.ndarray
    eps_D: float
    G_d_dot: float
    moieties: np.ndarray
    uniformity: float
    eq_residual: np.ndarray

    @property
    def sum_eps_R(self) -> float:
        """Dual-volume weighted reaction dissipation (the reaction part of ``G_d_dot``)."""
        return self.G_d_dot + self.eps_D


def _scale_factor(x_star, scaling):
    if scaling == "inverse_equilibrium":
        return 1.0 / x_star
    if scaling == "equilibrium":
        return x_star.copy()
    if scaling == "none":
        return np.ones_like(x_star)
    raise ValueError(f"unknown diffusion scaling {scaling!r}; choose from {SCALINGS}")


def _moiety_basis_for(net, m):
    if net is None:
        return np.eye(m, dtype=np.int64)
    return conservation_basis(net)


def assemble(
    net: ReactionNetwork,
    bf: BalancedForm,
    mesh: SimplicialMesh,
    diffusion,
    mode: str = "closed",
    scaling: str = "inverse_equilibrium",
    ops: DecOperators | None = None,
) -> CompartmentalSystem:
    """Assemble the compartmental model of ``net`` on ``mesh``.

    ``diffusion`` is either an m-vector of nonnegative diffusivities, turned
    into the constant ``R_d`` entry ``D_i * scale_i`` on every edge, or a
    callable ``R_d(X)`` returning the positive diagonal of length ``m * N_e``
    (edge-blocked, like ``(d0 (x) I_m) X``).
    """
    if mode not in ("closed", "open"):
        raise ValueError(f"mode must be 'closed' or 'open' (got {mode!r})")
    x_star = None
    if bf is not None:
        if net is None:
            raise ConsistencyError("a balanced form needs its network")
        bf.check(net)
        x_star = np.array(bf.x_star)
    return _build(net, bf, x_star, mesh, diffusion, mode, scaling, ops)


def diffusion_only_system(mesh: SimplicialMesh, x_star, diffusion, mode="closed",
                          scaling="inverse_equilibrium", ops=None) -> CompartmentalSystem:
    """A system with no reactions (``F == 0``), for pure transport studies."""
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    if np.any(x_star <= 0):
        raise DomainError("x_star must be strictly positive")
    return _build(None, None, x_star, mesh, diffusion, mode, scaling, ops)


def _build(net, bf, x_star, mesh, diffusion, mode, scaling, ops):
    if mode not in ("closed", "open"):
        raise ValueError(f"mode must be 'closed' or 'open' (got {mode!r})")
    ops = ops if ops is not None else build_dec_operators(mesh)
    if ops.d0.shape != (mesh.n_edges, mesh.n_vertices):
        raise ConsistencyError("DEC operators do not belong to this mesh")
    m = x_star.size
    scale = _scale_factor(x_star, scaling)
    diffusivity = None
    edge_diffusion = None
    weights = None
    if callable(diffusion):
        edge_diffusion = diffusion
    else:
        diffusivity = np.asarray(diffusion, dtype=float).ravel()
        if diffusivity.shape != (m,):
            raise ConsistencyError(f"diffusion has {diffusivity.size} entries for {m} species")
        if np.any(diffusivity < 0) or not np.all(np.isfinite(diffusivity)):
            raise ValueError("diffusivities must be nonnegative")
        weights = ops.star1_diag[:, None] * (diffusivity * scale)[None, :]
        weights.setflags(write=False)
        diffusivity.setflags(write=False)
    x_star.setflags(write=False)
    return CompartmentalSystem(
        net=net, bf=bf, x_star=x_star, mesh=mesh, ops=ops, diffusivity=diffusivity,
        edge_diffusion=edge_diffusion, mode=mode, scaling=scaling, const_weights=weights,
        moieties=_moiety_basis_for(net, m),
    )


def _blocks(sys: CompartmentalSystem, X, allow_zero=False) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape != (sys.size,):
        raise ConsistencyError(f"state has shape {X.shape}, expected ({sys.size},)")
    bad = X < 0 if allow_zero else X <= 0
    if np.any(bad) or not np.all(np.isfinite(X)):
        raise DomainError("state must be strictly positive" if not allow_zero else "state must be nonnegative")
    return X.reshape(sys.N, sys.m)


def edge_weights(sys: CompartmentalSystem, X=None) -> np.ndarray:
    """``star1 * R_d(X)`` as an ``(N_e, m)`` array."""
    if sys.const_weights is not None:
        return sys.const_weights
    r = np.asarray(sys.edge_diffusion(np.asarray(X, dtype=float)), dtype=float)
    if r.shape != (sys.mesh.n_edges * sys.m,):
        raise ConsistencyError(f"R_d(X) returned shape {r.shape}, expected ({sys.mesh.n_edges * sys.m},)")
    if not np.all(r > 0):
        raise ValueError("R_d(X) must be strictly positive")
    return sys.ops.star1_diag[:, None] * r.reshape(sys.mesh.n_edges, sys.m)


def apply_laplacian(sys: CompartmentalSystem, Y: np.ndarray, X=None) -> np.ndarray:
    """Blockwise ``Delta_d Y`` for ``Y`` of shape ``(N, m)``; ``X`` feeds ``R_d``."""
    W = edge_weights(sys, X)
    d0 = sys.ops.d0
    return d0.T @ (W * (d0 @ Y))


def laplacian_matrix(sys: CompartmentalSystem, X=None) -> sp.csr_matrix:
    """Materialised ``(d0 (x) I)^T (star1 (x) I) R_d (d0 (x) I)``."""
    W = edge_weights(sys, X)
    Dm = sp.kron(sys.ops.d0, sp.identity(sys.m), format="csr")
    return (Dm.T @ sp.diags(W.ravel()) @ Dm).tocsr()


def linear_diffusion_operator(sys: CompartmentalSystem) -> sp.csr_matrix:
    """Constant matrix ``L`` with ``L @ X`` equal to the diffusion part of the closed field."""
    if sys.const_weights is None:
        raise ValueError("state-dependent diffusion has no constant operator")
    inv_star0 = sp.diags(np.repeat(1.0 / sys.ops.star0_diag, sys.m))
    inv_xs = sp.diags(1.0 / sys.X_star)
    return (-(inv_star0 @ laplacian_matrix(sys) @ inv_xs)).tocsr()


def _monomials(sys, x, allow_zero):
    y = x / sys.x_star
    if allow_zero:
        # x**0 == 1 even at x == 0, unlike exp(0 * log 0)
        return np.prod(y[..., :, None] ** sys.net.Z[None, :, :], axis=-2)
    return np.exp(np.log(y) @ sys.net.Z)


def reaction_term(sys: CompartmentalSystem, X, allow_zero=False) -> np.ndarray:
    """``F(X)``: the balanced reaction field of every compartment, shape ``(N, m)``."""
    x = _blocks(sys, X, allow_zero)
    if sys.net is None:
        return np.zeros_like(x)
    flux = -sys.bf.kappa * (_monomials(sys, x, allow_zero) @ sys.net.B)
    return flux @ sys.net.S.T


def closed_field(sys: CompartmentalSystem, X, allow_zero: bool = False) -> np.ndarray:
    """Right-hand side of the zero-flux compartmental model.

    With ``allow_zero`` the field is also evaluated on the boundary of the
    orthant (zero entries), using the continuous extension of the monomials.
    """
    x = _blocks(sys, X, allow_zero)
    diff = apply_laplacian(sys, x / sys.x_star, X) / sys.ops.star0_diag[:, None]
    return (reaction_term(sys, X, allow_zero) - diff).ravel()


def _boundary_flux(sys, f_b_hat):
    fb = np.asarray(f_b_hat, dtype=float)
    if fb.size != sys.n_boundary * sys.m:
        raise ConsistencyError(
            f"boundary flux has {fb.size} entries, expected {sys.n_boundary} boundary vertices x {sys.m} species"
        )
    return fb.reshape(sys.n_boundary, sys.m)


def open_field(sys: CompartmentalSystem, X, f_b_hat) -> np.ndarray:
    """Closed field plus ``((star0)^-1 (x) I)(tr (x) I)^T f_b_hat``."""
    fb = _boundary_flux(sys, f_b_hat)
    inject = np.zeros((sys.N, sys.m))
    np.add.at(inject, sys.mesh.boundary_vertices, fb)
    return closed_field(sys, X) + (inject / sys.ops.star0_diag[:, None]).ravel()


def boundary_output(sys: CompartmentalSystem, X) -> np.ndarray:
    """Collocated output ``e_b = (tr (x) I)(X / X*)``."""
    x = _blocks(sys, X)
    return (x[sys.mesh.boundary_vertices] / sys.x_star).ravel()


def supply_rate(sys: CompartmentalSystem, X, f_b_hat) -> float:
    """Energy delivered through the boundary, ``<tr Ln(X/X*), f_b_hat>``."""
    x = _blocks(sys, X)
    fb = _boundary_flux(sys, f_b_hat)
    return float(np.sum(np.log(x[sys.mesh.boundary_vertices] / sys.x_star) * fb))


def total_energy(sys: CompartmentalSystem, X) -> float:
    x = _blocks(sys, X)
    g = np.sum(x * np.log(x / sys.x_star) + sys.x_star - x, axis=1)
    return float(g @ sys.ops.star0_diag)


def energy_gradient(sys: CompartmentalSystem, X) -> np.ndarray:
    """``(star0 (x) I_m) Ln(X / X*)``."""
    x = _blocks(sys, X)
    return (sys.ops.star0_diag[:, None] * np.log(x / sys.x_star)).ravel()


def _eps_R(sys, x):
    if sys.net is None:
        return np.zeros(sys.N)
    gamma = np.log(x / sys.x_star) @ sys.net.Z
    return -np.sum((gamma @ sys.net.B) * sys.bf.kappa * (np.exp(gamma) @ sys.net.B), axis=1)


def _eps_D(sys, x, X):
    W = edge_weights(sys, X)
    d0 = sys.ops.d0
    return float(np.sum((d0 @ np.log(x / sys.x_star)) * W * (d0 @ (x / sys.x_star))))


def energy_rate(sys: CompartmentalSystem, X, f_b_hat=None) -> float:
    """Time derivative of ``G_d`` from the dissipation terms (plus boundary supply)."""
    x = _blocks(sys, X)
    rate = float(_eps_R(sys, x) @ sys.ops.star0_diag) - _eps_D(sys, x, X)
    if f_b_hat is not None:
        rate += supply_rate(sys, X, f_b_hat)
    return rate


def moiety_basis(sys: CompartmentalSystem) -> np.ndarray:
    return sys.moieties


def moiety_totals(sys: CompartmentalSystem, X) -> np.ndarray:
    """Dual-volume weighted totals ``sum_j |*sigma_j| w^T x^j`` per moiety ``w``."""
    x = _blocks(sys, X)
    return sys.moieties @ (x.T @ sys.ops.star0_diag)


def uniformity(sys: CompartmentalSystem, X) -> float:
    """Largest relative inter-compartment spread ``(max - min) / mean`` over species."""
    x = _blocks(sys, X)
    spread = (x.max(axis=0) - x.min(axis=0)) / x.mean(axis=0)
    return float(spread.max())


def _eq_residual(sys, x):
    if sys.net is None:
        return np.zeros(sys.N)
    S = sys.net.S
    return np.max(np.abs(np.log(x) @ S - np.log(sys.x_star) @ S), axis=1)


def diagnostics(sys: CompartmentalSystem, X) -> Diagnostics:
    x = _blocks(sys, X)
    eps_R = _eps_R(sys, x)
    eps_D = _eps_D(sys, x, X)
    return Diagnostics(
        G_d=total_energy(sys, X),
        eps_R=eps_R,
        eps_D=eps_D,
        G_d_dot=float(eps_R @ sys.ops.star0_diag) - eps_D,
        moieties=moiety_totals(sys, X),
        uniformity=uniformity(sys, X),
        eq_residual=_eq_residual(sys, x),
    )
