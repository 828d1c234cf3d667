"""Reversible mass-action reaction networks in complex-graph form.

A network is described by its complex composition matrix ``Z`` (species x
complexes) and the incidence matrix ``B`` of the complex graph (complexes x
reactions, -1 at the substrate complex and +1 at the product complex).  The
stoichiometric matrix is ``S = Z @ B``.

Every function accepting a concentration vector also accepts a stack of them
with species on the last axis, so a whole mesh of compartments of shape
``(N, m)`` can be evaluated at once.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import gcd
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConsistencyError, ConvergenceError, DomainError

__all__ = [
    "ReactionNetwork",
    "BalancedForm",
    "GeneralizedKinetics",
    "network_problems",
    "stoichiometric_matrix",
    "mass_action_flux",
    "balanced_flux",
    "reaction_field",
    "generalized_reaction_field",
    "gibbs_energy",
    "chemical_potential",
    "find_equilibrium",
    "equilibria_set_member",
    "conservation_basis",
    "network_arrays",
    "network_from_dict",
    "network_to_dict",
    "load_network",
]

EQUILIBRIUM_TOL = 1e-10


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _positive(x, name="x"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise DomainError(f"{name} must be strictly positive and finite")
    return x


def network_problems(Z, B, k_forw, k_rev, species_names=None) -> list[str]:
    """Return a human-readable list of every structural violation found.

    An empty list means the data describe a valid reversible network.
    """
    problems = []
    Z = np.asarray(Z)
    B = np.asarray(B)
    k_forw = np.asarray(k_forw, dtype=float).ravel()
    k_rev = np.asarray(k_rev, dtype=float).ravel()
    if Z.ndim != 2 or B.ndim != 2:
        return ["Z and B must be two-dimensional"]
    m, c = Z.shape
    if m < 1 or c < 1 or B.shape[1] < 1:
        problems.append("network needs at least one species, complex and reaction")
    if B.shape[0] != c:
        problems.append(f"B has {B.shape[0]} rows but Z has {c} complexes")
        return problems
    r = B.shape[1]
    if species_names is not None and len(species_names) != m:
        problems.append(f"{len(species_names)} species names for {m} rows of Z")
    if np.any(Z < 0) or np.any(Z != np.round(Z)):
        problems.append("Z entries must be nonnegative integers")
    for rho in np.flatnonzero(~np.any(Z != 0, axis=0)):
        problems.append(f"complex {rho} is empty (zero column of Z)")
    for j in range(r):
        col = B[:, j]
        n_minus = int(np.sum(col == -1))
        n_plus = int(np.sum(col == 1))
        n_other = int(np.sum((col != 0) & (col != 1) & (col != -1)))
        if n_minus != 1 or n_plus != 1 or n_other:
            problems.append(
                f"reaction {j}: incidence column must hold exactly one -1 and one +1 "
                f"(found {n_minus} x -1, {n_plus} x +1, {n_other} other nonzeros)"
            )
    for name, k in (("k_forw", k_forw), ("k_rev", k_rev)):
        if k.shape != (r,):
            problems.append(f"{name} has length {k.size}, expected {r}")
        elif not np.all(np.isfinite(k)) or np.any(k <= 0):
            bad = np.flatnonzero(~(k > 0) | ~np.isfinite(k)).tolist()
            problems.append(f"{name} must be strictly positive (reactions {bad})")
    return problems


@dataclass(frozen=True)
class ReactionNetwork:
    """Species, complexes and reversible reactions with mass-action rates."""

    species_names: tuple[str, ...]
    Z: np.ndarray
    B: np.ndarray
    k_forw: np.ndarray
    k_rev: np.ndarray

    def __post_init__(self):
        problems = network_problems(self.Z, self.B, self.k_forw, self.k_rev, self.species_names)
        if problems:
            raise ValueError("invalid reaction network: " + "; ".join(problems))
        names = self.species_names
        if names is None:
            names = [f"x{i + 1}" for i in range(np.shape(self.Z)[0])]
        object.__setattr__(self, "species_names", tuple(str(s) for s in names))
        object.__setattr__(self, "Z", _frozen(self.Z, np.int64))
        object.__setattr__(self, "B", _frozen(self.B, np.int64))
        object.__setattr__(self, "k_forw", _frozen(np.ravel(self.k_forw), float))
        object.__setattr__(self, "k_rev", _frozen(np.ravel(self.k_rev), float))

    @property
    def m(self) -> int:
        return self.Z.shape[0]

    @property
    def c(self) -> int:
        return self.Z.shape[1]

    @property
    def r(self) -> int:
        return self.B.shape[1]

    @cached_property
    def S(self) -> np.ndarray:
        return _frozen(self.Z @ self.B, np.int64)

    @cached_property
    def substrates(self) -> np.ndarray:
        """Index of the substrate complex of every reaction."""
        return _frozen(np.argmin(self.B, axis=0), np.int64)

    @cached_property
    def products(self) -> np.ndarray:
        return _frozen(np.argmax(self.B, axis=0), np.int64)


@dataclass(frozen=True)
class BalancedForm:
    """A thermodynamic equilibrium ``x_star`` and its balanced constants."""

    x_star: np.ndarray
    kappa: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_star", _frozen(_positive(self.x_star, "x_star"), float))
        kappa = np.asarray(self.kappa, dtype=float)
        if not np.all(kappa > 0):
            raise ValueError("balanced constants must be strictly positive")
        object.__setattr__(self, "kappa", _frozen(kappa, float))

    @classmethod
    def from_equilibrium(cls, net: ReactionNetwork, x_star, tol: float = EQUILIBRIUM_TOL):
        """Compute the balanced constants at ``x_star`` and verify ``v(x_star) = 0``."""
        x_star = _positive(x_star, "x_star")
        kappa = net.k_forw * np.exp(np.log(x_star) @ net.Z[:, net.substrates])
        bf = cls(x_star, kappa)
        bf.check(net, tol)
        return bf

    def residual(self, net: ReactionNetwork) -> float:
        """Largest mass-action flux at ``x_star``."""
        return float(np.max(np.abs(mass_action_flux(net, self.x_star))))

    def check(self, net: ReactionNetwork, tol: float = EQUILIBRIUM_TOL) -> None:
        if self.x_star.shape != (net.m,) or self.kappa.shape != (net.r,):
            raise ConsistencyError(
                f"balanced form sized ({self.x_star.size}, {self.kappa.size}) "
                f"for a network with m={net.m}, r={net.r}"
            )
        ln_x = np.log(self.x_star)
        k_sub = net.k_forw * np.exp(ln_x @ net.Z[:, net.substrates])
        k_prod = net.k_rev * np.exp(ln_x @ net.Z[:, net.products])
        # relative to the one-way flux so large concentrations are not penalised
        scale = np.maximum(1.0, k_sub)
        flux = np.max(np.abs(k_sub - k_prod) / scale)
        if flux > tol:
            raise ConsistencyError(f"x_star is not a thermodynamic equilibrium: |v(x_star)| = {flux:.3e}")
        if np.any(np.abs(self.kappa - k_sub) > tol * scale):
            raise ConsistencyError("stored balanced constants disagree with x_star")


@dataclass(frozen=True)
class GeneralizedKinetics:
    """Positive state-dependent gains and monotone complex-wise nonlinearities.

    ``gain(x, x_star)`` returns the r positive reaction gains for a single
    state.  ``phi`` is either one vectorised callable applied to every
    complex, or a sequence of c scalar callables.
    """

    gain: Callable[[np.ndarray, np.ndarray], np.ndarray]
    phi: Callable[[np.ndarray], np.ndarray] | Sequence[Callable[[float], float]] = field(default=np.exp)

    def apply_phi(self, gamma: np.ndarray) -> np.ndarray:
        if callable(self.phi):
            return np.asarray(self.phi(gamma), dtype=float)
        gamma = np.asarray(gamma, dtype=float)
        out = np.empty_like(gamma)
        for rho, f in enumerate(self.phi):
            out[..., rho] = np.vectorize(f, otypes=[float])(gamma[..., rho])
        return out

    def problems(self, net: ReactionNetwork, x_star, samples: np.ndarray | None = None) -> list[str]:
        """Sample-based check of monotonicity of ``phi`` and positivity of ``gain``."""
        problems = []
        if not callable(self.phi) and len(self.phi) != net.c:
            problems.append(f"phi has {len(self.phi)} entries for {net.c} complexes")
            return problems
        grid = np.linspace(-5.0, 5.0, 201)
        vals = self.apply_phi(np.repeat(grid[:, None], net.c, axis=1))
        for rho in np.flatnonzero(~np.all(np.diff(vals, axis=0) > 0, axis=0)):
            problems.append(f"phi[{rho}] is not strictly increasing on [-5, 5]")
        if samples is None:
            rng = np.random.default_rng(0)
            samples = rng.uniform(0.05, 5.0, size=(32, net.m))
        for x in np.atleast_2d(samples):
            g = np.asarray(self.gain(x, np.asarray(x_star, dtype=float)), dtype=float)
            if g.shape != (net.r,) or not np.all(g > 0):
                problems.append(f"gain is not a positive r-vector at x={x.tolist()}")
                break
        return problems


def stoichiometric_matrix(net: ReactionNetwork) -> np.ndarray:
    return np.asarray(net.Z @ net.B)


def mass_action_flux(net: ReactionNetwork, x) -> np.ndarray:
    """Reaction fluxes ``k_forw * x^{Z_S} - k_rev * x^{Z_P}``."""
    ln_x = np.log(_positive(x))
    forward = net.k_forw * np.exp(ln_x @ net.Z[:, net.substrates])
    reverse = net.k_rev * np.exp(ln_x @ net.Z[:, net.products])
    return forward - reverse


def _complex_affinity(net, x_star, x):
    # gamma = Z^T Ln(x / x*)
    return np.log(_positive(x) / x_star) @ net.Z


def balanced_flux(bf: BalancedForm, net: ReactionNetwork, x) -> np.ndarray:
    """Fluxes in balanced form, ``-K B^T Exp(Z^T Ln(x / x*))``."""
    bf.check(net)
    gamma = _complex_affinity(net, bf.x_star, x)
    return -bf.kappa * (np.exp(gamma) @ net.B)


def reaction_field(bf: BalancedForm, net: ReactionNetwork, x) -> np.ndarray:
    return balanced_flux(bf, net, x) @ net.S.T


def generalized_reaction_field(gk: GeneralizedKinetics, net: ReactionNetwork, x_star, x) -> np.ndarray:
    """``-Z B K_g(x, x*) B^T Phi(Z^T Ln(x / x*))`` for a single state."""
    x_star = _positive(x_star, "x_star")
    x = _positive(x)
    gamma = _complex_affinity(net, x_star, x)
    gains = np.asarray(gk.gain(x, x_star), dtype=float)
    return -(gains * (gk.apply_phi(gamma) @ net.B)) @ net.S.T


def gibbs_energy(x_star, x) -> np.ndarray | float:
    """Gibbs free energy ``x^T Ln(x/x*) + (x* - x)^T 1`` (summed over the last axis)."""
    x_star = _positive(x_star, "x_star")
    x = _positive(x)
    g = np.sum(x * np.log(x / x_star) + x_star - x, axis=-1)
    return float(g) if np.ndim(g) == 0 else g


def chemical_potential(x_star, x) -> np.ndarray:
    return np.log(_positive(x) / _positive(x_star, "x_star"))


def find_equilibrium(
    net: ReactionNetwork,
    guess,
    tol: float = EQUILIBRIUM_TOL,
    max_iter: int = 20,
    full_output: bool = False,
):
    """Locate a thermodynamic equilibrium ``v(x) = 0`` near ``guess``.

    Detailed balance ``k_forw x^{Z_S} = k_rev x^{Z_P}`` is linear in ``ln x``:
    ``S^T ln x = ln(k_forw / k_rev)``.  The minimum-norm correction from
    ``ln guess`` is found by least squares (refined until the relative flux
    imbalance drops below ``tol``), so the result is the point of the
    equilibria set nearest the guess in log coordinates.

    Returns the :class:`BalancedForm`, or ``(form, iterations)`` when
    ``full_output`` is set.

    Raises:
        ConvergenceError: the rate constants admit no thermodynamic
            equilibrium (the linear system is inconsistent).
    """
    u = np.log(_positive(guess, "guess")).astype(float)
    if u.shape != (net.m,):
        raise ConsistencyError(f"guess has length {u.size}, expected {net.m}")
    St = net.S.T.astype(float)
    target = np.log(net.k_forw / net.k_rev)

    def imbalance(u):
        # |fw - rv| / (fw + rv) = tanh(|ln fw - ln rv| / 2)
        return float(np.max(np.tanh(0.5 * np.abs(target - St @ u))))

    res = imbalance(u)
    it = 0
    while res > tol:
        if it >= max_iter:
            raise ConvergenceError(
                f"no thermodynamic equilibrium: relative flux imbalance {res:.3e} after {it} "
                "least-squares corrections (rate constants violate detailed balance)"
            )
        u = u + np.linalg.lstsq(St, target - St @ u, rcond=None)[0]
        new = imbalance(u)
        it += 1
        if new >= res and new > tol:
            raise ConvergenceError(
                f"no thermodynamic equilibrium: relative flux imbalance stalls at {new:.3e} "
                "(rate constants violate detailed balance)"
            )
        res = new
    bf = BalancedForm.from_equilibrium(net, np.exp(u), tol)
    return (bf, it) if full_output else bf


def equilibria_set_member(bf: BalancedForm, net: ReactionNetwork, x_test, tol: float):
    """Test ``S^T Ln x_test == S^T Ln x_star`` in the max norm.

    Returns ``(is_member, residual)`` where ``residual`` is the difference
    vector (one entry per reaction, or an ``(N, r)`` array for stacked input).
    """
    residual = np.log(_positive(x_test, "x_test")) @ net.S - np.log(bf.x_star) @ net.S
    return bool(np.max(np.abs(residual)) <= tol), residual


def _rref_nullspace(A: list[list[Fraction]], n: int) -> list[list[Fraction]]:
    rows = [r[:] for r in A]
    pivots = []
    row = 0
    for col in range(n):
        piv = next((i for i in range(row, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[row], rows[piv] = rows[piv], rows[row]
        p = rows[row][col]
        rows[row] = [a / p for a in rows[row]]
        for i in range(len(rows)):
            if i != row and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[row])]
        pivots.append(col)
        row += 1
        if row == len(rows):
            break
    basis = []
    for free in (j for j in range(n) if j not in pivots):
        vec = [Fraction(0)] * n
        vec[free] = Fraction(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -rows[i][free]
        basis.append(vec)
    return basis


def _primitive(vec: list[Fraction]) -> list[int]:
    den = 1
    for a in vec:
        den = den * a.denominator // gcd(den, a.denominator)
    ints = [int(a * den) for a in vec]
    g = 0
    for a in ints:
        g = gcd(g, abs(a))
    ints = [a // g for a in ints] if g else ints
    first = next((a for a in ints if a), 0)
    return [-a for a in ints] if first < 0 else ints


def _rank(vectors: list[list[int]]) -> int:
    if not vectors:
        return 0
    n = len(vectors[0])
    frac = [[Fraction(a) for a in v] for v in vectors]
    return n - len(_rref_nullspace(frac, n))


def conservation_basis(net: ReactionNetwork, max_species_enum: int = 16) -> np.ndarray:
    """Integer basis of the left null space of ``S`` (conserved moieties).

    Elimination is exact (rational arithmetic).  When the network is small
    enough, nonnegative minimal-support vectors are preferred so the basis
    reads as chemical moieties; otherwise the reduced-echelon basis is used.
    """
    S = net.S
    m = net.m
    St = [[Fraction(int(a)) for a in row] for row in S.T]
    raw = [_primitive(v) for v in _rref_nullspace(St, m)]
    dim = len(raw)
    if dim == 0:
        return np.zeros((0, m), dtype=np.int64)
    chosen: list[list[int]] = []
    if m <= max_species_enum:
        for size in range(1, m + 1):
            for support in itertools.combinations(range(m), size):
                sub = [[Fraction(int(S[i, j])) for i in support] for j in range(S.shape[1])]
                ns = _rref_nullspace(sub, size)
                if len(ns) != 1:
                    continue
                v = _primitive(ns[0])
                if not all(a > 0 for a in v):
                    continue
                full = [0] * m
                for i, a in zip(support, v):
                    full[i] = a
                if _rank(chosen + [full]) > len(chosen):
                    chosen.append(full)
                if len(chosen) == dim:
                    return np.array(chosen, dtype=np.int64)
    for v in raw:
        if _rank(chosen + [v]) > len(chosen):
            chosen.append(v)
        if len(chosen) == dim:
            break
    return np.array(chosen, dtype=np.int64)


def network_arrays(data: dict):
    """Parse the JSON form into ``(species, Z, B, k_forw, k_rev)`` without validating.

    Two layouts are accepted: ``species`` + ``complexes`` (maps of species name
    to coefficient) + ``reactions`` (``substrate``/``product`` complex indices
    and ``k_forw``/``k_rev``), or the matrix layout ``species``, ``Z``, ``B``,
    ``k_forw``, ``k_rev``.
    """
    species = [str(s) for s in data["species"]]
    if "Z" in data:
        return (species, np.array(data["Z"]), np.array(data["B"]),
                np.array(data["k_forw"], dtype=float), np.array(data["k_rev"], dtype=float))
    index = {s: i for i, s in enumerate(species)}
    complexes = data["complexes"]
    Z = np.zeros((len(species), len(complexes)), dtype=np.int64)
    for rho, comp in enumerate(complexes):
        for name, coef in comp.items():
            if name not in index:
                raise ValueError(f"complex {rho} references unknown species {name!r}")
            Z[index[name], rho] += int(coef)
    reactions = data["reactions"]
    B = np.zeros((len(complexes), len(reactions)), dtype=np.int64)
    kf, kr = [], []
    for j, rx in enumerate(reactions):
        s, p = int(rx["substrate"]), int(rx["product"])
        for idx in (s, p):
            if not 0 <= idx < len(complexes):
                raise ValueError(f"reaction {j} references complex {idx} out of range")
        B[s, j] -= 1
        B[p, j] += 1
        kf.append(float(rx["k_forw"]))
        kr.append(float(rx["k_rev"]))
    return species, Z, B, np.array(kf), np.array(kr)


def network_from_dict(data: dict) -> ReactionNetwork:
    return ReactionNetwork(*network_arrays(data))


def network_to_dict(net: ReactionNetwork) -> dict:
    complexes = [
        {net.species_names[i]: int(net.Z[i, rho]) for i in np.flatnonzero(net.Z[:, rho])}
        for rho in range(net.c)
    ]
    reactions = [
        {"substrate": int(net.substrates[j]), "product": int(net.products[j]),
         "k_forw": float(net.k_forw[j]), "k_rev": float(net.k_rev[j])}
        for j in range(net.r)
    ]
    return {"species": list(net.species_names), "complexes": complexes, "reactions": reactions}


def load_network(path) -> ReactionNetwork:
    with open(Path(path)) as fh:
        return network_from_dict(json.load(fh))
