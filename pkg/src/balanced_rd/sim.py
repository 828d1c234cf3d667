"""Adaptive time integration with positivity rejection and Lyapunov checks."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .errors import DomainError
from .model import (
    CompartmentalSystem,
    Diagnostics,
    closed_field,
    diagnostics,
    edge_weights,
    linear_diffusion_operator,
    open_field,
)

__all__ = [
    "IntegratorConfig",
    "Termination",
    "Trajectory",
    "PersistencyReport",
    "LyapunovReport",
    "integrate",
    "stable_step",
    "monitor_persistency",
    "verify_lyapunov",
]


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control, horizon and output cadence (all times in model units).

    Steady state is declared on the max norm of the field.  Near the explicit
    stability limit the step controller lets stiff diffusion modes ring at
    tolerance level, which that norm amplifies by the largest eigenvalue, so
    by default ``dt`` is capped at ``stability_fraction`` of the stability
    limit estimated for the diffusion operator.  Set it to ``None`` to rely on
    ``dt_max`` alone.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    dt_init: float = 1e-4
    dt_min: float = 1e-14
    dt_max: float = 1.0
    t_end: float = 200.0
    steady_tol: float = 1e-8
    record_every: float = 0.5
    positivity_floor: float = 0.0
    max_steps: int = 100_000_000
    stability_fraction: float | None = 0.5

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "dt_init", "dt_min", "dt_max", "t_end", "steady_tol", "record_every"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need dt_min <= dt_init <= dt_max")
        if self.positivity_floor < 0:
            raise ValueError("positivity_floor must be nonnegative")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.stability_fraction is not None and not 0 < self.stability_fraction <= 1:
            raise ValueError("stability_fraction must lie in (0, 1]")


class Termination(str, enum.Enum):
    STEADY_STATE = "steady_state"
    HORIZON = "horizon"
    POSITIVITY_FAILURE = "positivity_failure"
    STEP_FAILURE = "step_failure"


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    diagnostics: list[Diagnostics]
    termination: Termination
    system: CompartmentalSystem
    config: IntegratorConfig
    n_steps: int = 0
    n_rejected: int = 0

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_blocks(self) -> np.ndarray:
        return self.states[-1].reshape(self.system.N, self.system.m)

    @property
    def energies(self) -> np.ndarray:
        return np.array([d.G_d for d in self.diagnostics])

    @property
    def moiety_history(self) -> np.ndarray:
        return np.array([d.moieties for d in self.diagnostics])


# real-axis stability boundary of the Dormand-Prince 5(4) method
DOPRI_STABILITY = 3.3


def stable_step(sys: CompartmentalSystem, fraction: float = 0.5, X=None) -> float:
    """``fraction`` of the explicit stability limit for the diffusion part.

    The spectral radius is bounded by the largest absolute row sum of the
    linear diffusion operator (evaluated at ``X`` for state-dependent
    diffusion).  Returns ``inf`` when nothing diffuses.
    """
    if sys.const_weights is None:
        if X is None:
            raise ValueError("state-dependent diffusion needs a state to estimate stiffness")
        W = edge_weights(sys, X)
    else:
        W = sys.const_weights
    d0 = abs(sys.ops.d0)
    # row sums of |(star0^-1 (x) I) Delta_d diag(1/X*)| are 2 * star0^-1 * d0^T W / x*
    rho = 2.0 * (d0.T @ W) / sys.ops.star0_diag[:, None] / sys.x_star
    rho = float(rho.max())
    return np.inf if rho == 0 else fraction * DOPRI_STABILITY / rho


def _compiled_params(sys, inject):
    L = linear_diffusion_operator(sys)
    m = sys.m
    if sys.net is None:
        Z = np.zeros((m, 0), dtype=np.int64)
        B = np.zeros((0, 0))
        S = np.zeros((m, 0))
        kappa = np.zeros(0)
    else:
        Z = np.array(sys.net.Z, dtype=np.int64)
        B = sys.net.B.astype(float)
        S = sys.net.S.astype(float)
        kappa = np.array(sys.bf.kappa, dtype=float)
    return (
        L.indptr.astype(np.int64), L.indices.astype(np.int64), L.data.astype(float),
        np.ascontiguousarray(inject, dtype=float), Z, B, S, kappa, 1.0 / np.array(sys.x_star),
    )


def _injection(sys, f_b_hat):
    inject = np.zeros((sys.N, sys.m))
    if f_b_hat is not None:
        fb = np.asarray(f_b_hat, dtype=float).reshape(sys.n_boundary, sys.m)
        np.add.at(inject, sys.mesh.boundary_vertices, fb)
        inject /= sys.ops.star0_diag[:, None]
    return inject.ravel()


def _rhs_and_stepper(sys, f_b_hat, use_jit):
    time_dependent = callable(f_b_hat)
    if f_b_hat is not None and sys.mode != "open":
        raise ValueError("boundary fluxes require an open system")
    if use_jit and sys.const_weights is not None and not time_dependent:
        params = _compiled_params(sys, _injection(sys, f_b_hat))
        return _kernels.mass_action_rhs, params, _kernels.advance_compiled
    if f_b_hat is None:
        def rhs(t, X, p):
            if not np.all(X > 0):
                return np.full(X.size, np.nan)
            return closed_field(sys, X)
    else:
        def rhs(t, X, p):
            if not np.all(X > 0):
                return np.full(X.size, np.nan)
            fb = f_b_hat(t) if time_dependent else f_b_hat
            return open_field(sys, X, fb)
    return rhs, None, _kernels.advance


def integrate(
    sys: CompartmentalSystem,
    X0,
    cfg: IntegratorConfig | None = None,
    f_b_hat: np.ndarray | Callable[[float], np.ndarray] | None = None,
    use_jit: bool = True,
) -> Trajectory:
    """Integrate the compartmental model from ``X0``.

    ``f_b_hat`` (open systems only) is a constant boundary flux or a function
    of time.  A time-dependent flux switches off steady-state termination,
    since a momentarily vanishing field says nothing about later inputs.
    Failures do not raise: the trajectory up to the last accepted step is
    returned with the failure recorded in ``termination``.
    """
    cfg = cfg or IntegratorConfig()
    X = np.array(X0, dtype=float)
    if X.shape != (sys.size,):
        raise ValueError(f"initial state has shape {X.shape}, expected ({sys.size},)")
    if not np.all(X > 0):
        raise DomainError("initial state must be strictly positive")
    rhs, params, advance = _rhs_and_stepper(sys, f_b_hat, use_jit)

    times = [0.0]
    states = [X.copy()]
    t = 0.0
    k1 = rhs(t, X, params)
    dt_max = cfg.dt_max
    if cfg.stability_fraction is not None:
        dt_max = min(dt_max, stable_step(sys, cfg.stability_fraction, X))
    dt = min(cfg.dt_init, dt_max)
    n_acc = n_rej = 0
    steady_tol = -1.0 if callable(f_b_hat) else cfg.steady_tol
    status = _kernels.STEADY if np.max(np.abs(k1)) <= steady_tol else _kernels.RUNNING
    next_record = cfg.record_every
    while status not in (_kernels.STEADY, _kernels.POSITIVITY_FAILURE, _kernels.STEP_FAILURE):
        t_stop = min(next_record, cfg.t_end)
        t, X, k1, dt, status, acc, rej = advance(
            rhs, params, t, t_stop, X, k1, dt, cfg.rel_tol, cfg.abs_tol, cfg.dt_min, dt_max,
            cfg.positivity_floor, steady_tol, cfg.max_steps - n_acc - n_rej,
        )
        n_acc += acc
        n_rej += rej
        if t > times[-1]:
            times.append(t)
            states.append(np.array(X))
        if status == _kernels.REACHED:
            if t >= cfg.t_end:
                break
            next_record = min(next_record + cfg.record_every, cfg.t_end)

    termination = {
        _kernels.STEADY: Termination.STEADY_STATE,
        _kernels.POSITIVITY_FAILURE: Termination.POSITIVITY_FAILURE,
        _kernels.STEP_FAILURE: Termination.STEP_FAILURE,
    }.get(status, Termination.HORIZON)
    states = np.array(states)
    return Trajectory(
        times=np.array(times),
        states=states,
        diagnostics=[diagnostics(sys, s) for s in states],
        termination=termination,
        system=sys,
        config=cfg,
        n_steps=n_acc,
        n_rejected=n_rej,
    )


@dataclass
class PersistencyReport:
    """Running minima of every state component along a trajectory."""

    component_min: np.ndarray
    minimum: float
    floor: float
    warning: bool
    flagged: list[int] = field(default_factory=list)


def monitor_persistency(traj: Trajectory, floor: float = 1e-9) -> PersistencyReport:
    """Flag components whose recorded minimum dropped below ``floor``.

    This only watches for decay towards the boundary of the orthant; it cannot
    prove persistence.
    """
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    comp_min = traj.states.min(axis=0)
    flagged = np.flatnonzero(comp_min < floor).tolist()
    return PersistencyReport(
        component_min=comp_min,
        minimum=float(comp_min.min()),
        floor=floor,
        warning=bool(flagged),
        flagged=flagged,
    )


@dataclass
class LyapunovReport:
    passed: bool
    monotone: bool
    worst_increase: float
    increase_tol: float
    max_eps_R: float
    min_eps_D: float
    uniformity: float
    uniformity_applicable: bool
    uniform: bool | None
    eq_residual: float
    in_equilibria_set: bool | None
    messages: list[str] = field(default_factory=list)


def verify_lyapunov(
    traj: Trajectory,
    uniform_tol: float = 1e-6,
    eq_tol: float = 1e-3,
    increase_tol: float | None = None,
) -> LyapunovReport:
    """Check energy decay along the records and the end state of the run.

    Uniformity is only judged for steady runs where every species diffuses;
    otherwise it is reported as not applicable.
    """
    if increase_tol is None:
        increase_tol = max(1e-9, 10 * traj.config.abs_tol)
    G = traj.energies
    steps = np.diff(G)
    worst = float(steps.max()) if steps.size else 0.0
    monotone = worst <= increase_tol
    max_eps_R = max(float(d.eps_R.max()) for d in traj.diagnostics)
    min_eps_D = min(d.eps_D for d in traj.diagnostics)
    last = traj.diagnostics[-1]
    steady = traj.termination is Termination.STEADY_STATE
    applicable = steady and bool(np.all(traj.system.diffusing))
    uniform = (last.uniformity < uniform_tol) if applicable else None
    residual = float(last.eq_residual.max())
    in_set = (residual < eq_tol) if steady else None

    messages = []
    if not monotone:
        k = int(np.argmax(steps))
        messages.append(f"G_d increased by {worst:.3e} between t={traj.times[k]:.6g} and t={traj.times[k + 1]:.6g}")
    if max_eps_R > 0:
        messages.append(f"positive reaction dissipation {max_eps_R:.3e}")
    if min_eps_D < 0:
        messages.append(f"negative diffusion dissipation {min_eps_D:.3e}")
    if uniform is False:
        messages.append(f"final state not spatially uniform (spread {last.uniformity:.3e})")
    if in_set is False:
        messages.append(f"final state outside the equilibria set (residual {residual:.3e})")
    passed = monotone and max_eps_R <= 0 and min_eps_D >= 0 and uniform is not False and in_set is not False
    return LyapunovReport(
        passed=passed, monotone=monotone, worst_increase=worst, increase_tol=increase_tol,
        max_eps_R=max_eps_R, min_eps_D=min_eps_D, uniformity=last.uniformity,
        uniformity_applicable=applicable, uniform=uniform, eq_residual=residual,
        in_equilibria_set=in_set, messages=messages,
    )
