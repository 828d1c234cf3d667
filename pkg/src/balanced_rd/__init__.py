"""Structure-preserving compartmental simulation of balanced reaction-diffusion networks."""

from .errors import ConfigError, ConsistencyError, ConvergenceError, DomainError, MeshError
from .mesh import (
    DecOperators,
    SimplicialMesh,
    build_dec_operators,
    build_mesh,
    load_mesh,
    uniform_interval_mesh,
    weighted_laplacian,
)
from .model import (
    CompartmentalSystem,
    Diagnostics,
    assemble,
    closed_field,
    diagnostics,
    diffusion_only_system,
    energy_gradient,
    moiety_totals,
    open_field,
    total_energy,
)
from .network import (
    BalancedForm,
    GeneralizedKinetics,
    ReactionNetwork,
    balanced_flux,
    chemical_potential,
    equilibria_set_member,
    find_equilibrium,
    gibbs_energy,
    load_network,
    mass_action_flux,
    reaction_field,
    stoichiometric_matrix,
)
from .sim import IntegratorConfig, Termination, Trajectory, integrate, monitor_persistency, verify_lyapunov

__version__ = "0.1.0"
